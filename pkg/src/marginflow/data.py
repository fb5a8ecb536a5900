"""Labeled datasets: validation, CSV I/O, and the bundled generators."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class Dataset:
    """n labeled points; X has shape (n, d), y entries are exactly +-1."""

    X: np.ndarray
    y: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise ConfigError("point/label count mismatch")
        if X.shape[0] < 1:
            raise ConfigError("dataset must contain at least one point")
        if not np.all(np.isfinite(X)):
            raise ConfigError("dataset contains non-finite coordinates")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            bad = sorted(set(y[~np.isin(y, (-1.0, 1.0))]))
            raise ConfigError(f"labels must be exactly +-1, found {bad}")
        # Identical points with opposite labels make separability impossible
        # by construction; reject them outright.
        order = np.lexsort(X.T)
        Xs, ys = X[order], y[order]
        for i in range(len(ys) - 1):
            if ys[i] != ys[i + 1] and np.array_equal(Xs[i], Xs[i + 1]):
                raise ConfigError(
                    "duplicate points with opposite labels: "
                    "dataset is non-separable by construction"
                )
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.X.tobytes())
        h.update(self.y.tobytes())
        return h.hexdigest()[:16]


def load_csv(path) -> Dataset:
    """Read a dataset from CSV with header x1,...,xd,y and y in {-1, 1}."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ConfigError(f"{path}: empty dataset file")
        expected = [f"x{i + 1}" for i in range(len(header) - 1)] + ["y"]
        if [c.strip() for c in header] != expected:
            raise ConfigError(f"{path}: header must be {','.join(expected)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ConfigError(f"{path}:{lineno}: wrong column count")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=float)
    return Dataset(arr[:, :-1], arr[:, -1])


def save_csv(dataset: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(dataset.d)] + ["y"])
        for x, lab in zip(dataset.X, dataset.y):
            writer.writerow([repr(float(v)) for v in x] + [repr(float(lab))])


def _linear2d_iso() -> Dataset:
    # Symmetric 4-point set, invariant under swapping the two coordinates
    # together with relabeling, so both coordinates see equal gradient
    # energy. The four effective constraint vectors y_i * x_i are distinct,
    # which keeps the support margins from collapsing onto each other in
    # finite time.
    X = np.array([[2.0, 0.3], [0.3, 2.0], [-2.0, 0.3], [0.3, -2.0]])
    y = np.array([1.0, 1.0, -1.0, -1.0])
    return Dataset(X, y, name="linear2d_iso")


def _linear2d_aniso() -> Dataset:
    # The near-diagonal pair fixes the plain max-margin direction at 45
    # degrees; the off-axis (-3.5, 0.5) point is slack at that optimum but
    # makes the small-init gradient roughly (5.5, 1.5), i.e. one coordinate
    # carries ~10x the squared gradient energy, so adagrad's accumulated
    # conditioner is strongly anisotropic and visibly rotates its limit.
    X = np.array([[1.1, 0.9], [-0.9, -1.1], [-3.5, 0.5]])
    y = np.array([1.0, -1.0, -1.0])
    return Dataset(X, y, name="linear2d_aniso")


def _linear3d_rand(seed: int) -> Dataset:
    rng = np.random.default_rng(seed)
    w_true = rng.standard_normal(3)
    w_true /= np.linalg.norm(w_true)
    pts = []
    while len(pts) < 10:
        x = rng.standard_normal(3)
        margin = float(x @ w_true)
        if abs(margin) >= 0.3:
            pts.append((x, np.sign(margin)))
    X = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    return Dataset(X, y, name="linear3d_rand")


def _xor_relu() -> Dataset:
    X = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
    y = np.array([-1.0, -1.0, 1.0, 1.0])
    return Dataset(X, y, name="xor_relu")


def _single1d() -> Dataset:
    return Dataset(np.array([[1.0]]), np.array([1.0]), name="single1d")


GENERATORS = {
    "linear2d_iso": lambda seed: _linear2d_iso(),
    "linear2d_aniso": lambda seed: _linear2d_aniso(),
    "linear3d_rand": _linear3d_rand,
    "xor_relu": lambda seed: _xor_relu(),
    "single1d": lambda seed: _single1d(),
}


def generate(name: str, seed: int = 0) -> Dataset:
    if name not in GENERATORS:
        raise ConfigError(
            f"unknown dataset generator {name!r}; known: {sorted(GENERATORS)}"
        )
    return GENERATORS[name](seed)
