"""Homogeneous predictor families and their closed-form margin gradients.

Three families are supported, each positively homogeneous of an integer
degree in the flat parameter vector:

  linear            q(w, x) = <w, x>,                       degree 1
  deep-linear       q(w, x) = W_k ... W_1 x (dense chain),  degree k
  two-layer-relu    q(w, x) = sum_j a_j relu(<u_j, x>),     degree 2

Gradients are hand-derived per family (no autodiff); the finite-difference
property tests are the correctness gate. The ReLU subgradient at 0 is
fixed to 0 so trajectories are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ConfigError


@dataclass(frozen=True)
class ModelSpec:
    """Model family plus the shape metadata that fixes the flat layout."""

    kind: str
    depth: int = 2
    width: int = 1

    def __post_init__(self):
        if self.kind not in ("linear", "deep-linear", "two-layer-relu"):
            raise ConfigError(f"unknown model kind: {self.kind!r}")
        if self.kind == "deep-linear" and self.depth < 2:
            raise ConfigError("deep-linear requires depth >= 2 (use linear)")
        if self.width < 1:
            raise ConfigError("width must be >= 1")

    @property
    def degree(self) -> int:
        if self.kind == "linear":
            return 1
        if self.kind == "deep-linear":
            return self.depth
        return 2

    def param_count(self, d: int) -> int:
        if self.kind == "linear":
            return d
        if self.kind == "deep-linear":
            m = self.width
            return m * d + (self.depth - 2) * m * m + m
        m = self.width
        return m + m * d

    def layer_shapes(self, d: int) -> list[tuple[int, int]]:
        """Dense layer shapes of the deep-linear chain, first to last."""
        if self.kind != "deep-linear":
            raise ConfigError("layer_shapes is only defined for deep-linear")
        m = self.width
        shapes = [(m, d)]
        shapes += [(m, m)] * (self.depth - 2)
        shapes.append((1, m))
        return shapes


@dataclass(frozen=True)
class ParamVector:
    """Flat parameter vector; rejects non-finite entries at construction."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).ravel()
        if not np.all(np.isfinite(w)):
            raise ConfigError("parameter vector contains non-finite entries")
        object.__setattr__(self, "w", w)

    @property
    def p(self) -> int:
        return self.w.shape[0]


def _check_dims(model: ModelSpec, w: np.ndarray, data: Dataset) -> None:
    expected = model.param_count(data.d)
    if w.shape[0] != expected:
        raise ConfigError(
            f"parameter length {w.shape[0]} != {expected} required by "
            f"{model.kind} on d={data.d}"
        )


def _unpack_deep(model: ModelSpec, w: np.ndarray, d: int) -> list[np.ndarray]:
    mats, off = [], 0
    for rows, cols in model.layer_shapes(d):
        mats.append(w[off : off + rows * cols].reshape(rows, cols))
        off += rows * cols
    return mats


def _unpack_relu(model: ModelSpec, w: np.ndarray, d: int):
    m = model.width
    return w[:m], w[m:].reshape(m, d)


def predict_margins(model: ModelSpec, params: ParamVector, data: Dataset) -> np.ndarray:
    """Margins q_i = y_i * Phi(w, x_i) for every point, in dataset order."""
    w = params.w
    _check_dims(model, w, data)
    X, y = data.X, data.y
    if model.kind == "linear":
        return y * (X @ w)
    if model.kind == "deep-linear":
        mats = _unpack_deep(model, w, data.d)
        act = X.T
        for W in mats:
            act = W @ act
        return y * act.ravel()
    a, U = _unpack_relu(model, w, data.d)
    Z = U @ X.T
    return y * (a @ np.maximum(Z, 0.0))


def margin_gradient(model: ModelSpec, params: ParamVector, data: Dataset, i: int) -> np.ndarray:
    """Subgradient of q_i with respect to the flat parameter vector."""
    if not 0 <= i < data.n:
        raise ConfigError(f"point index {i} out of range for n={data.n}")
    return margin_gradients(model, params, data)[i]


def margin_gradients(model: ModelSpec, params: ParamVector, data: Dataset) -> np.ndarray:
    """All margin subgradients stacked into an (n, p) array."""
    w = params.w
    _check_dims(model, w, data)
    X, y = data.X, data.y
    n = data.n
    if model.kind == "linear":
        return y[:, None] * X
    if model.kind == "deep-linear":
        mats = _unpack_deep(model, w, data.d)
        k = len(mats)
        # forward[j] holds W_j ... W_1 X^T, forward[0] is X^T
        forward = [X.T]
        for W in mats:
            forward.append(W @ forward[-1])
        # back[j] holds the row vector W_k ... W_{j+2} of length rows(W_{j+1})
        back = [None] * k
        back[k - 1] = np.ones((1, 1))
        for j in range(k - 2, -1, -1):
            back[j] = back[j + 1] @ mats[j + 1]
        out = np.empty((n, w.shape[0]))
        for idx in range(n):
            pieces = []
            for j in range(k):
                grad_Wj = np.outer(back[j].ravel(), forward[j][:, idx])
                pieces.append(grad_Wj.ravel())
            out[idx] = y[idx] * np.concatenate(pieces)
        return out
    a, U = _unpack_relu(model, w, data.d)
    Z = U @ X.T
    R = np.maximum(Z, 0.0)
    # relu'(0) := 0, so the mask is strict.
    mask = (Z > 0.0).astype(float)
    out = np.empty((n, w.shape[0]))
    m = model.width
    for idx in range(n):
        grad_a = R[:, idx]
        grad_U = (a * mask[:, idx])[:, None] * X[idx][None, :]
        out[idx] = y[idx] * np.concatenate([grad_a, grad_U.ravel()])
    return out


def check_homogeneity(model: ModelSpec, params: ParamVector, data: Dataset, alpha: float) -> float:
    """Worst relative defect of q(alpha*w) = alpha^degree * q(w)."""
    if alpha <= 0:
        raise ConfigError("alpha must be positive")
    L = model.degree
    q = predict_margins(model, params, data)
    q_scaled = predict_margins(model, ParamVector(alpha * params.w), data)
    scale = alpha**L
    return float(np.max(np.abs(q_scaled - scale * q) / (1.0 + scale * np.abs(q))))


def euler_identity_residual(model: ModelSpec, params: ParamVector, data: Dataset) -> float:
    """Worst relative defect of <dq_i(w), w> = degree * q_i(w)."""
    L = model.degree
    q = predict_margins(model, params, data)
    grads = margin_gradients(model, params, data)
    lhs = grads @ params.w
    return float(np.max(np.abs(lhs - L * q) / (1.0 + np.abs(q))))
