"""Render publication-style figures from marginflow run artifacts.

Four figure kinds, all reading the trajectory CSV schema (19 columns) and
optionally summary.json:

  margin     gamma and gamma_tilde over time with the surrogate floor line
  rate       loss * t * (log t)^(2 - 2/degree) with its constant band
  direction  unit-direction trail on the circle/sphere with the oracle mark
  kkt        stationarity and complementarity residual decay

Rendering is deterministic: fixed figure geometry, no timestamps or
version strings embedded, so re-rendering a spec overwrites the file with
identical bytes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "marginflow-plots"

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

KINDS = ("margin", "rate", "direction", "kkt")

CSV_COLUMNS = [
    "t", "loss", "log_inv_loss", "q_min", "norm_w", "norm_v", "rho",
    "rho_tilde", "nu", "gamma", "gamma_tilde", "gamma_prime", "cos_theta",
    "cos_theta_tilde", "zeta", "beta_max_dev", "kkt_eps", "kkt_delta",
    "valid_flag",
]

_FIGSIZE = (6.4, 4.2)
_DPI = 120


class SchemaError(ValueError):
    """Input CSV does not match the trajectory schema."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    csv_paths: tuple[str, ...]
    out_path: str
    summary_path: str | None = None
    fmt: str = "png"
    xscale: str = "log"
    yscale: str = "linear"
    degree: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; choose from {KINDS}")
        if self.fmt not in ("png", "svg"):
            raise SchemaError(f"unknown output format {self.fmt!r}")
        if not self.csv_paths:
            raise SchemaError("at least one trajectory CSV is required")


def load_trajectory(path) -> dict[str, np.ndarray]:
    """Read one trajectory CSV; empty cells become NaN."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file")
        for col in CSV_COLUMNS:
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r}")
        rows = [row for row in reader if row]
    idx = {col: header.index(col) for col in CSV_COLUMNS}
    out: dict[str, np.ndarray] = {}
    for col in CSV_COLUMNS:
        if col == "valid_flag":
            out[col] = np.array([row[idx[col]] for row in rows])
        else:
            out[col] = np.array(
                [float(row[idx[col]]) if row[idx[col]] != "" else math.nan
                 for row in rows]
            )
    return out


def _load_summary(spec: FigureSpec) -> dict:
    if spec.summary_path is None:
        raise SchemaError(f"figure kind {spec.kind!r} requires --summary")
    with open(spec.summary_path) as fh:
        return json.load(fh)


def _new_axes():
    fig, ax = plt.subplots(figsize=_FIGSIZE, dpi=_DPI)
    return fig, ax


def _save(fig, spec: FigureSpec) -> str:
    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    if spec.fmt == "png":
        fig.savefig(out, format="png", metadata={"Software": None})
    else:
        fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return str(out)


def _fig_margin(spec: FigureSpec):
    summary = _load_summary(spec)
    t1 = summary.get("t1")
    fig, ax = _new_axes()
    floor = None
    for path in spec.csv_paths:
        tr = load_trajectory(path)
        label = Path(path).parent.name or Path(path).stem
        ax.plot(tr["t"], tr["gamma"], label=f"{label} normalized margin")
        ax.plot(tr["t"], tr["gamma_tilde"], "--", label=f"{label} surrogate margin")
        if floor is None and t1 is not None:
            past = (tr["t"] >= t1) & ~np.isnan(tr["gamma_tilde"])
            if np.any(past):
                anchor = tr["gamma_tilde"][past][0]
                floor = math.exp(-0.5) * anchor
    if floor is not None:
        ax.axhline(floor, color="crimson", lw=1.0,
                   label="floor e^{-1/2} margin(t1)")
    ax.set_xscale(spec.xscale)
    ax.set_yscale(spec.yscale)
    ax.set_xlabel("t")
    ax.set_ylabel("margin")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("normalized and surrogate margins")
    return fig


def _fig_rate(spec: FigureSpec):
    degree = spec.degree
    if degree is None and spec.summary_path is not None:
        degree = _load_summary(spec).get("degree")
    if degree is None:
        degree = 1
    fig, ax = _new_axes()
    for path in spec.csv_paths:
        tr = load_trajectory(path)
        t = tr["t"]
        ok = t > math.e
        r = tr["loss"][ok] * t[ok] * np.log(t[ok]) ** (2.0 - 2.0 / degree)
        ax.plot(t[ok], r, label=Path(path).parent.name or Path(path).stem)
        window = t[ok] >= t[ok][-1] / 100.0
        if np.any(window):
            lo, hi = float(np.nanmin(r[window])), float(np.nanmax(r[window]))
            ax.axhspan(lo, hi, color="tab:orange", alpha=0.15)
            ax.axhline(0.5 * (lo + hi), color="tab:orange", lw=1.0)
    ax.set_xscale(spec.xscale)
    ax.set_yscale(spec.yscale)
    ax.set_xlabel("t")
    ax.set_ylabel("loss * t * (log t)^(2-2/L)")
    ax.legend(loc="best", fontsize=8)
    ax.set_title(f"rate band (degree {degree})")
    return fig


def _fig_direction(spec: FigureSpec):
    summary = _load_summary(spec)
    trail = np.asarray(summary.get("direction_trail", []), dtype=float)
    if trail.size == 0:
        raise SchemaError("summary carries no direction trail")
    dims = trail.shape[1] - 1
    oracle = (summary.get("oracle") or {}).get("p_direction")
    if dims == 2:
        fig, ax = _new_axes()
        theta = np.linspace(0, 2 * math.pi, 256)
        ax.plot(np.cos(theta), np.sin(theta), color="0.8", lw=1.0)
        ax.plot(trail[:, 1], trail[:, 2], ".-", ms=3, lw=0.8, label="direction trail")
        ax.plot(trail[-1, 1], trail[-1, 2], "o", color="tab:green", label="endpoint")
        if oracle:
            o = np.asarray(oracle, dtype=float)
            o = o / np.linalg.norm(o)
            ax.plot([0, o[0]], [0, o[1]], color="crimson", lw=1.2, label="oracle direction")
            base = math.atan2(o[1], o[0])
            arc = np.linspace(base - math.radians(5), base + math.radians(5), 64)
            ax.plot(np.cos(arc), np.sin(arc), color="crimson", lw=3, alpha=0.5,
                    label="5 deg arc")
        ax.set_aspect("equal")
        ax.legend(loc="best", fontsize=8)
        ax.set_title("parameter direction on the unit circle")
        return fig
    if dims == 3:
        fig = plt.figure(figsize=_FIGSIZE, dpi=_DPI)
        ax = fig.add_subplot(projection="3d")
        ax.plot(trail[:, 1], trail[:, 2], trail[:, 3], ".-", ms=2, lw=0.8)
        if oracle:
            o = np.asarray(oracle, dtype=float)
            o = o / np.linalg.norm(o)
            ax.scatter(*o, color="crimson", s=40)
        ax.set_title("parameter direction on the unit sphere")
        return fig
    raise SchemaError(f"direction figures support 2-D/3-D trails, got {dims}-D")


def _fig_kkt(spec: FigureSpec):
    fig, ax = _new_axes()
    for path in spec.csv_paths:
        tr = load_trajectory(path)
        label = Path(path).parent.name or Path(path).stem
        ok = ~np.isnan(tr["kkt_eps"])
        ax.plot(tr["t"][ok], tr["kkt_eps"][ok], label=f"{label} stationarity")
        okd = ~np.isnan(tr["kkt_delta"]) & (tr["kkt_delta"] > 0)
        ax.plot(tr["t"][okd], tr["kkt_delta"][okd], "--",
                label=f"{label} complementarity")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("residual")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("approximate-KKT residual decay")
    return fig


_RENDERERS = {
    "margin": _fig_margin,
    "rate": _fig_rate,
    "direction": _fig_direction,
    "kkt": _fig_kkt,
}


def render(spec: FigureSpec) -> str:
    """Render one figure and return the output path."""
    fig = _RENDERERS[spec.kind](spec)
    return _save(fig, spec)
