"""Per-checkpoint analysis quantities along a trajectory.

Everything is computed in the normalized coordinates of a NormalizedView:
margins and loss agree with the original trajectory, while norms, the
surrogate norm rho = ||beta^{-1/2} (.) v||, the surrogate margin
gamma_tilde = g(log(1/loss)) / rho^degree, and the angle diagnostics are
taken in v-space.

Sign conventions for the conditioner integrals (fixed here once):
with h_inf taken as the terminal conditioner, beta = h_inf^{-1} (.) h(t)
approaches 1 from above for adagrad (monotone accumulator, h decreasing)
and from below for rmsprop. Hence beta^{-1/2} is nondecreasing for
adagrad, so d log beta^{-1/2}/dt >= 0 there and the positive-part
accumulator equals the full variation; for rmsprop the accumulator picks
up only the intervals where m grows. The rho_tilde correction integrand
<v, beta^{-1/2} (.) d(beta^{-1/2})/dt (.) v> is therefore nonnegative for
adagrad, giving rho_tilde <= rho, and sign-indefinite for rmsprop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from . import losses as Lf
from .errors import DomainError
from .optim import NormalizedView

# Values a CSV cell can carry when the quantity is undefined at a frame.
FLAG_OK = "ok"
FLAG_PRE = "pre"  # pre-separation: log(1/loss) <= 0, surrogate undefined
FLAG_INVALID = "invalid"  # rho_tilde radicand went negative (t1 too early)

CSV_COLUMNS = [
    "t", "loss", "log_inv_loss", "q_min", "norm_w", "norm_v", "rho",
    "rho_tilde", "nu", "gamma", "gamma_tilde", "gamma_prime", "cos_theta",
    "cos_theta_tilde", "zeta", "beta_max_dev", "kkt_eps", "kkt_delta",
    "valid_flag",
]


@dataclass
class DiagnosticsFrame:
    t: float
    loss: float
    log_inv_loss: float
    q_min: float
    norm_w: float
    norm_v: float
    rho: float
    rho_tilde: float | None
    nu: float
    gamma: float
    gamma_tilde: float | None
    gamma_prime: float | None
    cos_theta: float | None
    cos_theta_tilde: float | None
    zeta: float
    beta_max_dev: float
    kkt_eps: float | None
    kkt_delta: float | None
    valid_flag: str = FLAG_OK

    def csv_row(self) -> list[str]:
        row = []
        for f in fields(self):
            val = getattr(self, f.name)
            if val is None:
                row.append("")
            elif f.name == "valid_flag":
                row.append(val)
            else:
                row.append(repr(float(val)))
        return row


@dataclass
class RunningIntegrals:
    """Trapezoid-on-checkpoints accumulators owned by one trajectory."""

    rho_tilde_correction: float = 0.0
    zeta_accum: float = 0.0
    beta_log_pos_accum: float = 0.0
    # carried between updates
    _prev_unit_v: np.ndarray | None = field(default=None, repr=False)
    _prev_bmh: np.ndarray | None = field(default=None, repr=False)  # beta^{-1/2}
    _prev_v: np.ndarray | None = field(default=None, repr=False)


def normalized_margin(margins, vec, degree: int) -> float:
    """min_i q_i / ||vec||^degree; scale-invariant by homogeneity."""
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise DomainError("normalized margin undefined at the zero vector")
    return float(np.min(margins)) / norm**degree


def surrogate_margin(view: NormalizedView, loss_spec, margins=None):
    """g(log(1/loss)) / rho^degree, or (None, 'pre') before separation."""
    margins = view.margins() if margins is None else margins
    log_inv = Lf.log_inv_loss(loss_spec, margins)
    rho = float(np.linalg.norm(view.v / np.sqrt(view.beta)))
    if rho == 0.0:
        raise DomainError("surrogate margin undefined at the zero vector")
    if log_inv <= 0.0:
        return None, FLAG_PRE
    L = view.problem.degree
    return float(loss_spec.g(np.asarray([log_inv]))[0]) / rho**L, FLAG_OK


def nu_value(view: NormalizedView, loss_spec, margins=None) -> float:
    margins = view.margins() if margins is None else margins
    return Lf.nu_value(loss_spec, margins)


def gamma_prime(view: NormalizedView, loss_spec, margins=None):
    """log(1/loss) / ||v||^{degree/4}, or (None, 'pre') before separation."""
    margins = view.margins() if margins is None else margins
    log_inv = Lf.log_inv_loss(loss_spec, margins)
    if log_inv <= 0.0:
        return None, FLAG_PRE
    L = view.problem.degree
    norm_v = float(np.linalg.norm(view.v))
    if norm_v == 0.0:
        raise DomainError("gamma_prime undefined at the zero vector")
    return log_inv / norm_v ** (L / 4.0), FLAG_OK


def _unit(x: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(x))
    if n == 0.0:
        raise DomainError("cannot normalize the zero vector")
    return x / n


def angles(view: NormalizedView, grad_v: np.ndarray) -> tuple[float, float]:
    """(cos_theta, cos_theta_tilde) between v and the descent direction."""
    if float(np.linalg.norm(grad_v)) == 0.0:
        raise DomainError("angles undefined for a zero gradient")
    v_hat = _unit(view.v)
    g_hat = _unit(-grad_v)
    cos_theta = float(np.clip(v_hat @ g_hat, -1.0, 1.0))
    bmh = 1.0 / np.sqrt(view.beta)
    u = _unit(bmh * view.v)
    z = _unit(-(np.sqrt(view.beta) * grad_v))
    cos_theta_tilde = float(np.clip(u @ z, -1.0, 1.0))
    return cos_theta, cos_theta_tilde


def curve_length_update(zeta_accum: float, unit_prev: np.ndarray, unit_next: np.ndarray) -> float:
    """Chord approximation of the swept arc length."""
    return zeta_accum + float(np.linalg.norm(unit_next - unit_prev))


def rho_tilde_update(integrals: RunningIntegrals, view: NormalizedView) -> tuple[float | None, str]:
    """Advance the correction integral with this checkpoint and return rho_tilde.

    Uses the trapezoid rule on checkpoint times for
    2 * int <v, beta^{-1/2} (.) d(beta^{-1/2})/dt (.) v> dt, then
    rho_tilde = sqrt(rho^2 - correction). A negative radicand means t1 was
    detected too early; the frame is flagged invalid.
    """
    bmh = 1.0 / np.sqrt(view.beta)
    if integrals._prev_bmh is not None:
        prev_integrand = integrals._prev_v**2 * integrals._prev_bmh
        next_integrand = view.v**2 * bmh
        delta = bmh - integrals._prev_bmh
        integrals.rho_tilde_correction += float(
            np.sum((prev_integrand + next_integrand) * delta)
        )
    integrals._prev_bmh = bmh.copy()
    integrals._prev_v = view.v.copy()
    rho_sq = float(np.sum(bmh**2 * view.v**2))
    radicand = rho_sq - integrals.rho_tilde_correction
    if radicand < 0.0:
        return None, FLAG_INVALID
    return math.sqrt(radicand), FLAG_OK


def beta_log_pos_update(integrals: RunningIntegrals, beta_prev: np.ndarray, beta_next: np.ndarray) -> None:
    """Accumulate sum_j (delta log beta_j^{-1/2})_+ between checkpoints."""
    delta = -0.5 * (np.log(beta_next) - np.log(beta_prev))
    integrals.beta_log_pos_accum += float(np.sum(np.maximum(delta, 0.0)))


def detect_t1(frames, q_min_threshold: float = 0.0, beta_dev_threshold: float = 0.1):
    """First checkpoint index where q_min > threshold, the beta deviation is
    small, and the surrogate margin exists (the run is past separation, so
    the floor anchor gamma_tilde(t1) is defined); None when no frame
    qualifies yet."""
    for idx, fr in enumerate(frames):
        if (
            fr.q_min > q_min_threshold
            and fr.beta_max_dev < beta_dev_threshold
            and fr.log_inv_loss > 0.0
        ):
            return idx
    return None


@dataclass
class RateReport:
    conclusive: bool
    reason: str = ""
    r_min: float = float("nan")
    r_max: float = float("nan")
    r_ratio: float = float("nan")
    norm_slope: float = float("nan")
    grad_band_min: float = float("nan")
    grad_band_max: float = float("nan")
    grad_band_ratio: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "conclusive": self.conclusive,
            "reason": self.reason,
            "r_min": self.r_min,
            "r_max": self.r_max,
            "r_ratio": self.r_ratio,
            "norm_slope": self.norm_slope,
            "grad_band_min": self.grad_band_min,
            "grad_band_max": self.grad_band_max,
            "grad_band_ratio": self.grad_band_ratio,
        }


def rate_check(times, losses, norms_v, grad_norms_v, degree: int, t1_time: float) -> RateReport:
    """Late-time convergence-rate bands.

    r(t) = loss * t * (log t)^(2 - 2/degree) should be flat over the last
    two decades; the slope of log||v|| against log log t should approach
    1/degree; ||grad||_v * t * (log t)^(1 - 1/degree) should stay inside a
    constant band. The window never extends below max(t1, e) so the log
    factors stay positive. Note the norm growth checked here is
    ||v|| ~ (log t)^{1/degree}, i.e. unbounded growth, consistent with the
    loss bands and with loss -> 0.
    """
    times = np.asarray(times, dtype=float)
    losses = np.asarray(losses, dtype=float)
    norms_v = np.asarray(norms_v, dtype=float)
    grad_norms_v = np.asarray(grad_norms_v, dtype=float)
    if times.size == 0:
        return RateReport(False, "empty trajectory")
    t_final = times[-1]
    lo = max(t1_time, math.e)
    if t_final < 100.0 * lo:
        return RateReport(False, "fewer than two decades past t1")
    window = times >= t_final / 100.0
    window &= times >= lo
    if int(np.sum(window)) < 4:
        return RateReport(False, "too few checkpoints in the final two decades")
    t = times[window]
    logt = np.log(t)
    r = losses[window] * t * logt ** (2.0 - 2.0 / degree)
    gband = grad_norms_v[window] * t * logt ** (1.0 - 1.0 / degree)
    x = np.log(np.log(t))
    yv = np.log(norms_v[window])
    slope = float(np.polyfit(x, yv, 1)[0])
    r_min, r_max = float(np.min(r)), float(np.max(r))
    g_min, g_max = float(np.min(gband)), float(np.max(gband))
    return RateReport(
        conclusive=True,
        r_min=r_min,
        r_max=r_max,
        r_ratio=r_max / r_min if r_min > 0 else float("inf"),
        norm_slope=slope,
        grad_band_min=g_min,
        grad_band_max=g_max,
        grad_band_ratio=g_max / g_min if g_min > 0 else float("inf"),
    )
