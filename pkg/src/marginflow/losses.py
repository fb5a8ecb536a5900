"""Exponential and logistic losses through the (f, f', g, g') quadruple.

Both losses are written as ell(q) = exp(-f(q)) with f strictly increasing,
so the empirical loss is sum_i exp(-f(q_i)) and log(1/loss) can always be
obtained from the margins by a log-sum-exp, even when the loss itself
underflows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

# Above this point the logistic f, f', g, g' switch to their asymptotic
# expansions; the neglected terms are O(exp(-2x)) < 1e-17 for x > 20.
_ASYMPTOTE = 20.0
# exp(-x) overflows past ~709.78; reject logistic g there.
_G_OVERFLOW = -700.0


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def _exp_f(q):
    return np.asarray(q, dtype=float)


def _exp_fprime(q):
    return np.ones_like(np.asarray(q, dtype=float))


def _exp_g(x):
    return np.asarray(x, dtype=float)


def _exp_gprime(x):
    return np.ones_like(np.asarray(x, dtype=float))


def _log_f(q):
    q = np.asarray(q, dtype=float)
    out = np.empty_like(q)
    hi = q > _ASYMPTOTE
    out[hi] = q[hi] + 0.5 * np.exp(-q[hi])
    out[~hi] = -np.log(_softplus(-q[~hi]))
    return out


def _log_fprime(q):
    q = np.asarray(q, dtype=float)
    out = np.empty_like(q)
    hi = q > _ASYMPTOTE
    out[hi] = 1.0 - 0.5 * np.exp(-q[hi])
    lo = ~hi
    # sigma(-q) / softplus(-q)
    out[lo] = 1.0 / ((1.0 + np.exp(q[lo])) * _softplus(-q[lo]))
    return out


def _log_g(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < _G_OVERFLOW):
        raise DomainError("logistic inverse overflows for arguments below -700")
    out = np.empty_like(x)
    hi = x > _ASYMPTOTE
    out[hi] = x[hi] - 0.5 * np.exp(-x[hi])
    lo = ~hi
    out[lo] = -np.log(np.expm1(np.exp(-x[lo])))
    return out


def _log_gprime(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < _G_OVERFLOW):
        raise DomainError("logistic inverse overflows for arguments below -700")
    out = np.empty_like(x)
    hi = x > _ASYMPTOTE
    out[hi] = 1.0 + 0.5 * np.exp(-x[hi])
    lo = ~hi
    u = np.exp(-x[lo])
    # d/dx [-log(expm1(u))] with u = exp(-x) equals u / (1 - exp(-u))
    out[lo] = u / (-np.expm1(-u))
    return out


@dataclass(frozen=True)
class LossSpec:
    """One of the two supported losses, with f, f', g = f^{-1}, g'."""

    kind: str

    def __post_init__(self):
        if self.kind not in ("exponential", "logistic"):
            raise DomainError(f"unknown loss kind: {self.kind!r}")

    def f(self, q):
        return _exp_f(q) if self.kind == "exponential" else _log_f(q)

    def fprime(self, q):
        return _exp_fprime(q) if self.kind == "exponential" else _log_fprime(q)

    def g(self, x):
        return _exp_g(x) if self.kind == "exponential" else _log_g(x)

    def gprime(self, x):
        return _exp_gprime(x) if self.kind == "exponential" else _log_gprime(x)

    def ell(self, q):
        """Per-sample loss exp(-f(q)), computed stably."""
        q = np.asarray(q, dtype=float)
        if self.kind == "exponential":
            return np.exp(-q)
        return _softplus(-q)


def g_eval(loss: LossSpec, x: float) -> float:
    """Evaluate g = f^{-1} at a scalar point."""
    return float(loss.g(np.asarray([x]))[0])


def loss_value(loss: LossSpec, margins) -> float:
    """Total loss sum_i exp(-f(q_i)); may round to 0.0 on extreme margins."""
    margins = np.asarray(margins, dtype=float)
    if margins.size == 0:
        raise DomainError("loss_value requires at least one margin")
    return float(np.sum(loss.ell(margins)))


def log_inv_loss(loss: LossSpec, margins) -> float:
    """log(1 / sum_i exp(-f(q_i))) via log-sum-exp, immune to underflow."""
    margins = np.asarray(margins, dtype=float)
    if margins.size == 0:
        raise DomainError("log_inv_loss requires at least one margin")
    from scipy.special import logsumexp

    return float(-logsumexp(-loss.f(margins)))


def margin_weights(loss: LossSpec, margins) -> np.ndarray:
    """Per-sample gradient weights exp(-f(q_i)) * f'(q_i)."""
    margins = np.asarray(margins, dtype=float)
    return loss.ell(margins) * loss.fprime(margins)


def nu_value(loss: LossSpec, margins) -> float:
    """Radial loss-decrease component sum_i exp(-f(q_i)) f'(q_i) q_i."""
    margins = np.asarray(margins, dtype=float)
    return float(np.sum(margin_weights(loss, margins) * margins))
