"""Discrete GD/AdaGrad/RMSProp steps and the normalized-coordinate view.

The conditioner state is the accumulator m with h = (cond_eps + m)^{-1/2}:

  adagrad   m <- m + g*g            (current gradient included before the step)
  rmsprop   m <- b*m + (1-b)*g*g
  gd        m unused, h = 1

A step reads the gradient once, folds it into m, then moves the
parameters with the updated conditioner.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, NumericError
from .problem import Problem

METHODS = ("gd", "adagrad", "rmsprop")
MODES = ("discrete", "flow")


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "gd"
    mode: str = "discrete"
    eta: float = 0.05
    cond_eps: float = 1e-3
    decay_b: float = 0.99
    max_steps: int = 10_000
    max_flow_time: float = 1e8
    checkpoint_ratio: float = 1.1
    # Flow-integrator knobs: initial dt and the per-step displacement cap
    # ||dw|| <= step_cap * (1 + ||w||). Halving step_cap halves the
    # first-order integration error.
    dt0: float = 1e-3
    step_cap: float = 0.1
    seed: int = 20240613
    init_scale: float = 0.5

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.eta <= 0:
            raise ConfigError("eta must be positive")
        if self.cond_eps <= 0:
            raise ConfigError("cond_eps must be positive")
        if not 0.0 < self.decay_b < 1.0:
            raise ConfigError("decay_b must lie in (0, 1)")
        if self.checkpoint_ratio <= 1.0:
            raise ConfigError("checkpoint_ratio must exceed 1")


@dataclass
class OptimizerState:
    """Parameters, conditioner accumulator, and the clock of one trajectory."""

    w: np.ndarray
    m: np.ndarray
    clock: float = 0.0
    grad_sq_total: float = 0.0

    @classmethod
    def initial(cls, p: int, config: OptimizerConfig) -> "OptimizerState":
        rng = np.random.default_rng(config.seed)
        w0 = config.init_scale * rng.standard_normal(p)
        return cls(w=w0, m=np.zeros(p), clock=0.0, grad_sq_total=0.0)

    def conditioner(self, config: OptimizerConfig) -> np.ndarray:
        """h = (cond_eps + m)^{-1/2}, or ones for plain GD."""
        if config.method == "gd":
            return np.ones_like(self.w)
        return 1.0 / np.sqrt(config.cond_eps + self.m)

    def copy(self) -> "OptimizerState":
        return OptimizerState(
            w=self.w.copy(),
            m=self.m.copy(),
            clock=self.clock,
            grad_sq_total=self.grad_sq_total,
        )


def _checked(state: OptimizerState, w_new: np.ndarray) -> None:
    if not np.all(np.isfinite(w_new)):
        raise NumericError("non-finite parameter update", last_state=state.copy())


def gd_step(state: OptimizerState, problem: Problem, eta: float,
            grad: np.ndarray | None = None) -> OptimizerState:
    g = problem.gradient(state.w) if grad is None else np.asarray(grad, dtype=float)
    w_new = state.w - eta * g
    _checked(state, w_new)
    return OptimizerState(
        w=w_new,
        m=state.m,
        clock=state.clock + 1,
        grad_sq_total=state.grad_sq_total + float(g @ g),
    )


def adagrad_step(state: OptimizerState, problem: Problem, config: OptimizerConfig,
                 grad: np.ndarray | None = None) -> OptimizerState:
    g = problem.gradient(state.w) if grad is None else np.asarray(grad, dtype=float)
    m_new = state.m + g * g
    w_new = state.w - config.eta * g / np.sqrt(config.cond_eps + m_new)
    _checked(state, w_new)
    return OptimizerState(
        w=w_new,
        m=m_new,
        clock=state.clock + 1,
        grad_sq_total=state.grad_sq_total + float(g @ g),
    )


def rmsprop_step(state: OptimizerState, problem: Problem, config: OptimizerConfig,
                 grad: np.ndarray | None = None) -> OptimizerState:
    g = problem.gradient(state.w) if grad is None else np.asarray(grad, dtype=float)
    b = config.decay_b
    m_new = b * state.m + (1.0 - b) * g * g
    w_new = state.w - config.eta * g / np.sqrt(config.cond_eps + m_new)
    _checked(state, w_new)
    return OptimizerState(
        w=w_new,
        m=m_new,
        clock=state.clock + 1,
        grad_sq_total=state.grad_sq_total + float(g @ g),
    )


def step(state: OptimizerState, problem: Problem, config: OptimizerConfig,
         eta: float | None = None) -> OptimizerState:
    """Dispatch one discrete step of the configured method."""
    eta = config.eta if eta is None else eta
    if config.method == "gd":
        return gd_step(state, problem, eta)
    if config.method == "adagrad":
        cfg = config if eta == config.eta else replace(config, eta=eta)
        return adagrad_step(state, problem, cfg)
    cfg = config if eta == config.eta else replace(config, eta=eta)
    return rmsprop_step(state, problem, cfg)


@dataclass(frozen=True)
class NormalizedView:
    """Trajectory state mapped to normalized coordinates.

    v = h_inf^{-1/2} (.) w, beta = h_inf^{-1} (.) h(t); margins and loss in
    the normalized space coincide with the original ones at the paired w.
    """

    v: np.ndarray
    beta: np.ndarray
    h_inf: np.ndarray
    problem: Problem

    @property
    def beta_max_dev(self) -> float:
        return float(np.max(np.abs(self.beta - 1.0)))

    def w_of_v(self, v: np.ndarray | None = None) -> np.ndarray:
        v = self.v if v is None else v
        return np.sqrt(self.h_inf) * v

    def margins(self, v: np.ndarray | None = None) -> np.ndarray:
        return self.problem.margins(self.w_of_v(v))

    def loss_value(self, v: np.ndarray | None = None) -> float:
        return self.problem.loss_value(self.w_of_v(v))

    def log_inv_loss(self, v: np.ndarray | None = None) -> float:
        return self.problem.log_inv_loss(self.w_of_v(v))

    def gradient(self, v: np.ndarray | None = None) -> np.ndarray:
        """Gradient of the normalized loss with respect to v."""
        return np.sqrt(self.h_inf) * self.problem.gradient(self.w_of_v(v))

    def margin_gradients(self, v: np.ndarray | None = None) -> np.ndarray:
        return np.sqrt(self.h_inf) * self.problem.margin_gradients(self.w_of_v(v))


def h_infinity(config: OptimizerConfig, state: OptimizerState) -> np.ndarray:
    """Terminal conditioner: exact for GD/RMSProp, end-of-run for AdaGrad."""
    if config.method == "gd":
        return np.ones_like(state.w)
    if config.method == "rmsprop":
        return np.full_like(state.w, config.cond_eps ** -0.5)
    return state.conditioner(config)


def normalize_view(state: OptimizerState, config: OptimizerConfig,
                   h_inf_estimate: np.ndarray, problem: Problem) -> NormalizedView:
    h_inf = np.asarray(h_inf_estimate, dtype=float)
    if np.any(h_inf <= 0):
        raise ConfigError("h_inf estimate must be componentwise positive")
    h = state.conditioner(config)
    return NormalizedView(
        v=state.w / np.sqrt(h_inf),
        beta=h / h_inf,
        h_inf=h_inf,
        problem=problem,
    )
