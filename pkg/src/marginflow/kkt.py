"""Max-margin KKT certification: multiplier construction, residuals,
and an exact active-set oracle for small linear instances.

The target problems share the template

    min 1/2 ||s (.) w||^2   subject to  q_i(w) >= 1,

with s = 1 for plain gradient descent / rmsprop limits and
s = h_inf^{-1/2} for adagrad. The substitution u = s (.) w turns the
weighted instance into the unweighted one on features x (/) s, which is
how the oracle solves it.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import AssumptionError, ConfigError, DomainError
from .losses import LossSpec, margin_weights
from .models import ModelSpec, ParamVector, margin_gradients, predict_margins
from .optim import NormalizedView

_ORACLE_MAX_N = 12
_ORACLE_MAX_D = 6
FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class MarginProblem:
    """A weighted hard-margin instance; scaling s is componentwise positive."""

    model: ModelSpec
    data: Dataset
    scaling: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scaling, dtype=float).ravel()
        if np.any(s <= 0) or not np.all(np.isfinite(s)):
            raise ConfigError("scaling must be componentwise positive and finite")
        object.__setattr__(self, "scaling", s)

    @classmethod
    def unweighted(cls, model: ModelSpec, data: Dataset) -> "MarginProblem":
        return cls(model, data, np.ones(model.param_count(data.d)))

    def margins(self, w: np.ndarray) -> np.ndarray:
        return predict_margins(self.model, ParamVector(w), self.data)

    def margin_grads(self, w: np.ndarray) -> np.ndarray:
        return margin_gradients(self.model, ParamVector(w), self.data)

    def objective(self, w: np.ndarray) -> float:
        return 0.5 * float(np.sum((self.scaling * w) ** 2))


@dataclass
class KktReport:
    point: np.ndarray
    lambdas: np.ndarray
    kkt_eps: float
    kkt_delta: float
    feasible: bool
    multiplier_source: str

    def to_dict(self) -> dict:
        return {
            "point": [float(v) for v in self.point],
            "lambdas": [float(v) for v in self.lambdas],
            "kkt_eps": self.kkt_eps,
            "kkt_delta": self.kkt_delta,
            "feasible": self.feasible,
            "multiplier_source": self.multiplier_source,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass
class OracleSolution:
    w_star: np.ndarray
    active_set: tuple[int, ...]
    lambdas: np.ndarray
    objective: float

    def to_dict(self) -> dict:
        return {
            "w_star": [float(v) for v in self.w_star],
            "active_set": list(self.active_set),
            "lambdas": [float(v) for v in self.lambdas],
            "objective": self.objective,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def scale_to_boundary(params: ParamVector, model: ModelSpec, data: Dataset) -> ParamVector:
    """Rescale w so that the smallest margin is exactly 1."""
    q_min = float(np.min(predict_margins(model, params, data)))
    if q_min <= 0.0:
        raise DomainError("cannot scale to the constraint boundary: min margin <= 0")
    L = model.degree
    return ParamVector(params.w / q_min ** (1.0 / L))


def paper_lambdas(view: NormalizedView, loss_spec: LossSpec, margins=None,
                  grad_v: np.ndarray | None = None) -> np.ndarray:
    """Multipliers q_min^{1-2/L} ||v|| w_i / ||grad||, w_i = exp(-f(q_i)) f'(q_i)."""
    margins = view.margins() if margins is None else np.asarray(margins, dtype=float)
    q_min = float(np.min(margins))
    if q_min <= 0.0:
        raise DomainError("multiplier construction requires positive margins")
    grad_v = view.gradient() if grad_v is None else grad_v
    grad_norm = float(np.linalg.norm(grad_v))
    if grad_norm == 0.0:
        raise DomainError("multiplier construction requires a nonzero gradient")
    L = view.problem.degree
    weights = margin_weights(loss_spec, margins)
    return q_min ** (1.0 - 2.0 / L) * float(np.linalg.norm(view.v)) * weights / grad_norm


def kkt_residual(problem: MarginProblem, point: np.ndarray, lambdas) -> tuple[float, float]:
    """(stationarity norm, worst complementarity slack) at a feasible point."""
    lambdas = np.asarray(lambdas, dtype=float).ravel()
    if np.any(lambdas < 0):
        raise ConfigError("multipliers must be nonnegative")
    grads = problem.margin_grads(point)
    stationarity = problem.scaling**2 * point - grads.T @ lambdas
    kkt_eps = float(np.linalg.norm(stationarity))
    margins = problem.margins(point)
    kkt_delta = float(np.max(lambdas * (margins - 1.0))) if lambdas.size else 0.0
    return kkt_eps, kkt_delta


def certify_point(problem: MarginProblem, point: np.ndarray, lambdas,
                  multiplier_source: str) -> KktReport:
    """Package residuals + feasibility for a candidate point into a report."""
    lambdas = np.asarray(lambdas, dtype=float).ravel()
    eps, delta = kkt_residual(problem, point, lambdas)
    feasible = bool(np.min(problem.margins(point)) >= 1.0 - FEASIBILITY_TOL)
    return KktReport(
        point=np.asarray(point, dtype=float),
        lambdas=lambdas,
        kkt_eps=eps,
        kkt_delta=delta,
        feasible=feasible,
        multiplier_source=multiplier_source,
    )


def nnls_lambdas(problem: MarginProblem, point: np.ndarray,
                 max_iter: int = 10_000, tol: float = 1e-12) -> np.ndarray:
    """Best-fit nonnegative multipliers by projected gradient.

    Minimizes ||s^2 (.) point - sum_i lam_i dq_i(point)||^2 over lam >= 0;
    stops after max_iter iterations or when the projected gradient norm
    drops below tol.
    """
    J = problem.margin_grads(point).T  # (p, n)
    b = problem.scaling**2 * point
    n = J.shape[1]
    G = J.T @ J
    c = J.T @ b
    lip = float(np.linalg.norm(G, 2))
    if lip == 0.0:
        return np.zeros(n)
    step = 1.0 / lip
    lam = np.zeros(n)
    for _ in range(max_iter):
        grad = G @ lam - c
        lam_new = np.maximum(lam - step * grad, 0.0)
        projected = np.where((lam <= 0.0) & (grad > 0.0), 0.0, grad)
        lam = lam_new
        if float(np.linalg.norm(projected)) < tol:
            break
    return lam


def direction_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Angle between two directions in degrees, in [0, 180]."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise DomainError("direction angle undefined for a zero vector")
    cosang = float(np.clip((a @ b) / (na * nb), -1.0, 1.0))
    return math.degrees(math.acos(cosang))


def svm_oracle(data: Dataset, scaling=None) -> OracleSolution:
    """Exact solver for linear weighted hard-margin instances.

    Enumerates candidate active sets of size <= d, solves each
    equality-constrained minimum-norm system in the u = s (.) w variables,
    keeps candidates that are primal feasible with nonnegative multipliers,
    and returns the smallest-objective one (lexicographically smallest
    active set on ties). Rejects instances larger than n=12 or d=6.
    """
    n, d = data.n, data.d
    if n > _ORACLE_MAX_N or d > _ORACLE_MAX_D:
        raise ConfigError(
            f"oracle limited to n<={_ORACLE_MAX_N}, d<={_ORACLE_MAX_D}; got n={n}, d={d}"
        )
    s = np.ones(d) if scaling is None else np.asarray(scaling, dtype=float).ravel()
    if s.shape[0] != d or np.any(s <= 0):
        raise ConfigError("scaling must be a positive vector of length d")
    feats = (data.X / s) * data.y[:, None]  # rows y_i * (x_i / s)
    best = None
    for size in range(1, min(n, d) + 1):
        for subset in itertools.combinations(range(n), size):
            A = feats[list(subset)]
            G = A @ A.T
            try:
                lam = np.linalg.solve(G, np.ones(size))
            except np.linalg.LinAlgError:
                continue
            if np.any(lam < -FEASIBILITY_TOL):
                continue
            u = A.T @ lam
            margins_u = feats @ u
            if np.any(margins_u < 1.0 - FEASIBILITY_TOL):
                continue
            obj = 0.5 * float(u @ u)
            cand = (obj, subset, u, lam)
            if best is None or obj < best[0] - 1e-12 * (1.0 + abs(best[0])):
                best = cand
            elif abs(obj - best[0]) <= 1e-12 * (1.0 + abs(best[0])) and subset < best[1]:
                best = cand
    if best is None:
        raise AssumptionError("no feasible max-margin solution: data not separable")
    obj, subset, u, lam_active = best
    w_star = u / s
    lambdas = np.zeros(n)
    lambdas[list(subset)] = np.maximum(lam_active, 0.0)
    return OracleSolution(
        w_star=w_star,
        active_set=tuple(subset),
        lambdas=lambdas,
        objective=obj,
    )


def polish_oracle(data: Dataset, scaling=None, starts: int = 8, seed: int = 0) -> OracleSolution:
    """Brute-force secondary oracle: multi-start feasible guesses polished
    with a general-purpose SQP solver. Slower and independent of the
    active-set route; used only for cross-checks."""
    from scipy.optimize import minimize

    d = data.d
    s = np.ones(d) if scaling is None else np.asarray(scaling, dtype=float).ravel()
    feats = (data.X / s) * data.y[:, None]
    rng = np.random.default_rng(seed)

    def objective(u):
        return 0.5 * float(u @ u)

    constraints = [{"type": "ineq", "fun": lambda u: feats @ u - 1.0,
                    "jac": lambda u: feats}]

    def make_feasible(guess):
        # Perceptron phase: terminates on separable data.
        u = guess.copy()
        for _ in range(100_000):
            margins = feats @ u
            worst = int(np.argmin(margins))
            if margins[worst] > 0:
                return u
            u = u + feats[worst]
        return None

    best = None
    guesses = [feats.sum(axis=0)] + [rng.standard_normal(d) for _ in range(starts - 1)]
    for guess in guesses:
        feasible = make_feasible(guess)
        if feasible is None:
            continue
        u0 = feasible / np.min(feats @ feasible)
        res = minimize(objective, u0, jac=lambda u: u, constraints=constraints,
                       method="SLSQP", options={"maxiter": 400, "ftol": 1e-14})
        if not res.success:
            continue
        margins = feats @ res.x
        if np.min(margins) < 1.0 - 1e-7:
            continue
        if best is None or objective(res.x) < objective(best):
            best = res.x
    if best is None:
        raise AssumptionError("no feasible max-margin solution: data not separable")
    u = best
    margins = feats @ u
    active = tuple(int(i) for i in np.flatnonzero(margins <= 1.0 + 1e-6))
    A = feats[list(active)]
    lam_active, *_ = np.linalg.lstsq(A.T, u, rcond=None)
    lambdas = np.zeros(data.n)
    lambdas[list(active)] = np.maximum(lam_active, 0.0)
    return OracleSolution(
        w_star=u / s,
        active_set=active,
        lambdas=lambdas,
        objective=0.5 * float(u @ u),
    )
