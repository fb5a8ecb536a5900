"""Named invariant checks.

Every invariant the package promises appears here by name, so run
summaries and the selfcheck report the same vocabulary. Trajectory-level
checks evaluate against one RunArtifacts; suite-level checks (random
model/gradient batteries, oracle covariance, determinism) run on bundled
fixtures inside selfcheck().
"""

from __future__ import annotations

import math

import numpy as np

PASS, FAIL, SKIP = "pass", "fail", "skipped"

RUN_INVARIANTS = [
    "discrete_loss_descent",
    "adagrad_conditioner_monotone",
    "adagrad_beta_ge_one",
    "rmsprop_conditioner_limit",
    "adagrad_grad_sq_tail",
    "gamma_tilde_floor",
    "gamma_tilde_convergence",
    "rho_norm_ratio_bound",
    "loss_to_zero_norm_growth",
    "cos_theta_max",
    "gamma_upper_bound_sampled",
    "kkt_residual_trend",
    "kkt_delta_log_scaling",
    "oracle_self_check",
]

SUITE_INVARIANTS = [
    "homogeneity_random",
    "euler_identity_random",
    "gradient_finite_difference",
    "loss_monotone_in_margins",
    "loss_roundtrip",
    "separability_detector",
    "flow_order_check",
    "oracle_scaling_covariance",
    "determinism_bytes",
    "resume_equivalence",
    "schema_strictness",
]

ALL_INVARIANTS = RUN_INVARIANTS + SUITE_INVARIANTS


def _sel_last_decade(frames):
    if not frames:
        return []
    t_final = frames[-1].t
    return [fr for fr in frames if fr.t >= t_final / 10.0]


def _post_t1(art):
    if art.t1_index is None:
        return []
    return art.frames[art.t1_index:]


def check_discrete_loss_descent(art) -> str:
    if art.opt_config.mode != "discrete":
        return SKIP
    losses = [fr.loss for fr in art.frames]
    n = art.problem.data.n
    below = [i for i, v in enumerate(losses) if v < n * math.exp(-1.0)]
    if not below:
        return SKIP
    start = below[0]
    ok = all(losses[i + 1] <= losses[i] * (1 + 1e-12) for i in range(start, len(losses) - 1))
    return PASS if ok else FAIL


def check_adagrad_conditioner_monotone(art) -> str:
    if art.opt_config.method != "adagrad":
        return SKIP
    prev = None
    for rec in art.result.records:
        if prev is not None and np.any(rec.m < prev - 0.0):
            return FAIL
        prev = rec.m
    return PASS


def check_adagrad_beta_ge_one(art) -> str:
    if art.opt_config.method != "adagrad":
        return SKIP
    for view in art.views:
        if np.any(view.beta < 1.0 - 1e-12):
            return FAIL
    return PASS


def check_rmsprop_conditioner_limit(art) -> str:
    if art.opt_config.method != "rmsprop":
        return SKIP
    eps = art.opt_config.cond_eps
    h_final = art.result.final_state.conditioner(art.opt_config)
    target = eps**-0.5
    dev = float(np.max(np.abs(h_final - target))) / target
    return PASS if dev <= 0.01 else FAIL


def check_adagrad_grad_sq_tail(art) -> str:
    if art.opt_config.method != "adagrad":
        return SKIP
    recs = art.result.records
    if len(recs) < 3:
        return SKIP
    total = recs[-1].grad_sq_total
    if total <= 0:
        return SKIP
    t_final = recs[-1].t
    before = [r.grad_sq_total for r in recs if r.t <= t_final / 10.0]
    if not before:
        return SKIP
    tail = total - before[-1]
    return PASS if tail <= 0.01 * total else FAIL


def check_gamma_tilde_floor(art) -> str:
    post = _post_t1(art)
    if not post or post[0].gamma_tilde is None:
        return SKIP
    floor = math.exp(-0.5) * post[0].gamma_tilde - 1e-9
    for fr in post:
        if fr.gamma_tilde is not None and fr.gamma_tilde < floor:
            return FAIL
    return PASS


def check_gamma_tilde_convergence(art) -> str:
    frames = [fr for fr in _sel_last_decade(art.frames) if fr.gamma_tilde is not None]
    if len(frames) < 3:
        return SKIP
    ratios = [abs(fr.gamma_tilde / fr.gamma - 1.0) for fr in frames]
    gts = np.array([fr.gamma_tilde for fr in frames])
    tv = float(np.sum(np.abs(np.diff(gts))))
    ok = max(ratios) <= 0.05 and tv <= 0.05 * float(np.mean(gts))
    return PASS if ok else FAIL


def check_rho_norm_ratio_bound(art) -> str:
    if not art.frames:
        return SKIP
    for fr in art.frames:
        if fr.beta_max_dev < 0.6 and fr.norm_v > 0:
            if abs(fr.rho / fr.norm_v - 1.0) > fr.beta_max_dev + 1e-12:
                return FAIL
    return PASS


def check_loss_to_zero_norm_growth(art) -> str:
    if not art.frames:
        return SKIP
    first, last = art.frames[0], art.frames[-1]
    ok = last.loss < 1e-8 and last.norm_v > 5.0 * first.norm_v
    return PASS if ok else FAIL


def check_cos_theta_max(art) -> str:
    frames = [fr for fr in _sel_last_decade(art.frames) if fr.cos_theta is not None]
    if not frames:
        return SKIP
    return PASS if max(fr.cos_theta for fr in frames) >= 0.99 else FAIL


def check_gamma_upper_bound_sampled(art, samples: int = 10_000, seed: int = 7) -> str:
    if not art.frames:
        return SKIP
    p = art.problem.p
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((samples, p))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    h_half = np.sqrt(art.h_inf)
    bound = -np.inf
    for u in U:
        q = art.problem.margins(h_half * u)
        bound = max(bound, float(np.max(q)))
    limit = 1.01 * bound
    for fr in art.frames:
        if fr.q_min > 0 and fr.gamma > limit:
            return FAIL
    return PASS


def check_kkt_residual_trend(art) -> str:
    t1 = art.t1_time
    if t1 is None or not art.frames:
        return SKIP
    t_final = art.frames[-1].t
    if t_final < 100.0 * max(t1, 1e-9):
        return SKIP

    def med(lo, hi, attr):
        vals = [getattr(fr, attr) for fr in art.frames
                if getattr(fr, attr) is not None and lo <= fr.t <= hi]
        return float(np.median(vals)) if vals else None

    first_hi = 10.0 * max(t1, 1e-9)
    e0, e1 = med(t1, first_hi, "kkt_eps"), med(t_final / 10.0, t_final, "kkt_eps")
    d0, d1 = med(t1, first_hi, "kkt_delta"), med(t_final / 10.0, t_final, "kkt_delta")
    if None in (e0, e1, d0, d1):
        return SKIP
    return PASS if (e1 < e0 and d1 < d0) else FAIL


def check_kkt_delta_log_scaling(art) -> str:
    frames = [fr for fr in _sel_last_decade(art.frames)
              if fr.kkt_delta is not None and fr.log_inv_loss > 0]
    if len(frames) < 3:
        return SKIP
    scaled = [fr.kkt_delta * fr.log_inv_loss for fr in frames]
    lo, hi = min(scaled), max(scaled)
    if lo <= 0:
        return FAIL
    return PASS if hi / lo <= 10.0 else FAIL


def check_oracle_self_check(art) -> str:
    from .kkt import MarginProblem, kkt_residual, svm_oracle

    problem = art.problem
    if problem.model.kind != "linear" or problem.data.n > 12 or problem.data.d > 6:
        return SKIP
    try:
        sol = svm_oracle(problem.data)
    except Exception:
        return FAIL
    mp = MarginProblem.unweighted(problem.model, problem.data)
    eps, delta = kkt_residual(mp, sol.w_star, sol.lambdas)
    return PASS if (eps <= 1e-9 and abs(delta) <= 1e-9) else FAIL


_RUN_CHECKS = {
    "discrete_loss_descent": check_discrete_loss_descent,
    "adagrad_conditioner_monotone": check_adagrad_conditioner_monotone,
    "adagrad_beta_ge_one": check_adagrad_beta_ge_one,
    "rmsprop_conditioner_limit": check_rmsprop_conditioner_limit,
    "adagrad_grad_sq_tail": check_adagrad_grad_sq_tail,
    "gamma_tilde_floor": check_gamma_tilde_floor,
    "gamma_tilde_convergence": check_gamma_tilde_convergence,
    "rho_norm_ratio_bound": check_rho_norm_ratio_bound,
    "loss_to_zero_norm_growth": check_loss_to_zero_norm_growth,
    "cos_theta_max": check_cos_theta_max,
    "gamma_upper_bound_sampled": check_gamma_upper_bound_sampled,
    "kkt_residual_trend": check_kkt_residual_trend,
    "kkt_delta_log_scaling": check_kkt_delta_log_scaling,
    "oracle_self_check": check_oracle_self_check,
}


def evaluate_run_invariants(art) -> dict:
    out = {}
    for name in RUN_INVARIANTS:
        try:
            out[name] = _RUN_CHECKS[name](art)
        except Exception as exc:  # an invariant evaluator must never crash a run
            out[name] = f"error: {exc}"
    for name in SUITE_INVARIANTS:
        out[name] = SKIP
    return out
