"""Release-gate battery: every named invariant evaluated on bundled fixtures."""

from __future__ import annotations

import math
import os
import tempfile

import numpy as np

from . import invariants as inv
from .config import ExperimentConfig
from .data import Dataset, generate
from .errors import ConfigError
from .kkt import svm_oracle
from .losses import LossSpec, g_eval, log_inv_loss, loss_value
from .models import (
    ModelSpec,
    ParamVector,
    check_homogeneity,
    euler_identity_residual,
    margin_gradients,
    predict_margins,
)
from .problem import Problem

_MODELS = [
    (ModelSpec("linear"), 3),
    (ModelSpec("deep-linear", depth=2, width=2), 3),
    (ModelSpec("deep-linear", depth=3, width=2), 2),
    (ModelSpec("two-layer-relu", width=3), 2),
]


def _random_case(rng, away_from_kinks: bool = True):
    model, d = _MODELS[rng.integers(len(_MODELS))]
    n = int(rng.integers(1, 5))
    X = rng.standard_normal((n, d))
    y = rng.choice([-1.0, 1.0], size=n)
    data = Dataset(X, y)
    w = rng.standard_normal(model.param_count(d))
    if model.kind == "two-layer-relu" and away_from_kinks:
        a, U = w[: model.width], w[model.width:].reshape(model.width, d)
        Z = U @ X.T
        # Push any near-kink preactivation away so finite differences and
        # the two sides of the Euler identity see the same linear piece.
        for _ in range(40):
            if np.min(np.abs(Z)) > 1e-3:
                break
            U = U + 0.1 * rng.standard_normal(U.shape)
            Z = U @ X.T
        w = np.concatenate([a, U.ravel()])
    return model, ParamVector(w), data


def suite_homogeneity(rng, samples=200, tol=1e-8) -> bool:
    alphas = (0.5, 2.0, 7.0)
    for _ in range(samples):
        model, params, data = _random_case(rng)
        alpha = float(alphas[rng.integers(len(alphas))])
        if check_homogeneity(model, params, data, alpha) > tol:
            return False
    return True


def suite_euler_identity(rng, samples=200, tol=1e-8) -> bool:
    for _ in range(samples):
        model, params, data = _random_case(rng)
        if euler_identity_residual(model, params, data) > tol:
            return False
    return True


def fd_gradient_error(problem: Problem, w: np.ndarray) -> float:
    """Relative error of the closed-form loss gradient against central
    finite differences with step 1e-6 * (1 + ||w||)."""
    g = problem.gradient(w)
    h = 1e-6 * (1.0 + float(np.linalg.norm(w)))
    fd = np.empty_like(w)
    for j in range(w.size):
        e = np.zeros_like(w)
        e[j] = h
        fd[j] = (problem.loss_value(w + e) - problem.loss_value(w - e)) / (2.0 * h)
    denom = max(float(np.linalg.norm(g)), 1e-12)
    return float(np.linalg.norm(fd - g)) / denom


def suite_gradient_fd(rng, samples=100, tol=1e-5) -> bool:
    losses = [LossSpec("exponential"), LossSpec("logistic")]
    for _ in range(samples):
        model, params, data = _random_case(rng)
        loss = losses[rng.integers(2)]
        problem = Problem(model, loss, data)
        if fd_gradient_error(problem, params.w) > tol:
            return False
    return True


def suite_loss_monotone(rng, samples=60) -> bool:
    for _ in range(samples):
        loss = LossSpec("exponential" if rng.integers(2) else "logistic")
        n = int(rng.integers(1, 6))
        q = rng.standard_normal(n) * 3.0
        base = loss_value(loss, q)
        i = int(rng.integers(n))
        q2 = q.copy()
        q2[i] += abs(rng.standard_normal()) + 1e-3
        if not loss_value(loss, q2) < base:
            return False
    return True


def suite_loss_roundtrip(rng, samples=60, rel=1e-9) -> bool:
    for _ in range(samples):
        loss = LossSpec("exponential" if rng.integers(2) else "logistic")
        q = float(10 ** rng.uniform(-1, math.log10(50.0)))
        fq = float(loss.f(np.asarray([q]))[0])
        if abs(g_eval(loss, fq) - q) > rel * max(abs(q), 1.0):
            return False
        x = float(rng.uniform(0.5, 40.0))
        gx = g_eval(loss, x)
        fx = float(loss.f(np.asarray([gx]))[0])
        if abs(fx - x) > rel * max(abs(x), 1.0):
            return False
    return True


def suite_separability_detector(rng, samples=60) -> bool:
    loss = LossSpec("exponential")
    for _ in range(samples):
        n = int(rng.integers(1, 5))
        q = rng.standard_normal(n) * 2.0
        lv = loss_value(loss, q)
        detector = g_eval(loss, log_inv_loss(loss, q))
        if (detector > 0) != (lv < 1.0):
            return False
    return True


def suite_flow_order_check() -> bool:
    """First-order behaviour of the flow integrator on the 1-D closed form
    dw/dt = exp(-w): halving step_cap must shrink the error markedly and
    keep it below a cap-proportional bound."""
    from dataclasses import replace

    from .flow import flow_integrate
    from .optim import OptimizerConfig, OptimizerState

    data = generate("single1d")
    problem = Problem(ModelSpec("linear"), LossSpec("exponential"), data)
    t_end = 1e4
    w0 = 0.25
    exact = math.log(t_end + math.exp(w0))
    errs = []
    for cap in (0.04, 0.02):
        cfg = OptimizerConfig(method="gd", mode="flow", step_cap=cap)
        state = OptimizerState(w=np.array([w0]), m=np.zeros(1))
        final, _ = flow_integrate(state, problem, cfg, t_end, checkpoints=[0.0, t_end])
        errs.append(abs(float(final.w[0]) - exact))
    return errs[1] <= 0.6 * errs[0] and errs[0] <= 0.04 * (1.0 + abs(exact))


def suite_oracle_scaling_covariance(rng, samples=10, tol=1e-10) -> bool:
    for _ in range(samples):
        d = int(rng.integers(2, 4))
        n = int(rng.integers(2, 7))
        w_true = rng.standard_normal(d)
        w_true /= np.linalg.norm(w_true)
        X, y = [], []
        while len(X) < n:
            x = rng.standard_normal(d)
            m = float(x @ w_true)
            if abs(m) >= 0.3:
                X.append(x)
                y.append(np.sign(m))
        data = Dataset(np.array(X), np.array(y))
        s = np.exp(rng.uniform(-0.7, 0.7, size=d))
        sol_scaled = svm_oracle(data, scaling=s)
        data_transformed = Dataset(data.X / s, data.y)
        sol_plain = svm_oracle(data_transformed)
        if np.max(np.abs(sol_scaled.w_star - sol_plain.w_star / s)) > tol:
            return False
    return True


def suite_determinism() -> bool:
    from .runner import TRAJECTORY_CSV, run_experiment

    config = _fixture_config("linear2d_iso", method="adagrad", mode="discrete",
                             max_steps=200)
    blobs = []
    for _ in range(2):
        with tempfile.TemporaryDirectory() as tmp:
            run_experiment(config, tmp)
            with open(os.path.join(tmp, TRAJECTORY_CSV), "rb") as fh:
                blobs.append(fh.read())
    return blobs[0] == blobs[1]


def suite_resume_equivalence() -> bool:
    import json

    from .runner import STATE_JSON, run_experiment

    config = _fixture_config("linear2d_iso", method="rmsprop", mode="discrete",
                             max_steps=400)
    with tempfile.TemporaryDirectory() as tmp:
        full = run_experiment(config, os.path.join(tmp, "full"))
        half = run_experiment(config, os.path.join(tmp, "half"), max_steps=200)
        with open(os.path.join(tmp, "half", STATE_JSON)) as fh:
            state = json.load(fh)
        resumed = run_experiment(config, os.path.join(tmp, "resumed"),
                                 max_steps=400, resume_state=state)
    w_full = np.asarray(full["final_w"])
    w_res = np.asarray(resumed["final_w"])
    denom = max(float(np.linalg.norm(w_full)), 1e-12)
    return float(np.linalg.norm(w_full - w_res)) / denom <= 1e-12


def suite_schema_strictness() -> bool:
    text = _fixture_config("linear2d_iso").dumps()
    bad = text.replace("eta =", "etaa =")
    try:
        ExperimentConfig.loads(bad)
    except ConfigError as exc:
        return "etaa" in str(exc)
    return False


def _fixture_config(dataset: str, method: str = "gd", mode: str = "flow",
                    loss: str = "exponential", max_steps: int = 2000,
                    flow_time: float = 1e8, model_kind: str = "linear",
                    width: int = 1) -> ExperimentConfig:
    return ExperimentConfig.from_dict({
        "dataset": {"source": "generator", "name": dataset, "seed": 0},
        "model": {"kind": model_kind, "width": width},
        "loss": {"kind": loss},
        "optimizer": {
            "method": method, "mode": mode, "eta": 0.05, "cond_eps": 1e-3,
            "decay_b": 0.99, "max_steps": max_steps, "max_flow_time": flow_time,
            "seed": 20240613,
        },
        "diagnostics": {},
        "output": {},
    })


def selfcheck(verbose: bool = True) -> dict:
    """Run the full invariant suite on bundled fixtures.

    Returns {invariant_name: 'pass'|'fail'}; prints one line per invariant
    when verbose.
    """
    from .runner import run_artifacts

    rng = np.random.default_rng(1234)
    results: dict[str, str] = {}

    def put(name, ok):
        results[name] = inv.PASS if ok else inv.FAIL
        if verbose:
            print(f"{results[name]:>7}  {name}")

    put("homogeneity_random", suite_homogeneity(rng))
    put("euler_identity_random", suite_euler_identity(rng))
    put("gradient_finite_difference", suite_gradient_fd(rng))
    put("loss_monotone_in_margins", suite_loss_monotone(rng))
    put("loss_roundtrip", suite_loss_roundtrip(rng))
    put("separability_detector", suite_separability_detector(rng))
    put("flow_order_check", suite_flow_order_check())
    put("oracle_scaling_covariance", suite_oracle_scaling_covariance(rng))
    put("determinism_bytes", suite_determinism())
    put("resume_equivalence", suite_resume_equivalence())
    put("schema_strictness", suite_schema_strictness())

    # Trajectory-level invariants on a compact trio of standard-style flow
    # runs plus one discrete run for the descent guard. Trajectories are
    # independent, so they may run on parallel threads, capped by
    # MARGINFLOW_THREADS; ex.map keeps the result order deterministic.
    from concurrent.futures import ThreadPoolExecutor

    from .runner import max_threads

    fixtures = [
        _fixture_config("linear2d_iso", method="gd", flow_time=1e9),
        _fixture_config("linear2d_iso", method="adagrad", flow_time=1e9),
        _fixture_config("linear2d_aniso", method="rmsprop", flow_time=1e9),
    ]
    with ThreadPoolExecutor(max_workers=min(len(fixtures), max_threads())) as ex:
        flow_arts = list(ex.map(run_artifacts, fixtures))
    discrete_art = run_artifacts(_fixture_config(
        "linear2d_iso", method="adagrad", mode="discrete", max_steps=3000
    ))
    for name in inv.RUN_INVARIANTS:
        if name == "discrete_loss_descent":
            statuses = [inv._RUN_CHECKS[name](discrete_art)]
        else:
            statuses = [inv._RUN_CHECKS[name](art) for art in flow_arts]
        applicable = [s for s in statuses if s != inv.SKIP]
        ok = bool(applicable) and all(s == inv.PASS for s in applicable)
        put(name, ok)

    return results
