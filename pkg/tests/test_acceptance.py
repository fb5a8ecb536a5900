"""Acceptance criteria, one test per criterion (A1-A10).

Each test prints a single PASS/FAIL line with headline numbers; run with
`pytest -s tests/test_acceptance.py` to see them. The six standard runs
(gd/adagrad/rmsprop on linear2d_iso/linear2d_aniso, flow mode) are built
once and shared.
"""

import json
import math
import time

import numpy as np
import pytest

from marginflow.config import ExperimentConfig, bundled_config_path
from marginflow.data import Dataset
from marginflow.diagnostics import rate_check
from marginflow.kkt import (
    MarginProblem,
    direction_angle,
    kkt_residual,
    polish_oracle,
    svm_oracle,
)
from marginflow.models import ModelSpec
from marginflow.runner import STATE_JSON, TRAJECTORY_CSV, run_artifacts, run_experiment
from marginflow.standard import standard_runs

_TIMINGS = {}


def _report(name, ok, detail):
    line = f"{name} {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def standard_arts():
    t0 = time.monotonic()
    arts = {name: run_artifacts(cfg) for name, cfg in standard_runs()}
    _TIMINGS["standard_runs"] = time.monotonic() - t0
    return arts


def test_a1_homogeneity_euler_suite():
    from marginflow.selfcheck import suite_euler_identity, suite_homogeneity

    t0 = time.monotonic()
    rng = np.random.default_rng(101)
    ok_h = suite_homogeneity(rng, samples=200, tol=1e-8)
    ok_e = suite_euler_identity(rng, samples=200, tol=1e-8)
    elapsed = time.monotonic() - t0
    _report("A1", ok_h and ok_e and elapsed < 5.0,
            f"200 homogeneity + 200 Euler triples <= 1e-8 in {elapsed:.2f}s")


def test_a2_gradient_oracle():
    from marginflow.selfcheck import suite_gradient_fd

    t0 = time.monotonic()
    ok = suite_gradient_fd(np.random.default_rng(102), samples=100, tol=1e-5)
    elapsed = time.monotonic() - t0
    _report("A2", ok and elapsed < 10.0,
            f"100 central-difference checks rel<=1e-5 in {elapsed:.2f}s")


def test_a3_surrogate_margin_floor(standard_arts):
    worst = math.inf
    for name, art in standard_arts.items():
        assert art.t1_index is not None, f"{name}: no t1"
        post = art.frames[art.t1_index:]
        anchor = post[0].gamma_tilde
        assert anchor is not None
        floor = math.exp(-0.5) * anchor - 1e-9
        for fr in post:
            if fr.gamma_tilde is not None:
                worst = min(worst, fr.gamma_tilde - floor)
    elapsed = _TIMINGS["standard_runs"]
    _report("A3", worst >= 0.0 and elapsed < 60.0,
            f"floor slack {worst:.3e} across 6 runs; runs built in {elapsed:.1f}s")


def test_a4_margin_equivalence(standard_arts):
    worst_dev = 0.0
    worst_tv = 0.0
    for name, art in standard_arts.items():
        t_final = art.frames[-1].t
        frames = [fr for fr in art.frames
                  if fr.t >= t_final / 10.0 and fr.gamma_tilde is not None]
        devs = [abs(fr.gamma_tilde / fr.gamma - 1.0) for fr in frames]
        gts = np.array([fr.gamma_tilde for fr in frames])
        tv = float(np.sum(np.abs(np.diff(gts)))) / float(np.mean(gts))
        worst_dev = max(worst_dev, max(devs))
        worst_tv = max(worst_tv, tv)
    _report("A4", worst_dev <= 0.05 and worst_tv <= 0.05,
            f"max |gamma_tilde/gamma - 1| = {worst_dev:.4f}, max TV = {worst_tv:.4f}")


def test_a5_rate_theorem(standard_arts):
    t0 = time.monotonic()
    cfg = ExperimentConfig.load(bundled_config_path("single1d_gdflow"))
    art = run_artifacts(cfg)  # 1e8 horizon
    t_final = art.frames[-1].t
    window = [fr for fr in art.frames if fr.t >= t_final / 100.0]
    r_vals = [fr.loss * fr.t for fr in window]
    one_d_ok = min(r_vals) >= 0.9 and max(r_vals) <= 1.1

    iso = standard_arts["linear2d_iso-rmsprop"]
    report = rate_check(
        [fr.t for fr in iso.frames], [fr.loss for fr in iso.frames],
        [fr.norm_v for fr in iso.frames], iso.grad_norms_v,
        iso.problem.degree, iso.t1_time,
    )
    elapsed = time.monotonic() - t0 + _TIMINGS["standard_runs"]
    ok = one_d_ok and report.conclusive and report.r_ratio <= 3.0
    _report("A5", ok and elapsed < 120.0,
            f"1-D r in [{min(r_vals):.3f}, {max(r_vals):.3f}]; "
            f"rmsprop r ratio {report.r_ratio:.2f} (slope {report.norm_slope:.3f}) "
            f"in {elapsed:.1f}s")


def test_a6_limit_directions(standard_arts):
    t0 = time.monotonic()
    angles = {}
    for ds in ("linear2d_iso", "linear2d_aniso"):
        data = standard_arts[f"{ds}-gd"].problem.data
        sol_p = svm_oracle(data)
        for method in ("gd", "rmsprop"):
            art = standard_arts[f"{ds}-{method}"]
            angles[f"{ds}-{method}"] = direction_angle(art.final_w(), sol_p.w_star)
        art = standard_arts[f"{ds}-adagrad"]
        s = 1.0 / np.sqrt(art.h_inf)
        sol_pa = svm_oracle(data, scaling=s)
        angles[f"{ds}-adagrad-PA"] = direction_angle(art.final_w(), sol_pa.w_star)
        if ds == "linear2d_aniso":
            angles["aniso-adagrad-P"] = direction_angle(art.final_w(), sol_p.w_star)
    elapsed = time.monotonic() - t0 + _TIMINGS["standard_runs"]
    close = [v for k, v in angles.items() if k != "aniso-adagrad-P"]
    ok = max(close) <= 5.0 and angles["aniso-adagrad-P"] >= 10.0 and elapsed < 180.0
    _report("A6", ok,
            f"gd/rmsprop/adagrad-PA angles <= {max(close):.2f} deg; "
            f"adagrad vs (P) on aniso = {angles['aniso-adagrad-P']:.2f} deg")


def test_a7_kkt_residual_decay(standard_arts):
    ok = True
    details = []
    for name, art in standard_arts.items():
        t1 = art.t1_time
        t_final = art.frames[-1].t

        def med(lo, hi, attr):
            vals = [getattr(fr, attr) for fr in art.frames
                    if getattr(fr, attr) is not None and lo <= fr.t <= hi]
            return float(np.median(vals))

        e0 = med(t1, 10 * t1, "kkt_eps")
        e1 = med(t_final / 10, t_final, "kkt_eps")
        d0 = med(t1, 10 * t1, "kkt_delta")
        d1 = med(t_final / 10, t_final, "kkt_delta")
        scaled = [fr.kkt_delta * fr.log_inv_loss for fr in art.frames
                  if fr.t >= t_final / 10 and fr.kkt_delta is not None]
        band = max(scaled) / min(scaled) if min(scaled) > 0 else math.inf
        run_ok = e1 < e0 and d1 < d0 and band <= 10.0
        ok = ok and run_ok
        details.append(f"{name}: eps {e0:.2e}->{e1:.2e} delta {d0:.2e}->{d1:.2e} band {band:.1f}")
    _report("A7", ok, "; ".join(details[:2]) + " ...")


def test_a8_conditioner_limits(standard_arts):
    ok = True
    details = []
    for ds in ("linear2d_iso", "linear2d_aniso"):
        art = standard_arts[f"{ds}-rmsprop"]
        eps = art.opt_config.cond_eps
        h_final = art.result.final_state.conditioner(art.opt_config)
        dev = float(np.max(np.abs(h_final - eps**-0.5))) / eps**-0.5
        ok = ok and dev <= 0.01
        details.append(f"{ds} rmsprop h dev {dev:.2e}")

        art = standard_arts[f"{ds}-adagrad"]
        recs = art.result.records
        total = recs[-1].grad_sq_total
        before = [r.grad_sq_total for r in recs if r.t <= recs[-1].t / 10.0][-1]
        share = (total - before) / total
        ok = ok and share <= 0.01
        details.append(f"{ds} adagrad tail {share:.2e}")
    _report("A8", ok, "; ".join(details))


def test_a9_oracle_exactness():
    rng = np.random.default_rng(909)
    model = ModelSpec("linear")
    worst_eps = 0.0
    worst_cross = 0.0
    for idx in range(50):
        d = int(rng.integers(2, 5))
        n = int(rng.integers(2, 9))
        w_true = rng.standard_normal(d)
        w_true /= np.linalg.norm(w_true)
        X, y = [], []
        while len(X) < n:
            x = rng.standard_normal(d)
            m = float(x @ w_true)
            if abs(m) >= 0.25:
                X.append(x)
                y.append(np.sign(m))
        data = Dataset(np.array(X), np.array(y))
        s = np.exp(rng.uniform(-0.5, 0.5, size=d)) if idx % 2 else np.ones(d)
        sol = svm_oracle(data, scaling=s)
        eps, delta = kkt_residual(MarginProblem(model, data, s), sol.w_star, sol.lambdas)
        worst_eps = max(worst_eps, eps, abs(delta))
        if idx < 10:
            ref = polish_oracle(data, scaling=s, seed=idx)
            worst_cross = max(worst_cross,
                              abs(sol.objective - ref.objective) / (1 + sol.objective))
    ok = worst_eps <= 1e-9 and worst_cross <= 1e-6
    _report("A9", ok,
            f"50 instances, worst residual {worst_eps:.2e}; "
            f"10 cross-checks, worst objective gap {worst_cross:.2e}")


def test_a10_determinism_resume(tmp_path):
    cfg = ExperimentConfig.load(bundled_config_path("linear2d_iso_discrete"))
    blobs = []
    for sub in ("a", "b"):
        run_experiment(cfg, tmp_path / sub, max_steps=400)
        blobs.append((tmp_path / sub / TRAJECTORY_CSV).read_bytes())
    identical = blobs[0] == blobs[1]

    full = run_experiment(cfg, tmp_path / "full", max_steps=400)
    run_experiment(cfg, tmp_path / "half", max_steps=200)
    with open(tmp_path / "half" / STATE_JSON) as fh:
        state = json.load(fh)
    resumed = run_experiment(cfg, tmp_path / "resumed", max_steps=400,
                             resume_state=state)
    w_full = np.asarray(full["final_w"])
    w_res = np.asarray(resumed["final_w"])
    rel = float(np.linalg.norm(w_full - w_res) / np.linalg.norm(w_full))
    _report("A10", identical and rel <= 1e-12,
            f"byte-identical rerun: {identical}; resume rel err {rel:.2e}")
