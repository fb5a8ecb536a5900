"""Margin diagnostics: gamma, surrogate margin, angles, curve length,
running integrals, t1 detection, and the rate report."""

import math

import numpy as np
import pytest

from marginflow import diagnostics as diag
from marginflow.data import Dataset
from marginflow.errors import DomainError
from marginflow.losses import LossSpec
from marginflow.models import ModelSpec
from marginflow.optim import NormalizedView, OptimizerConfig, OptimizerState, normalize_view
from marginflow.problem import Problem

EXP = LossSpec("exponential")


def _view(problem, w, beta=None, h_inf=None):
    w = np.asarray(w, dtype=float)
    h_inf = np.ones_like(w) if h_inf is None else np.asarray(h_inf, dtype=float)
    view = normalize_view(
        OptimizerState(w=w, m=np.zeros_like(w)),
        OptimizerConfig(method="gd", mode="flow"),
        h_inf,
        problem,
    )
    if beta is not None:
        view = NormalizedView(v=view.v, beta=np.asarray(beta, dtype=float),
                              h_inf=view.h_inf, problem=problem)
    return view


def one_d_problem(n_points=1):
    X = [[1.0]] * n_points
    y = [1.0] * n_points
    return Problem(ModelSpec("linear"), EXP, Dataset(X, y))


def test_normalized_margin_examples():
    data = Dataset([[1.0, 0.0]], [1.0])
    q = [3.0]
    assert diag.normalized_margin(q, np.array([3.0, 4.0]), 1) == pytest.approx(0.6)

    data2 = Dataset([[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0])
    problem = Problem(ModelSpec("linear"), EXP, data2)
    w = np.array([1.0, 1.0])
    assert diag.normalized_margin(problem.margins(w), w, 1) == pytest.approx(
        1.0 / math.sqrt(2.0)
    )


def test_normalized_margin_scale_invariance_degree_two():
    data = Dataset([[1.0]], [1.0])
    problem = Problem(ModelSpec("deep-linear", depth=2, width=1), EXP, data)
    w = np.array([2.0, 3.0])
    g1 = diag.normalized_margin(problem.margins(w), w, 2)
    g2 = diag.normalized_margin(problem.margins(2 * w), 2 * w, 2)
    assert g1 == pytest.approx(g2, rel=1e-12)


def test_normalized_margin_zero_vector_rejected():
    with pytest.raises(DomainError):
        diag.normalized_margin([1.0], np.zeros(2), 1)


def test_surrogate_margin_single_point():
    problem = one_d_problem(1)
    view = _view(problem, [10.0])
    value, flag = diag.surrogate_margin(view, EXP)
    assert flag == diag.FLAG_OK
    assert value == pytest.approx(1.0, rel=1e-12)


def test_surrogate_margin_two_identical_points():
    problem = one_d_problem(2)
    view = _view(problem, [10.0])
    value, _ = diag.surrogate_margin(view, EXP)
    assert value == pytest.approx((10.0 - math.log(2.0)) / 10.0, rel=1e-12)


def test_surrogate_margin_below_gamma_with_unit_beta():
    rng = np.random.default_rng(0)
    data = Dataset(rng.standard_normal((3, 2)), [1.0, -1.0, 1.0])
    problem = Problem(ModelSpec("linear"), EXP, data)
    for _ in range(20):
        w = rng.standard_normal(2) * 4
        margins = problem.margins(w)
        if np.min(margins) <= 0.2:
            continue
        view = _view(problem, w)
        gt, flag = diag.surrogate_margin(view, EXP)
        if flag != diag.FLAG_OK:
            continue
        gamma = diag.normalized_margin(margins, w, 1)
        assert gt <= gamma + 1e-12


def test_surrogate_margin_pre_separation_tagged():
    problem = one_d_problem(2)
    view = _view(problem, [0.1])  # loss = 2 e^{-0.1} > 1
    value, flag = diag.surrogate_margin(view, EXP)
    assert value is None and flag == diag.FLAG_PRE


def test_gamma_prime_example():
    problem = one_d_problem(1)
    view = _view(problem, [4.0])
    value, flag = diag.gamma_prime(view, EXP)
    assert flag == diag.FLAG_OK
    assert value == pytest.approx(4.0 / 4.0 ** 0.25, rel=1e-12)


def test_gamma_prime_not_scale_invariant():
    problem = one_d_problem(1)
    v1, _ = diag.gamma_prime(_view(problem, [4.0]), EXP)
    v2, _ = diag.gamma_prime(_view(problem, [8.0]), EXP)
    assert v1 != pytest.approx(v2)


def test_angles_one_dimensional_collinear():
    problem = one_d_problem(1)
    view = _view(problem, [2.0])
    cos_t, cos_tt = diag.angles(view, view.gradient())
    assert cos_t == pytest.approx(1.0)
    assert cos_tt == pytest.approx(1.0)


def test_angles_orthogonal_and_beta_identity():
    data = Dataset([[1.0, 0.0]], [1.0])
    problem = Problem(ModelSpec("linear"), EXP, data)
    view = _view(problem, [1.0, 0.0])
    grad = np.array([0.0, -1.0])
    cos_t, cos_tt = diag.angles(view, grad)
    assert cos_t == pytest.approx(0.0)
    assert cos_tt == pytest.approx(cos_t)


def test_angles_zero_vector_rejected():
    problem = one_d_problem(1)
    view = _view(problem, [1.0])
    with pytest.raises(DomainError):
        diag.angles(view, np.zeros(1))


def test_curve_length_chord():
    assert diag.curve_length_update(0.0, np.array([1.0, 0.0]), np.array([1.0, 0.0])) == 0.0
    inc = diag.curve_length_update(0.0, np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    assert inc == pytest.approx(math.sqrt(2.0))


def test_rho_tilde_constant_beta_keeps_rho():
    problem = one_d_problem(1)
    integrals = diag.RunningIntegrals()
    for w in (1.0, 2.0, 4.0):
        view = _view(problem, [w])
        rho_tilde, flag = diag.rho_tilde_update(integrals, view)
        assert flag == diag.FLAG_OK
        assert rho_tilde == pytest.approx(w)
    assert integrals.rho_tilde_correction == 0.0


def test_rho_tilde_adagrad_sign_correction_positive():
    # beta decreasing toward 1 (adagrad convention): beta^{-1/2} increases,
    # the correction integral is positive, and rho_tilde <= rho.
    problem = one_d_problem(1)
    integrals = diag.RunningIntegrals()
    betas = [1.5, 1.2, 1.05, 1.0]
    ws = [1.0, 2.0, 3.0, 4.0]
    last = None
    for b, w in zip(betas, ws):
        view = _view(problem, [w], beta=[b])
        last = diag.rho_tilde_update(integrals, view)
    rho_final = 4.0 / math.sqrt(1.0)
    assert integrals.rho_tilde_correction > 0
    assert last[0] <= rho_final


def test_rho_tilde_negative_radicand_flags_invalid():
    problem = one_d_problem(1)
    integrals = diag.RunningIntegrals()
    # Large shrinking weights on a shrinking vector force the correction
    # past rho^2.
    for b, w in zip([4.0, 1.0], [10.0, 0.1]):
        view = _view(problem, [w], beta=[b])
        value, flag = diag.rho_tilde_update(integrals, view)
    assert flag == diag.FLAG_INVALID and value is None


def test_beta_log_pos_accumulator_signs():
    integrals = diag.RunningIntegrals()
    # adagrad-style decrease of beta: log beta^{-1/2} rises -> positive part
    diag.beta_log_pos_update(integrals, np.array([1.5]), np.array([1.2]))
    first = integrals.beta_log_pos_accum
    assert first == pytest.approx(0.5 * (math.log(1.5) - math.log(1.2)))
    # rmsprop-style rise of beta toward 1: negative part only, no change
    diag.beta_log_pos_update(integrals, np.array([0.8]), np.array([0.95]))
    assert integrals.beta_log_pos_accum == first


def test_detect_t1_contract():
    def frame(q_min, dev, log_inv=1.0):
        return diag.DiagnosticsFrame(
            t=0.0, loss=1.0, log_inv_loss=log_inv, q_min=q_min, norm_w=1.0,
            norm_v=1.0, rho=1.0, rho_tilde=None, nu=0.0, gamma=0.0,
            gamma_tilde=None, gamma_prime=None, cos_theta=None,
            cos_theta_tilde=None, zeta=0.0, beta_max_dev=dev, kkt_eps=None,
            kkt_delta=None,
        )

    never = [frame(-1.0, 0.5)] * 5
    assert diag.detect_t1(never) is None
    frames = [frame(-1.0, 0.5)] * 7 + [frame(0.5, 0.05)] + [frame(1.0, 0.01)]
    assert diag.detect_t1(frames) == 7


def test_rate_check_synthetic_constant():
    # loss(t) = 5 / (t log t) with degree 2: r(t) = 5 exactly.
    times = np.geomspace(10.0, 1e6, 200)
    losses = 5.0 / (times * np.log(times))
    norms = np.log(times) ** 0.5
    grads = 1.0 / (times * np.log(times) ** 0.5)
    report = diag.rate_check(times, losses, norms, grads, degree=2, t1_time=10.0)
    assert report.conclusive
    assert report.r_min == pytest.approx(5.0, rel=1e-9)
    assert report.r_max == pytest.approx(5.0, rel=1e-9)
    assert report.norm_slope == pytest.approx(0.5, abs=1e-6)
    assert report.grad_band_ratio == pytest.approx(1.0, rel=1e-9)


def test_rate_check_insufficient_span_inconclusive():
    times = np.geomspace(10.0, 500.0, 30)
    losses = 1.0 / times
    report = diag.rate_check(times, losses, np.log(times), 1.0 / times, 1, 10.0)
    assert not report.conclusive
