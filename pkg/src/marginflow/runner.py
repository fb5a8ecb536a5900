"""Experiment orchestration: drive a trajectory, compute per-checkpoint
diagnostics, persist trajectory.csv / summary.json / state.json, and
assemble the run summary with its invariant pass/fail map.

Frames are materialized once the trajectory finishes because the adagrad
normalization needs the end-of-run conditioner; rows are still written
and flushed one at a time, and on a numeric failure the checkpoints
collected so far are flushed as partial outputs.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics as diag
from .config import DiagnosticsConfig, ExperimentConfig
from .errors import AssumptionError, ConfigError, NumericError
from .flow import FlowCheckpoint, flow_integrate
from .kkt import (
    MarginProblem,
    certify_point,
    direction_angle,
    nnls_lambdas,
    paper_lambdas,
    svm_oracle,
)
from .optim import (
    NormalizedView,
    OptimizerConfig,
    OptimizerState,
    h_infinity,
    normalize_view,
    step,
)
from .problem import Problem

TRAJECTORY_CSV = "trajectory.csv"
SUMMARY_JSON = "summary.json"
STATE_JSON = "state.json"


def max_threads() -> int:
    """Parallelism cap from MARGINFLOW_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("MARGINFLOW_THREADS", "1")))
    except ValueError:
        return 1


def _geometric_steps(max_steps: int, ratio: float) -> list[int]:
    if max_steps <= 0:
        return [0]
    cps = [0]
    nxt = 1.0
    while round(nxt) < max_steps:
        cps.append(int(round(nxt)))
        nxt = max(nxt + 1.0, nxt * ratio)
    cps.append(max_steps)
    return sorted(set(cps))


@dataclass
class TrajectoryResult:
    records: list[FlowCheckpoint]
    final_state: OptimizerState
    warnings: list[str] = field(default_factory=list)
    failure: str | None = None


def run_discrete(state: OptimizerState, problem: Problem, config: OptimizerConfig,
                 max_steps: int) -> TrajectoryResult:
    """Step loop with the descent guard: once the loss has dropped below
    n/e, any step that would increase it is retried with a halved learning
    rate for that step only."""
    cps = set(_geometric_steps(max_steps, config.checkpoint_ratio))
    warnings: list[str] = []
    records: list[FlowCheckpoint] = []

    def record(st: OptimizerState):
        g = problem.gradient(st.w)
        records.append(FlowCheckpoint(
            t=float(st.clock), w=st.w.copy(), m=st.m.copy(), grad=g,
            loss=problem.loss_value(st.w), grad_sq_total=st.grad_sq_total,
        ))

    record(state)
    guard_level = problem.data.n * math.exp(-1.0)
    loss = problem.loss_value(state.w)
    try:
        # max_steps is the total clock target, so resumed runs continue
        # from the snapshot's step count.
        for k in range(int(state.clock) + 1, max_steps + 1):
            eta_eff = config.eta
            trial = step(state, problem, config, eta=eta_eff)
            if loss < guard_level:
                halvings = 0
                while problem.loss_value(trial.w) > loss and halvings < 60:
                    eta_eff /= 2.0
                    halvings += 1
                    trial = step(state, problem, config, eta=eta_eff)
                if halvings:
                    warnings.append(
                        f"step {k}: learning rate halved {halvings}x to keep descent"
                    )
            state = trial
            loss = problem.loss_value(state.w)
            if k in cps:
                record(state)
        return TrajectoryResult(records=records, final_state=state, warnings=warnings)
    except NumericError as exc:
        last = exc.last_state if exc.last_state is not None else state
        return TrajectoryResult(
            records=records, final_state=last, warnings=warnings, failure=str(exc)
        )


def run_flow(state: OptimizerState, problem: Problem, config: OptimizerConfig,
             t_end: float) -> TrajectoryResult:
    try:
        final, cps = flow_integrate(state, problem, config, t_end)
        return TrajectoryResult(records=cps, final_state=final)
    except NumericError as exc:
        cps = exc.checkpoints or []
        last = exc.last_state if exc.last_state is not None else state
        return TrajectoryResult(records=cps, final_state=last, failure=str(exc))


@dataclass
class RunArtifacts:
    """Everything a summary, invariant check, or test needs from one run."""

    config: ExperimentConfig
    problem: Problem
    opt_config: OptimizerConfig
    diag_config: DiagnosticsConfig
    result: TrajectoryResult
    h_inf: np.ndarray
    frames: list[diag.DiagnosticsFrame]
    t1_index: int | None
    integrals: diag.RunningIntegrals
    grad_norms_v: list[float]
    views: list[NormalizedView] = field(default_factory=list, repr=False)

    @property
    def times(self) -> np.ndarray:
        return np.array([fr.t for fr in self.frames])

    @property
    def t1_time(self) -> float | None:
        return None if self.t1_index is None else self.frames[self.t1_index].t

    def final_w(self) -> np.ndarray:
        return self.result.final_state.w


def compute_frames(records, problem: Problem, opt_config: OptimizerConfig,
                   diag_config: DiagnosticsConfig, h_inf: np.ndarray):
    """Turn raw checkpoints into DiagnosticsFrames plus running integrals."""
    L = problem.degree
    integrals = diag.RunningIntegrals()
    frames: list[diag.DiagnosticsFrame] = []
    views: list[NormalizedView] = []
    grad_norms_v: list[float] = []
    t1_index = None
    prev_unit_v = None
    prev_beta = None

    for rec in records:
        state = OptimizerState(w=rec.w, m=rec.m, clock=rec.t,
                               grad_sq_total=rec.grad_sq_total)
        view = normalize_view(state, opt_config, h_inf, problem)
        margins = problem.margins(rec.w)
        q_min = float(np.min(margins))
        loss_val = float(rec.loss)
        log_inv = problem.log_inv_loss(rec.w)
        norm_w = float(np.linalg.norm(rec.w))
        norm_v = float(np.linalg.norm(view.v))
        beta = view.beta
        dev = view.beta_max_dev
        bmh = 1.0 / np.sqrt(beta)
        rho = float(np.linalg.norm(bmh * view.v))
        grad_v = np.sqrt(h_inf) * rec.grad
        grad_norm_v = float(np.linalg.norm(grad_v))
        nu = diag.nu_value(view, problem.loss, margins)
        gamma = diag.normalized_margin(margins, view.v, L) if norm_v > 0 else float("nan")

        flag = diag.FLAG_OK
        gamma_tilde, gt_flag = diag.surrogate_margin(view, problem.loss, margins)
        gamma_pr, _ = diag.gamma_prime(view, problem.loss, margins)
        if gt_flag == diag.FLAG_PRE:
            flag = diag.FLAG_PRE

        if grad_norm_v > 0 and norm_v > 0:
            cos_theta, cos_theta_tilde = diag.angles(view, grad_v)
        else:
            cos_theta = cos_theta_tilde = None

        if prev_unit_v is not None:
            integrals.zeta_accum = diag.curve_length_update(
                integrals.zeta_accum, prev_unit_v, view.v / norm_v
            )
        prev_unit_v = view.v / norm_v if norm_v > 0 else None

        if (
            t1_index is None
            and q_min > diag_config.t1_qmin
            and dev < diag_config.t1_beta_dev
            and log_inv > 0.0
        ):
            t1_index = len(frames)

        rho_tilde = None
        if t1_index is not None:
            rho_tilde, rt_flag = diag.rho_tilde_update(integrals, view)
            if rt_flag == diag.FLAG_INVALID:
                flag = diag.FLAG_INVALID
            if prev_beta is not None:
                diag.beta_log_pos_update(integrals, prev_beta, beta)
            prev_beta = beta.copy()

        kkt_eps = kkt_delta = None
        if q_min > 0 and grad_norm_v > 0:
            lam = paper_lambdas(view, problem.loss, margins, grad_v)
            v_boundary = view.v / q_min ** (1.0 / L)
            grads_b = view.margin_gradients(v_boundary)
            margins_b = view.margins(v_boundary)
            stationarity = v_boundary - grads_b.T @ lam
            kkt_eps = float(np.linalg.norm(stationarity))
            kkt_delta = float(np.max(lam * (margins_b - 1.0)))

        frames.append(diag.DiagnosticsFrame(
            t=rec.t, loss=loss_val, log_inv_loss=log_inv, q_min=q_min,
            norm_w=norm_w, norm_v=norm_v, rho=rho, rho_tilde=rho_tilde,
            nu=nu, gamma=gamma, gamma_tilde=gamma_tilde, gamma_prime=gamma_pr,
            cos_theta=cos_theta, cos_theta_tilde=cos_theta_tilde,
            zeta=integrals.zeta_accum, beta_max_dev=dev,
            kkt_eps=kkt_eps, kkt_delta=kkt_delta, valid_flag=flag,
        ))
        views.append(view)
        grad_norms_v.append(grad_norm_v)

    return frames, t1_index, integrals, grad_norms_v, views


def write_trajectory_csv(path, frames) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(diag.CSV_COLUMNS)
        for fr in frames:
            writer.writerow(fr.csv_row())
            fh.flush()


def check_separable(problem: Problem) -> bool | None:
    """True/False for small linear instances, None when undecidable here."""
    if problem.model.kind != "linear":
        return None
    if problem.data.n > 12 or problem.data.d > 6:
        return None
    try:
        svm_oracle(problem.data)
        return True
    except AssumptionError:
        return False


def _decade_median(values, times, lo, hi):
    sel = [v for v, t in zip(values, times) if v is not None and lo <= t <= hi]
    return float(np.median(sel)) if sel else None


def build_summary(art: RunArtifacts, seed: int, wallclock: float) -> dict:
    from .invariants import evaluate_run_invariants

    frames = art.frames
    final = frames[-1] if frames else None
    t1_time = art.t1_time
    times = [fr.t for fr in frames]

    rate = None
    if frames and t1_time is not None:
        rate = diag.rate_check(
            times,
            [fr.loss for fr in frames],
            [fr.norm_v for fr in frames],
            art.grad_norms_v,
            art.problem.degree,
            t1_time,
        ).to_dict()

    kkt_trend = None
    if frames and t1_time is not None and times[-1] > 0:
        t_final = times[-1]
        first_lo, first_hi = t1_time, min(10.0 * max(t1_time, 1e-12), t_final)
        last_lo, last_hi = t_final / 10.0, t_final
        eps_vals = [fr.kkt_eps for fr in frames]
        delta_vals = [fr.kkt_delta for fr in frames]
        kkt_trend = {
            "first_decade_median_eps": _decade_median(eps_vals, times, first_lo, first_hi),
            "last_decade_median_eps": _decade_median(eps_vals, times, last_lo, last_hi),
            "first_decade_median_delta": _decade_median(delta_vals, times, first_lo, first_hi),
            "last_decade_median_delta": _decade_median(delta_vals, times, last_lo, last_hi),
        }

    oracle_section = None
    if art.problem.model.kind == "linear" and art.problem.data.n <= 12 and art.problem.data.d <= 6:
        try:
            sol_p = svm_oracle(art.problem.data)
            w_final = art.final_w()
            oracle_section = {
                "p_direction": [float(v) for v in sol_p.w_star],
                "p_objective": sol_p.objective,
                "p_angle_deg": direction_angle(w_final, sol_p.w_star),
            }
            if art.opt_config.method == "adagrad":
                s = 1.0 / np.sqrt(art.h_inf)
                sol_pa = svm_oracle(art.problem.data, scaling=s)
                oracle_section.update({
                    "pa_direction": [float(v) for v in sol_pa.w_star],
                    "pa_objective": sol_pa.objective,
                    "pa_angle_deg": direction_angle(w_final, sol_pa.w_star),
                    "h_inf": [float(v) for v in art.h_inf],
                })
        except AssumptionError:
            oracle_section = {"error": "data not separable"}

    final_dict = None
    if final is not None:
        final_dict = {col: getattr(final, col) for col in diag.CSV_COLUMNS}

    # Final-point certification reports with both multiplier sources, for
    # the weighted problem the method's theory targets (s = h_inf^{-1/2};
    # identity for gd/rmsprop up to the constant rmsprop conditioner).
    kkt_reports = None
    if final is not None and final.q_min > 0 and art.views:
        L = art.problem.degree
        s = 1.0 / np.sqrt(art.h_inf)
        mp = MarginProblem(art.problem.model, art.problem.data, s)
        w_boundary = art.final_w() / final.q_min ** (1.0 / L)
        kkt_reports = {}
        grad_v = np.sqrt(art.h_inf) * art.result.records[-1].grad
        if float(np.linalg.norm(grad_v)) > 0:
            lam_paper = paper_lambdas(art.views[-1], art.problem.loss, grad_v=grad_v)
            kkt_reports["paper"] = certify_point(mp, w_boundary, lam_paper, "paper").to_dict()
        lam_nnls = nnls_lambdas(mp, w_boundary)
        kkt_reports["nnls"] = certify_point(mp, w_boundary, lam_nnls, "nnls").to_dict()

    # Unit parameter directions at (decimated) checkpoints, for the
    # on-sphere direction figures; consumers read these from summary.json
    # because the trajectory CSV carries only scalars.
    trail = []
    records = art.result.records
    stride = max(1, len(records) // 200)
    for rec in records[::stride] + ([records[-1]] if records else []):
        norm = float(np.linalg.norm(rec.w))
        if norm > 0:
            trail.append([rec.t] + [float(v) for v in rec.w / norm])

    return {
        "config_hash": art.config.config_hash(),
        "dataset_hash": art.problem.data.content_hash(),
        "seed": seed,
        "method": art.opt_config.method,
        "mode": art.opt_config.mode,
        "degree": art.problem.degree,
        "direction_trail": trail,
        "t1": t1_time,
        "final": final_dict,
        "final_w": [float(v) for v in art.final_w()],
        "rate_check": rate,
        "kkt_trend": kkt_trend,
        "kkt_reports": kkt_reports,
        "oracle": oracle_section,
        "wallclock_s": wallclock,
        "warnings": art.result.warnings,
        "failure": art.result.failure,
        "invariants": evaluate_run_invariants(art),
    }


def run_experiment(config: ExperimentConfig, out_dir, seed: int | None = None,
                   max_steps: int | None = None, flow_time: float | None = None,
                   allow_nonseparable: bool = False,
                   resume_state: dict | None = None) -> dict:
    """Execute one experiment and write trajectory.csv/summary.json/state.json.

    Returns the summary dict. Raises AssumptionError for non-separable data
    (unless allow_nonseparable), ConfigError for bad configs; numeric
    failures still produce partial outputs and are reported in the summary.
    """
    started = time.monotonic()
    os.makedirs(out_dir, exist_ok=True)
    dataset = config.build_dataset()
    model = config.build_model()
    loss = config.build_loss()
    problem = Problem(model, loss, dataset)
    opt_config = config.build_optimizer()
    diag_config = config.build_diagnostics()
    if seed is not None:
        from dataclasses import replace

        opt_config = replace(opt_config, seed=int(seed))
    effective_seed = opt_config.seed

    separable = check_separable(problem)
    if separable is False and not allow_nonseparable:
        raise AssumptionError(
            "dataset is not linearly separable, so the driving separability "
            "precondition fails; pass --allow-nonseparable to run anyway"
        )

    if resume_state is not None:
        if resume_state.get("config_hash") != config.config_hash():
            raise ConfigError("resume state was produced by a different config")
        state = OptimizerState(
            w=np.asarray(resume_state["w"], dtype=float),
            m=np.asarray(resume_state["m"], dtype=float),
            clock=float(resume_state["clock"]),
            grad_sq_total=float(resume_state.get("grad_sq_total", 0.0)),
        )
    else:
        state = OptimizerState.initial(problem.p, opt_config)

    if opt_config.mode == "discrete":
        budget = opt_config.max_steps if max_steps is None else int(max_steps)
        result = run_discrete(state, problem, opt_config, budget)
    else:
        horizon = opt_config.max_flow_time if flow_time is None else float(flow_time)
        result = run_flow(state, problem, opt_config, horizon)

    h_inf = h_infinity(opt_config, result.final_state)
    frames, t1_index, integrals, grad_norms_v, views = compute_frames(
        result.records, problem, opt_config, diag_config, h_inf
    )
    art = RunArtifacts(
        config=config, problem=problem, opt_config=opt_config,
        diag_config=diag_config, result=result, h_inf=h_inf, frames=frames,
        t1_index=t1_index, integrals=integrals, grad_norms_v=grad_norms_v,
        views=views,
    )

    write_trajectory_csv(os.path.join(out_dir, TRAJECTORY_CSV), frames)
    summary = build_summary(art, effective_seed, time.monotonic() - started)
    with open(os.path.join(out_dir, SUMMARY_JSON), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    state_payload = {
        "w": [float(v) for v in result.final_state.w],
        "m": [float(v) for v in result.final_state.m],
        "clock": result.final_state.clock,
        "grad_sq_total": result.final_state.grad_sq_total,
        "seed": effective_seed,
        "config_hash": config.config_hash(),
    }
    with open(os.path.join(out_dir, STATE_JSON), "w") as fh:
        json.dump(state_payload, fh, indent=2)
        fh.write("\n")

    if result.failure is not None:
        raise NumericError(result.failure, last_state=result.final_state)
    return summary


def run_artifacts(config: ExperimentConfig, seed: int | None = None,
                  max_steps: int | None = None, flow_time: float | None = None) -> RunArtifacts:
    """In-memory variant of run_experiment for tests and the selfcheck."""
    dataset = config.build_dataset()
    problem = Problem(config.build_model(), config.build_loss(), dataset)
    opt_config = config.build_optimizer()
    if seed is not None:
        from dataclasses import replace

        opt_config = replace(opt_config, seed=int(seed))
    diag_config = config.build_diagnostics()
    state = OptimizerState.initial(problem.p, opt_config)
    if opt_config.mode == "discrete":
        budget = opt_config.max_steps if max_steps is None else int(max_steps)
        result = run_discrete(state, problem, opt_config, budget)
    else:
        horizon = opt_config.max_flow_time if flow_time is None else float(flow_time)
        result = run_flow(state, problem, opt_config, horizon)
    if result.failure:
        raise NumericError(result.failure, last_state=result.final_state)
    h_inf = h_infinity(opt_config, result.final_state)
    frames, t1_index, integrals, grad_norms_v, views = compute_frames(
        result.records, problem, opt_config, diag_config, h_inf
    )
    return RunArtifacts(
        config=config, problem=problem, opt_config=opt_config,
        diag_config=diag_config, result=result, h_inf=h_inf, frames=frames,
        t1_index=t1_index, integrals=integrals, grad_norms_v=grad_norms_v,
        views=views,
    )


def compare_runs(dir_a, dir_b) -> dict:
    """Compare two completed runs on the same dataset."""
    with open(os.path.join(dir_a, SUMMARY_JSON)) as fh:
        sum_a = json.load(fh)
    with open(os.path.join(dir_b, SUMMARY_JSON)) as fh:
        sum_b = json.load(fh)
    if sum_a["dataset_hash"] != sum_b["dataset_hash"]:
        raise ConfigError("runs were produced on different datasets")
    w_a = np.asarray(sum_a["final_w"], dtype=float)
    w_b = np.asarray(sum_b["final_w"], dtype=float)
    out = {
        "dataset_hash": sum_a["dataset_hash"],
        "method_a": sum_a["method"],
        "method_b": sum_b["method"],
        "gamma_a": sum_a["final"]["gamma"] if sum_a["final"] else None,
        "gamma_b": sum_b["final"]["gamma"] if sum_b["final"] else None,
        "between_angle_deg": direction_angle(w_a, w_b),
        "oracle_angle_a": (sum_a.get("oracle") or {}).get("p_angle_deg"),
        "oracle_angle_b": (sum_b.get("oracle") or {}).get("p_angle_deg"),
    }
    return out
