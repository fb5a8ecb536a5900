"""Between-method comparisons on the bundled datasets, through the same
run directories the CLI produces."""

import numpy as np
import pytest

from marginflow.runner import compare_runs, run_experiment
from marginflow.standard import standard_config


@pytest.fixture(scope="module")
def aniso_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("aniso")
    dirs = {}
    for method in ("gd", "adagrad", "rmsprop"):
        out = root / method
        run_experiment(standard_config("linear2d_aniso", method), out)
        dirs[method] = out
    return dirs


def test_adagrad_vs_rmsprop_angle_at_least_ten_degrees(aniso_runs):
    cmp = compare_runs(aniso_runs["adagrad"], aniso_runs["rmsprop"])
    assert cmp["between_angle_deg"] >= 10.0


def test_gd_vs_rmsprop_angle_within_five_degrees(aniso_runs):
    cmp = compare_runs(aniso_runs["gd"], aniso_runs["rmsprop"])
    assert cmp["between_angle_deg"] <= 5.0


def test_compare_reports_margins_and_oracle_angles(aniso_runs):
    cmp = compare_runs(aniso_runs["gd"], aniso_runs["adagrad"])
    assert cmp["gamma_a"] > 0 and cmp["gamma_b"] > 0
    assert cmp["oracle_angle_a"] <= 5.0
    assert cmp["oracle_angle_b"] >= 10.0  # adagrad against the plain oracle


def test_summary_kkt_reports_both_sources(aniso_runs):
    import json

    with open(aniso_runs["adagrad"] / "summary.json") as fh:
        summary = json.load(fh)
    reports = summary["kkt_reports"]
    assert set(reports) == {"paper", "nnls"}
    for source, rep in reports.items():
        assert set(rep) == {"point", "lambdas", "kkt_eps", "kkt_delta",
                            "feasible", "multiplier_source"}
        assert rep["multiplier_source"] == source
        assert rep["feasible"] is True
        assert all(l >= 0 for l in rep["lambdas"])
        assert rep["kkt_delta"] >= 0
    assert reports["nnls"]["kkt_eps"] <= reports["paper"]["kkt_eps"] + 1e-12
