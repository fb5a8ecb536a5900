"""Strict TOML schema, round-trip identity, hashing, dataset sources."""

import numpy as np
import pytest

from marginflow.config import ExperimentConfig, bundled_config_path, dumps_toml
from marginflow.data import save_csv, generate
from marginflow.errors import ConfigError

BASE = {
    "dataset": {"source": "generator", "name": "linear2d_iso", "seed": 0},
    "model": {"kind": "linear"},
    "loss": {"kind": "exponential"},
    "optimizer": {"method": "gd", "mode": "flow", "eta": 0.05,
                  "max_flow_time": 1e6, "seed": 1},
    "diagnostics": {"checkpoint_ratio": 1.1},
    "output": {},
}


def test_round_trip_identity():
    cfg = ExperimentConfig.from_dict(BASE)
    again = ExperimentConfig.loads(cfg.dumps())
    assert again.to_dict() == cfg.to_dict()
    assert again.config_hash() == cfg.config_hash()


def test_unknown_key_rejected_by_name():
    bad = {**BASE, "optimizer": {**BASE["optimizer"], "learning_rate": 0.1}}
    with pytest.raises(ConfigError, match="learning_rate"):
        ExperimentConfig.from_dict(bad)


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match="extras"):
        ExperimentConfig.from_dict({**BASE, "extras": {}})


def test_missing_required_section_rejected():
    bad = {k: v for k, v in BASE.items() if k != "loss"}
    with pytest.raises(ConfigError, match="loss"):
        ExperimentConfig.from_dict(bad)


def test_invalid_values_fail_at_parse_time():
    bad = {**BASE, "optimizer": {**BASE["optimizer"], "method": "adam"}}
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad)
    bad2 = {**BASE, "model": {"kind": "transformer"}}
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad2)


def test_config_hash_changes_with_content():
    a = ExperimentConfig.from_dict(BASE)
    b_dict = {**BASE, "optimizer": {**BASE["optimizer"], "eta": 0.1}}
    b = ExperimentConfig.from_dict(b_dict)
    assert a.config_hash() != b.config_hash()


def test_inline_dataset_source():
    cfg = ExperimentConfig.from_dict({
        **BASE,
        "dataset": {"source": "inline",
                    "points": [[1.0, 0.0], [0.0, 1.0]],
                    "labels": [1.0, -1.0]},
    })
    data = cfg.build_dataset()
    assert data.n == 2 and data.d == 2


def test_csv_dataset_source(tmp_path):
    path = tmp_path / "points.csv"
    save_csv(generate("linear2d_iso"), path)
    cfg = ExperimentConfig.from_dict({
        **BASE, "dataset": {"source": "csv", "path": str(path)},
    })
    data = cfg.build_dataset()
    ref = generate("linear2d_iso")
    assert np.allclose(data.X, ref.X) and np.allclose(data.y, ref.y)


def test_bundled_configs_parse():
    for name in ("linear2d_iso", "linear2d_aniso", "linear3d_rand",
                 "xor_relu", "single1d_gdflow", "linear2d_iso_discrete"):
        cfg = ExperimentConfig.load(bundled_config_path(name))
        cfg.build_dataset()
        cfg.build_model()
        cfg.build_loss()
        cfg.build_optimizer()


def test_bundled_config_unknown_name():
    with pytest.raises(ConfigError, match="available"):
        bundled_config_path("nope")


def test_dumps_toml_rejects_unsupported_types():
    with pytest.raises(ConfigError):
        dumps_toml({"a": {"b": object()}})
