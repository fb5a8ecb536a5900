"""The bundled standard-run matrix: three optimizers on the two 2-D linear
datasets, in flow mode with a horizon long enough that every late-time
diagnostic band (margin equivalence, rate bands, residual decay) has two
clean decades to act on."""

from __future__ import annotations

from .config import ExperimentConfig

STANDARD_FLOW_TIME = 1e14
STANDARD_SEED = 20240613
STANDARD_METHODS = ("gd", "adagrad", "rmsprop")
STANDARD_DATASETS = ("linear2d_iso", "linear2d_aniso")


def standard_config(dataset: str, method: str, loss: str = "exponential",
                    flow_time: float = STANDARD_FLOW_TIME,
                    seed: int = STANDARD_SEED) -> ExperimentConfig:
    return ExperimentConfig.from_dict({
        "dataset": {"source": "generator", "name": dataset, "seed": 0},
        "model": {"kind": "linear"},
        "loss": {"kind": loss},
        "optimizer": {
            "method": method,
            "mode": "flow",
            "eta": 0.05,
            "cond_eps": 1e-3,
            "decay_b": 0.99,
            "max_flow_time": flow_time,
            "seed": seed,
        },
        "diagnostics": {"checkpoint_ratio": 1.1},
        "output": {},
    })


def standard_runs() -> list[tuple[str, ExperimentConfig]]:
    """All 6 (dataset, method) standard configurations."""
    out = []
    for dataset in STANDARD_DATASETS:
        for method in STANDARD_METHODS:
            out.append((f"{dataset}-{method}", standard_config(dataset, method)))
    return out
