"""Experiment configuration: strict TOML schema, round-trip serialization,
and content hashing.

Sections: [dataset], [model], [loss], [optimizer], [diagnostics], [output].
Unknown keys anywhere are a parse error naming the key.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import tomli

from .data import Dataset, generate, load_csv
from .errors import ConfigError
from .losses import LossSpec
from .models import ModelSpec
from .optim import OptimizerConfig

_SCHEMA = {
    "dataset": {"source", "name", "seed", "path", "points", "labels"},
    "model": {"kind", "depth", "width"},
    "loss": {"kind"},
    "optimizer": {
        "method", "mode", "eta", "cond_eps", "decay_b", "max_steps",
        "max_flow_time", "dt0", "step_cap", "seed", "init_scale",
    },
    "diagnostics": {"checkpoint_ratio", "t1_qmin", "t1_beta_dev"},
    "output": {"dir"},
}


@dataclass(frozen=True)
class DiagnosticsConfig:
    checkpoint_ratio: float = 1.1
    t1_qmin: float = 0.0
    t1_beta_dev: float = 0.1

    def __post_init__(self):
        if self.checkpoint_ratio <= 1.0:
            raise ConfigError("checkpoint_ratio must exceed 1")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: dict
    model: dict
    loss: dict
    optimizer: dict
    diagnostics: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def __post_init__(self):
        for section, keys in (
            ("dataset", self.dataset),
            ("model", self.model),
            ("loss", self.loss),
            ("optimizer", self.optimizer),
            ("diagnostics", self.diagnostics),
            ("output", self.output),
        ):
            allowed = _SCHEMA[section]
            for key in keys:
                if key not in allowed:
                    raise ConfigError(f"unknown key [{section}].{key}")
        # Eagerly build the typed pieces so invalid values fail at parse time.
        self.build_model()
        self.build_loss()
        self.build_optimizer()
        self.build_diagnostics()

    # -- construction ------------------------------------------------------
    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        unknown = set(raw) - set(_SCHEMA)
        if unknown:
            raise ConfigError(f"unknown section [{sorted(unknown)[0]}]")
        for required in ("dataset", "model", "loss", "optimizer"):
            if required not in raw:
                raise ConfigError(f"missing required section [{required}]")
        return cls(
            dataset=dict(raw["dataset"]),
            model=dict(raw["model"]),
            loss=dict(raw["loss"]),
            optimizer=dict(raw["optimizer"]),
            diagnostics=dict(raw.get("diagnostics", {})),
            output=dict(raw.get("output", {})),
        )

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        try:
            raw = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"TOML parse error: {exc}") from exc
        return cls.from_dict(raw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.loads(fh.read())

    # -- serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        out = {}
        for name in ("dataset", "model", "loss", "optimizer", "diagnostics", "output"):
            section = getattr(self, name)
            if section:
                out[name] = dict(section)
        return out

    def dumps(self) -> str:
        return dumps_toml(self.to_dict())

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    # -- typed views -------------------------------------------------------
    def build_dataset(self) -> Dataset:
        src = self.dataset.get("source")
        if src == "generator":
            name = self.dataset.get("name")
            if not name:
                raise ConfigError("[dataset] generator source requires 'name'")
            return generate(name, int(self.dataset.get("seed", 0)))
        if src == "csv":
            path = self.dataset.get("path")
            if not path:
                raise ConfigError("[dataset] csv source requires 'path'")
            return load_csv(path)
        if src == "inline":
            points = self.dataset.get("points")
            labels = self.dataset.get("labels")
            if points is None or labels is None:
                raise ConfigError("[dataset] inline source requires 'points' and 'labels'")
            return Dataset(points, labels, name="inline")
        raise ConfigError(
            f"[dataset].source must be generator|csv|inline, got {src!r}"
        )

    def build_model(self) -> ModelSpec:
        kind = self.model.get("kind")
        if kind is None:
            raise ConfigError("[model].kind is required")
        return ModelSpec(
            kind=kind,
            depth=int(self.model.get("depth", 2)),
            width=int(self.model.get("width", 1)),
        )

    def build_loss(self) -> LossSpec:
        kind = self.loss.get("kind")
        if kind is None:
            raise ConfigError("[loss].kind is required")
        if kind not in ("exponential", "logistic"):
            raise ConfigError(f"unknown loss kind {kind!r}")
        return LossSpec(kind)

    def build_optimizer(self) -> OptimizerConfig:
        opt = dict(self.optimizer)
        diag = self.build_diagnostics()
        try:
            return OptimizerConfig(
                method=opt.get("method", "gd"),
                mode=opt.get("mode", "discrete"),
                eta=float(opt.get("eta", 0.05)),
                cond_eps=float(opt.get("cond_eps", 1e-3)),
                decay_b=float(opt.get("decay_b", 0.99)),
                max_steps=int(opt.get("max_steps", 10_000)),
                max_flow_time=float(opt.get("max_flow_time", 1e8)),
                checkpoint_ratio=diag.checkpoint_ratio,
                dt0=float(opt.get("dt0", 1e-3)),
                step_cap=float(opt.get("step_cap", 0.1)),
                seed=int(opt.get("seed", 20240613)),
                init_scale=float(opt.get("init_scale", 0.5)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid [optimizer] value: {exc}") from exc

    def build_diagnostics(self) -> DiagnosticsConfig:
        try:
            return DiagnosticsConfig(
                checkpoint_ratio=float(self.diagnostics.get("checkpoint_ratio", 1.1)),
                t1_qmin=float(self.diagnostics.get("t1_qmin", 0.0)),
                t1_beta_dev=float(self.diagnostics.get("t1_beta_dev", 0.1)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid [diagnostics] value: {exc}") from exc


def bundled_config_path(name: str) -> str:
    """Filesystem path of a bundled TOML config (no extension in name)."""
    from importlib.resources import files

    res = files("marginflow") / "configs" / f"{name}.toml"
    path = str(res)
    if not os.path.exists(path):
        available = sorted(
            p.name[:-5] for p in (files("marginflow") / "configs").iterdir()
            if p.name.endswith(".toml")
        )
        raise ConfigError(f"no bundled config {name!r}; available: {available}")
    return path


def _toml_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(v) for v in value) + "]"
    raise ConfigError(f"cannot serialize {type(value).__name__} to TOML")


def dumps_toml(payload: dict) -> str:
    """Minimal TOML emitter for the flat section/key/value configs used here."""
    lines = []
    for section, entries in payload.items():
        lines.append(f"[{section}]")
        for key, value in entries.items():
            lines.append(f"{key} = {_toml_scalar(value)}")
        lines.append("")
    return "\n".join(lines)
