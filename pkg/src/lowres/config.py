"""Experiment configuration: dataclasses plus an INI-style ``key = value`` loader.

One section per module::

    [data]
    source = synthetic
    pool_size = 100

    [optim]
    learning_rate = 0.01

Command-line overrides are applied on top of the file and always win.
"""

from __future__ import annotations

import configparser
import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .model import ModelSpec
from .optim import OptimConfig

CRITERIA = ("val", "pe", "eb", "fixed")
INIT_MODES = ("normal", "fogip")


class ConfigError(ValueError):
    pass


def parse_ratio(text: str) -> tuple[int, int]:
    """``"75:25"`` -> ``(75, 25)``."""
    try:
        a, b = (int(p) for p in str(text).split(":"))
    except ValueError:
        raise ConfigError(f"trn_val must look like '75:25', got {text!r}") from None
    if a <= 0 or b < 0 or a + b == 0:
        raise ConfigError(f"invalid Trn/Val ratio {text!r}")
    return a, b


def train_fraction(trn_val: str) -> float:
    a, b = parse_ratio(trn_val)
    return a / (a + b)


@dataclass(frozen=True)
class DataConfig:
    source: str = "synthetic"  # "synthetic" or a CSV path
    test_path: Optional[str] = None
    classes: int = 2
    dim: int = 20
    separation: float = 1.5
    noise: float = 1.0
    pool_size: int = 100
    test_size: int = 10000
    label_frac: float = 0.02  # CSV sources only

    def validate(self):
        if self.source == "synthetic":
            if self.classes < 2 or self.dim < 1 or self.noise <= 0:
                raise ConfigError("data: need classes >= 2, dim >= 1, noise > 0")
            if self.pool_size < self.classes or self.test_size < 1:
                raise ConfigError("data: pool_size must be >= classes and test_size >= 1")
        elif not 0 < self.label_frac < 1:
            raise ConfigError("data.label_frac must lie in (0, 1)")


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "logistic"
    hidden_dim: int = 16
    dropout: float = 0.1

    def spec(self, input_dim: int, num_classes: int) -> ModelSpec:
        hidden = self.hidden_dim if self.kind == "mlp" else 0
        return ModelSpec(self.kind, input_dim, num_classes, hidden, "tanh", self.dropout)


@dataclass(frozen=True)
class StoppingConfig:
    criterion: str = "pe"
    trn_val: str = "100:0"
    k: int = 4
    eps_var: float = 1e-12
    fixed_epoch: int = 10


@dataclass(frozen=True)
class FogipSection:
    n: int = 10
    scope: str = "full"


@dataclass(frozen=True)
class GridConfig:
    learning_rate: tuple = (0.005, 0.01, 0.02, 0.04)
    dropout: tuple = (0.1, 0.3)
    batch_size: tuple = (16, 32)


@dataclass(frozen=True)
class SweepConfig:
    fractions: tuple = (0.01, 0.02, 0.05, 0.1)
    dropouts: tuple = (0.1, 0.3)
    trn_val: str = "75:25"


@dataclass(frozen=True)
class ExperimentConfig:
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    stopping: StoppingConfig = field(default_factory=StoppingConfig)
    fogip: FogipSection = field(default_factory=FogipSection)
    grid: GridConfig = field(default_factory=GridConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    init: str = "normal"
    repetitions: int = 50
    seed: int = 0
    bins: int = 10
    out: str = "results"
    jobs: int = 1

    def validate(self) -> "ExperimentConfig":
        self.data.validate()
        st = self.stopping
        if st.criterion not in CRITERIA:
            raise ConfigError(f"stopping.criterion must be one of {CRITERIA}, got {st.criterion!r}")
        a, b = parse_ratio(st.trn_val)
        if b == 0 and st.criterion == "val":
            raise ConfigError("stopping.criterion=val needs a validation fraction > 0 (trn_val)")
        if b > 0 and st.criterion != "val":
            raise ConfigError(f"stopping.criterion={st.criterion} trains on all samples; use trn_val=100:0")
        if st.k < 2:
            raise ConfigError("stopping.k must be >= 2")
        if self.model.kind not in ("logistic", "mlp"):
            raise ConfigError(f"model.kind must be 'logistic' or 'mlp', got {self.model.kind!r}")
        if not 0 <= self.model.dropout < 1 or self.model.hidden_dim < 1:
            raise ConfigError("model: need 0 <= dropout < 1 and hidden_dim >= 1")
        if self.init not in INIT_MODES:
            raise ConfigError(f"init must be one of {INIT_MODES}")
        if self.fogip.n < 1:
            raise ConfigError("fogip.n must be >= 1")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.bins < 1:
            raise ConfigError("bins must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        for name in ("learning_rate", "dropout", "batch_size"):
            if not getattr(self.grid, name):
                raise ConfigError(f"grid.{name} must be nonempty")
        if not self.sweep.fractions:
            raise ConfigError("sweep.fractions must be nonempty")
        return self


SECTIONS = ("data", "model", "optim", "stopping", "fogip", "grid", "sweep")
TOP_LEVEL = ("init", "repetitions", "seed", "bins", "out", "jobs")


def _coerce(raw: str, hint, where: str):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    try:
        if hint in (tuple, "tuple") or origin is tuple:
            return tuple(_number(p.strip()) for p in raw.replace(";", ",").split(",") if p.strip())
        if origin is typing.Union and type(None) in args:
            return None if raw.strip().lower() in ("", "none") else _coerce(raw, args[0], where)
        if hint is bool:
            low = raw.strip().lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(raw)
            return low in ("1", "true", "yes", "on")
        if hint is int:
            return int(raw)
        if hint is float:
            return float(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r}") from None


def _number(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def _update(obj, values: dict, where: str):
    hints = typing.get_type_hints(type(obj))
    names = {f.name for f in dataclasses.fields(obj)}
    changes = {}
    for key, raw in values.items():
        if key not in names:
            raise ConfigError(f"{where}: unknown key {key!r}")
        changes[key] = _coerce(raw, hints[key], f"{where}.{key}")
    return dataclasses.replace(obj, **changes)


def apply_overrides(cfg: ExperimentConfig, pairs: dict) -> ExperimentConfig:
    """``pairs`` maps ``"section.key"`` or a top-level key to a raw string."""
    grouped: dict[str, dict] = {}
    top = {}
    for dotted, raw in pairs.items():
        if "." in dotted:
            sec, key = dotted.split(".", 1)
            if sec not in SECTIONS:
                raise ConfigError(f"unknown config section {sec!r}")
            grouped.setdefault(sec, {})[key] = str(raw)
        elif dotted in TOP_LEVEL:
            top[dotted] = str(raw)
        else:
            raise ConfigError(f"unknown config key {dotted!r}")
    try:
        for sec, vals in grouped.items():
            cfg = dataclasses.replace(cfg, **{sec: _update(getattr(cfg, sec), vals, sec)})
        return _update(cfg, top, "experiment")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def load_config(path=None, overrides: Optional[dict] = None) -> ExperimentConfig:
    pairs: dict = {}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
        text = Path(path).read_text(encoding="utf-8")
        parser.read_string(text, source=str(path))
        for sec in parser.sections():
            for key, raw in parser.items(sec):
                pairs[key if sec == "experiment" else f"{sec}.{key}"] = raw
    pairs.update(overrides or {})
    return apply_overrides(ExperimentConfig(), pairs).validate()


def dump_config(cfg: ExperimentConfig) -> str:
    """Round-trippable INI text for ``cfg``."""

    def fmt(v):
        if isinstance(v, tuple):
            return ", ".join(str(x) for x in v)
        return "none" if v is None else str(v)

    lines = []
    for sec in SECTIONS:
        lines.append(f"[{sec}]")
        obj = getattr(cfg, sec)
        for f in dataclasses.fields(obj):
            lines.append(f"{f.name} = {fmt(getattr(obj, f.name))}")
        lines.append("")
    lines.append("[experiment]")
    for key in TOP_LEVEL:
        lines.append(f"{key} = {fmt(getattr(cfg, key))}")
    return "\n".join(lines) + "\n"
