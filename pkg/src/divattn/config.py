"""Run configuration: a line-oriented ``key = value`` text format.

Blank lines and ``#`` comments are ignored, unknown keys are rejected, and
every key has a documented default (see README). ``load_config`` returns the
model/training hyperparameters and the run settings (data source, output
paths, synthetic dataset spec).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .synthetic import SyntheticSpec

PENALTIES = ("Q", "Qprime", "none")
SPATIAL_MODES = ("attention", "uniform")
TEMPORAL_MODES = ("attention", "average", "max")
TEMPORAL_NORMS = ("softmax", "linear")
LOSSES = ("oim", "softmax")


@dataclass
class Hyperparams:
    N: int = 6
    K: int = 6
    grid_h: int = 8
    grid_w: int = 4
    D: int = 64
    d: int = 16
    E: int = 32
    lambda_div: float = 0.1
    penalty: str = "Q"
    spatial_mode: str = "attention"
    enhancement: bool = True
    sigma: float = 2.0
    temporal_mode: str = "attention"
    temporal_norm: str = "softmax"
    loss: str = "oim"
    tau: float = 0.1
    gamma: float = 0.5
    lr: float = 0.1
    lr_drop: float = 0.01
    lr_drop_epoch: int = -1
    sgd_momentum: float = 0.0
    warmup_epochs: int = 0
    seed: int = 0
    epochs: int = 30
    batch_size: int = 8

    @property
    def L(self) -> int:
        return self.grid_h * self.grid_w

    def drop_epoch(self) -> int:
        """Epoch at which the learning rate drops; -1 means halfway."""
        return self.epochs // 2 if self.lr_drop_epoch < 0 else self.lr_drop_epoch

    def lr_at(self, epoch: int) -> float:
        return self.lr if epoch < self.drop_epoch() else self.lr_drop

    def validate(self) -> "Hyperparams":
        for name in ("N", "K", "grid_h", "grid_w", "D", "d", "E", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be >= 1")
        if not 1 <= self.K <= 16:
            raise ConfigError("K", "must lie in 1..16")
        for name in ("epochs", "warmup_epochs", "seed"):
            if getattr(self, name) < 0:
                raise ConfigError(name, "must be >= 0")
        if self.seed >= 2**64:
            raise ConfigError("seed", "must fit in 64 bits")
        if self.lambda_div < 0:
            raise ConfigError("lambda_div", "must be >= 0")
        for name in ("sigma", "tau", "lr", "lr_drop"):
            if not getattr(self, name) > 0:
                raise ConfigError(name, "must be > 0")
        if not 0 <= self.gamma < 1:
            raise ConfigError("gamma", "must lie in [0, 1)")
        if not 0 <= self.sgd_momentum < 1:
            raise ConfigError("sgd_momentum", "must lie in [0, 1)")
        for name, allowed in (
            ("penalty", PENALTIES),
            ("spatial_mode", SPATIAL_MODES),
            ("temporal_mode", TEMPORAL_MODES),
            ("temporal_norm", TEMPORAL_NORMS),
            ("loss", LOSSES),
        ):
            if getattr(self, name) not in allowed:
                raise ConfigError(name, f"must be one of {', '.join(allowed)}")
        return self

    def replace(self, **changes) -> "Hyperparams":
        return dataclasses.replace(self, **changes).validate()


@dataclass
class RunSettings:
    data: str = "synthetic"
    out_dir: str = "run"
    checkpoint: str = "model.dvat"
    metrics: str = "metrics.csv"
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)


def _parse_value(key: str, raw: str, typ):
    if typ is bool:
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ConfigError(key, f"expected a boolean, got {raw!r}")
    try:
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
    except ValueError:
        raise ConfigError(key, f"expected {typ.__name__}, got {raw!r}") from None
    return raw


def _field_types(cls) -> dict:
    hints = {"int": int, "float": float, "str": str, "bool": bool}
    return {f.name: hints.get(f.type if isinstance(f.type, str) else f.type.__name__, str) for f in fields(cls)}


def parse_pairs(text: str) -> list[tuple[str, str]]:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        pairs.append((key, value))
    return pairs


def apply_pairs(targets: list, pairs) -> None:
    """Assign each pair to the first target dataclass that declares the key."""
    typed = [(t, _field_types(type(t))) for t in targets]
    for key, raw in pairs:
        for target, types in typed:
            if key in types and not dataclasses.is_dataclass(getattr(target, key)):
                setattr(target, key, _parse_value(key, raw, types[key]))
                break
        else:
            raise ConfigError(key, "unknown key")


def loads_config(text: str) -> tuple[Hyperparams, RunSettings]:
    hyper, run = Hyperparams(), RunSettings()
    apply_pairs([hyper, run, run.synthetic], parse_pairs(text))
    hyper.validate()
    run.synthetic.validate()
    return hyper, run


def load_config(path) -> tuple[Hyperparams, RunSettings]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("path", f"cannot read {path}: {exc.strerror}") from None
    return loads_config(text)


def echo_lines(hyper: Hyperparams, run: RunSettings | None = None) -> list[str]:
    """The resolved configuration as ``key = value`` lines."""
    objs = [hyper] + ([run, run.synthetic] if run is not None else [])
    lines = []
    for obj in objs:
        for f in fields(obj):
            value = getattr(obj, f.name)
            if dataclasses.is_dataclass(value):
                continue
            if isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{f.name} = {value}")
    return lines


def hyper_to_text(hyper: Hyperparams) -> str:
    return "\n".join(echo_lines(hyper)) + "\n"


def hyper_from_text(text: str) -> Hyperparams:
    hyper = Hyperparams()
    apply_pairs([hyper], parse_pairs(text))
    return hyper.validate()
