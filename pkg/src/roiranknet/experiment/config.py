"""Training configuration and its ``key = value`` file format."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from ..errors import ConfigError
from ..models import ModelConfig

# key -> (parser, where it lives)
_TRAIN_KEYS = {
    "learning_rate": float,
    "l2_factor": float,
    "batch_size": int,
    "epochs": int,
    "seed": int,
    "standardize": lambda v: _parse_bool(v),
}
_MODEL_KEYS = {
    "variant": str,
    "slice_length": int,
    "slice_stride": int,
    "dilation": int,
}


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(value)


CONFIG_KEYS = tuple(_TRAIN_KEYS) + tuple(_MODEL_KEYS)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    l2_factor: float = 0.0005
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0
    standardize: bool = True
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if not self.l2_factor > 0:
            raise ConfigError("l2_factor must be positive")
        if self.batch_size < 2 or self.batch_size % 2:
            raise ConfigError("batch_size must be a positive even number")
        if self.epochs < 0:
            raise ConfigError("epochs must be non-negative")

    def with_(self, **changes) -> "TrainConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "l2_factor": self.l2_factor,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
            "standardize": self.standardize,
            "model": self.model.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        model = ModelConfig.from_dict(d.pop("model"))
        return cls(model=model, **d)

    def to_text(self) -> str:
        lines = [f"{k} = {getattr(self, k)!r}" for k in _TRAIN_KEYS]
        lines.append(f"variant = {self.model.variant}")
        for k in ("slice_length", "slice_stride", "dilation"):
            v = getattr(self.model, k)
            if v is not None:
                lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"


def parse_assignments(pairs) -> dict:
    """Parse ``key = value`` strings; unknown keys are rejected."""
    out = {}
    for raw in pairs:
        if "=" not in raw:
            raise ConfigError(f"expected key=value, got {raw!r}")
        key, value = (s.strip() for s in raw.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}; known keys: {', '.join(CONFIG_KEYS)}")
        parser = _TRAIN_KEYS.get(key) or _MODEL_KEYS[key]
        try:
            out[key] = parser(value)
        except ValueError:
            raise ConfigError(f"bad value for {key}: {value!r}") from None
    return out


def read_config_text(text: str) -> dict:
    lines = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    return parse_assignments(lines)


def build_train_config(values: dict, base: TrainConfig | None = None) -> TrainConfig:
    """Merge parsed key/value settings onto ``base`` (defaults when None)."""
    base = base or TrainConfig()
    train_kw = {k: v for k, v in values.items() if k in _TRAIN_KEYS}
    model_kw = {k: v for k, v in values.items() if k in _MODEL_KEYS}
    model = base.model
    if model_kw:
        variant = model_kw.pop("variant", model.variant).upper().replace("-", "_")
        carried = {}
        if variant == model.variant:
            carried = {"dilation": model.dilation, "slice_length": model.slice_length,
                       "slice_stride": model.slice_stride}
        carried.update(model_kw)
        model = ModelConfig.for_variant(variant, **carried)
    return replace(base, model=model, **train_kw)


def load_train_config(path=None, overrides=(), base: TrainConfig | None = None) -> TrainConfig:
    values = {}
    if path is not None:
        try:
            values.update(read_config_text(Path(path).read_text(encoding="utf-8")))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    values.update(parse_assignments(overrides))
    return build_train_config(values, base)
