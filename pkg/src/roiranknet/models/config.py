"""Declarative architecture choice."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

from ..errors import ConfigError

VARIANTS = ("SCCNN_RNN", "ASCRNN", "ASDRNN", "ASSRNN")
ATTENTION_VARIANTS = ("ASCRNN", "ASDRNN", "ASSRNN")

DEFAULT_DILATION = 2
DEFAULT_SLICE_LENGTH = 8
DEFAULT_SLICE_STRIDE = 4


@dataclass(frozen=True)
class ModelConfig:
    """Architecture of one classifier.

    ``dilation`` is set only for ASDRNN and ``slice_length`` /
    ``slice_stride`` only for ASSRNN; :meth:`for_variant` fills them in.
    The layer widths default to the published values and are exposed so
    tests can shrink the network.
    """

    variant: str = "SCCNN_RNN"
    conv_channels: tuple = (32, 64, 96, 96)
    kernel: int = 3
    hidden_size: int = 128
    fc_size: int = 128
    attention_size: int = 64
    n_classes: int = 2
    dilation: int | None = None
    slice_length: int | None = None
    slice_stride: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "conv_channels", tuple(int(c) for c in self.conv_channels))
        self.validate()

    @classmethod
    def for_variant(cls, variant: str, **overrides) -> "ModelConfig":
        variant = str(variant).upper().replace("-", "_")
        kwargs: dict = {"variant": variant}
        if variant == "ASDRNN":
            kwargs["dilation"] = DEFAULT_DILATION
        if variant == "ASSRNN":
            kwargs["slice_length"] = DEFAULT_SLICE_LENGTH
            kwargs["slice_stride"] = DEFAULT_SLICE_STRIDE
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kwargs)

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.kernel != 3:
            raise ConfigError("only kernel width 3 is supported")
        if self.n_classes != 2:
            raise ConfigError("only binary classification is supported")
        if len(self.conv_channels) != 4 or min(self.conv_channels) < 1:
            raise ConfigError("conv_channels must list four positive widths")
        for name in ("hidden_size", "fc_size", "attention_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")

        dilated = self.variant == "ASDRNN"
        if dilated and (self.dilation is None or self.dilation < 1):
            raise ConfigError("ASDRNN requires a positive dilation")
        if not dilated and self.dilation is not None:
            raise ConfigError(f"dilation is only valid for ASDRNN, not {self.variant}")

        sliced = self.variant == "ASSRNN"
        given = (self.slice_length is not None, self.slice_stride is not None)
        if sliced:
            if not all(given):
                raise ConfigError("ASSRNN requires slice_length and slice_stride")
            if not 1 <= self.slice_stride <= self.slice_length:
                raise ConfigError("ASSRNN requires 1 <= slice_stride <= slice_length")
        elif any(given):
            raise ConfigError(f"slice_length/slice_stride are only valid for ASSRNN, not {self.variant}")

    @property
    def encoder_dilation(self) -> int:
        return self.dilation if self.variant == "ASDRNN" else 1

    @property
    def has_attention(self) -> bool:
        return self.variant in ATTENTION_VARIANTS

    @property
    def min_length(self) -> int:
        """Shortest time series the encoder accepts."""
        return 1 + len(self.conv_channels) * (self.kernel - 1) * self.encoder_dilation

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conv_channels"] = list(self.conv_channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)

    def with_(self, **changes) -> "ModelConfig":
        return replace(self, **changes)
