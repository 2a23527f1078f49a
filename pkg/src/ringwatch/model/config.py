from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from ..tensorgrad.nn import ConfigError

VARIANTS = ("full", "no_emg", "no_imu", "no_cross_attention")
POOLING = ("mean", "last")


@dataclass(frozen=True)
class ModelConfig:
    d_hidden: int = 128
    heads: int = 4
    encoder_layers: int = 2
    lstm_layers: int = 2
    cross_layers: int = 2
    window: int = 30
    imu_dim: int = 24
    emg_dim: int = 6
    n_joints: int = 21
    n_fingers: int = 5
    ff_expansion: int = 4
    conv_width: int = 5
    pooling: str = "mean"
    variant: str = "full"
    seed: int = 0

    def __post_init__(self):
        if self.d_hidden < 1 or self.heads < 1 or self.d_hidden % self.heads:
            raise ConfigError(f"d_hidden={self.d_hidden} must be a positive multiple of heads={self.heads}")
        if self.d_hidden % 2:
            raise ConfigError("d_hidden must be even for the positional encoding")
        for name in ("encoder_layers", "lstm_layers", "window", "imu_dim", "emg_dim", "ff_expansion", "conv_width"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.cross_layers < 0:
            raise ConfigError("cross_layers must be >= 0")
        if self.n_joints != 21 or self.n_fingers != 5:
            raise ConfigError("the pose head is fixed to 21 joints and 5 fingers")
        if self.pooling not in POOLING:
            raise ConfigError(f"pooling must be one of {POOLING}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **changes) -> "ModelConfig":
        return ModelConfig.from_dict({**self.to_dict(), **changes})
