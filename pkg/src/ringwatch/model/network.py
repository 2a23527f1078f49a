"""Dual-branch IMU/EMG network with cross-modal attention fusion and decoupled heads."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..tensorgrad import Tensor, concat
from ..tensorgrad.nn import (
    LSTM,
    Conv1d,
    FeedForward,
    LayerNorm,
    Linear,
    Module,
    MultiHeadAttention,
    TransformerEncoderLayer,
    positional_encoding,
)
from ..tensorgrad.tensor import ShapeError
from .config import ModelConfig

COMPONENTS = ("imu_encoder", "emg_encoder", "fusion", "pose_decoder", "force_decoder", "aux_imu", "aux_emg")


@dataclass
class ModelOutput:
    pose: Tensor  # (..., 21, 3) cm
    force: Tensor  # (..., 5) normalized
    pose_imu: Tensor
    force_imu: Tensor
    pose_emg: Tensor
    force_emg: Tensor

    def numpy(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k).data.copy() for k in ("pose", "force", "pose_imu", "force_imu", "pose_emg", "force_emg")}


class ImuEncoder(Module):
    """Conv1d stem (same padding), positional encoding, self-attention encoder."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.conv = Conv1d(cfg.imu_dim, cfg.d_hidden, cfg.conv_width, rng, padding="same")
        self.layers = [TransformerEncoderLayer(cfg.d_hidden, cfg.heads, cfg.ff_expansion, rng)
                       for _ in range(cfg.encoder_layers)]
        self.pe = positional_encoding(cfg.window, cfg.d_hidden)

    def stem(self, x: Tensor) -> Tensor:
        return self.conv(x)

    def forward(self, x: Tensor) -> Tensor:
        h = self.stem(x) + self.pe
        for layer in self.layers:
            h = layer(h)
        return h


class EmgEncoder(Module):
    """Stacked LSTM, positional encoding, self-attention encoder."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.lstm = LSTM(cfg.emg_dim, cfg.d_hidden, cfg.lstm_layers, rng)
        self.layers = [TransformerEncoderLayer(cfg.d_hidden, cfg.heads, cfg.ff_expansion, rng)
                       for _ in range(cfg.encoder_layers)]
        self.pe = positional_encoding(cfg.window, cfg.d_hidden)

    def stem(self, x: Tensor) -> Tensor:
        return self.lstm(x)

    def forward(self, x: Tensor) -> Tensor:
        h = self.stem(x) + self.pe
        for layer in self.layers:
            h = layer(h)
        return h


class CrossLayer(Module):
    """One bidirectional step: IMU queries EMG, EMG queries IMU, each with a residual + LayerNorm."""

    def __init__(self, d: int, heads: int, rng: np.random.Generator):
        self.imu_to_emg = MultiHeadAttention(d, heads, rng)
        self.norm_imu = LayerNorm(d)
        self.emg_to_imu = MultiHeadAttention(d, heads, rng)
        self.norm_emg = LayerNorm(d)

    def forward(self, a: Tensor, b: Tensor) -> tuple[Tensor, Tensor]:
        a_new = self.norm_imu(a + self.imu_to_emg(a, b, b))
        b_new = self.norm_emg(b + self.emg_to_imu(b, a, a))
        return a_new, b_new


class CrossFusion(Module):
    """Cross-attention stack, then concat (2d) -> Linear(2d, d) + FF(2d -> 4d -> d)."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator, cross: bool = True):
        d = cfg.d_hidden
        self.layers = [CrossLayer(d, cfg.heads, rng) for _ in range(cfg.cross_layers)] if cross else []
        self.proj = Linear(2 * d, d, rng)
        self.ff = FeedForward(2 * d, cfg.ff_expansion * d, d, rng)

    def forward(self, imu: Tensor, emg: Tensor) -> Tensor:
        for layer in self.layers:
            imu, emg = layer(imu, emg)
        c = concat([imu, emg], axis=-1)
        return self.proj(c) + self.ff(c)


class PoseHead(Module):
    """Wrist landmark plus one 12-unit linear group per finger, in MediaPipe order."""

    def __init__(self, d: int, rng: np.random.Generator):
        self.wrist = Linear(d, 3, rng)
        self.fingers = [Linear(d, 12, rng) for _ in range(5)]

    def forward(self, z: Tensor) -> Tensor:
        out = concat([self.wrist(z)] + [f(z) for f in self.fingers], axis=-1)
        return out.reshape(z.shape[:-1] + (21, 3))


class ForceHead(Module):
    """Five linear units; column i of the weight and bias[i] belong to finger i only."""

    def __init__(self, d: int, rng: np.random.Generator):
        self.units = Linear(d, 5, rng)

    def forward(self, z: Tensor) -> Tensor:
        return self.units(z)


class AuxHeads(Module):
    def __init__(self, d: int, rng: np.random.Generator):
        self.pose = PoseHead(d, rng)
        self.force = ForceHead(d, rng)


class RingWatchNet(Module):
    """IMU + EMG windows -> fingertip pose (cm) and normalized force, with per-branch auxiliary heads.

    ``pose_mean``/``pose_scale`` are fixed buffers (set from training targets);
    every pose head output is mapped through ``mean + scale * head``.
    """

    def __init__(self, config: ModelConfig = ModelConfig()):
        self.config = config
        rng = np.random.default_rng(config.seed)
        d = config.d_hidden
        self.imu_encoder = ImuEncoder(config, rng)
        self.emg_encoder = EmgEncoder(config, rng)
        self.fusion = CrossFusion(config, rng, cross=config.variant != "no_cross_attention")
        self.pose_decoder = PoseHead(d, rng)
        self.force_decoder = ForceHead(d, rng)
        self.aux_imu = AuxHeads(d, rng)
        self.aux_emg = AuxHeads(d, rng)
        self.pose_mean = np.zeros((21, 3))
        self.pose_scale = np.ones((21, 3))

    def set_pose_stats(self, poses: np.ndarray, floor: float = 1e-3) -> None:
        poses = np.asarray(poses, dtype=float).reshape(-1, 21, 3)
        self.pose_mean = poses.mean(axis=0)
        self.pose_scale = np.maximum(poses.std(axis=0), floor)

    def component_parameters(self, components) -> list[Tensor]:
        unknown = set(components) - set(COMPONENTS)
        if unknown:
            raise ValueError(f"unknown components {sorted(unknown)}; choose from {COMPONENTS}")
        return [p for name, p in self.named_parameters() if name.split(".", 1)[0] in components]

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def _check(self, x, width: int, label: str) -> Tensor:
        x = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=float))
        if x.ndim < 2 or x.shape[-2:] != (self.config.window, width):
            raise ShapeError(f"{label} input must be (..., {self.config.window}, {width}), got {x.shape}")
        return x

    def _inputs(self, imu, emg) -> tuple[Tensor, Tensor]:
        imu = self._check(imu, self.config.imu_dim, "IMU")
        emg = self._check(emg, self.config.emg_dim, "EMG")
        if self.config.variant == "no_emg":
            emg = Tensor(np.zeros(emg.shape))
        elif self.config.variant == "no_imu":
            imu = Tensor(np.zeros(imu.shape))
        return imu, emg

    def encode_imu(self, imu) -> Tensor:
        return self.imu_encoder(self._check(imu, self.config.imu_dim, "IMU"))

    def encode_emg(self, emg) -> Tensor:
        return self.emg_encoder(self._check(emg, self.config.emg_dim, "EMG"))

    def cross_fuse(self, imu_latent: Tensor, emg_latent: Tensor) -> Tensor:
        return self.fusion(imu_latent, emg_latent)

    def pool(self, h: Tensor) -> Tensor:
        if self.config.pooling == "last":
            return h[..., -1, :]
        return h.mean(axis=-2)

    def _pose(self, head: PoseHead, z: Tensor) -> Tensor:
        return head(z) * self.pose_scale + self.pose_mean

    def decode(self, fused: Tensor) -> tuple[Tensor, Tensor]:
        z = self.pool(fused)
        return self._pose(self.pose_decoder, z), self.force_decoder(z)

    def forward(self, imu, emg) -> ModelOutput:
        imu, emg = self._inputs(imu, emg)
        h_imu = self.imu_encoder(imu)
        h_emg = self.emg_encoder(emg)
        pose, force = self.decode(self.fusion(h_imu, h_emg))
        z_imu = self.pool(h_imu)
        z_emg = self.pool(h_emg)
        return ModelOutput(
            pose=pose,
            force=force,
            pose_imu=self._pose(self.aux_imu.pose, z_imu),
            force_imu=self.aux_imu.force(z_imu),
            pose_emg=self._pose(self.aux_emg.pose, z_emg),
            force_emg=self.aux_emg.force(z_emg),
        )

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Named parameters plus the pose buffers, for serialization."""
        state = {name: p.data for name, p in self.named_parameters()}
        state["buffer.pose_mean"] = self.pose_mean
        state["buffer.pose_scale"] = self.pose_scale
        return state

    def load_state_arrays(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        expected = set(params) | {"buffer.pose_mean", "buffer.pose_scale"}
        if set(state) != expected:
            missing = sorted(expected - set(state))[:3]
            extra = sorted(set(state) - expected)[:3]
            raise ValueError(f"state does not match model: missing {missing}, unexpected {extra}")
        for name, p in params.items():
            if state[name].shape != p.shape:
                raise ValueError(f"{name}: shape {state[name].shape} != {p.shape}")
            p.data = np.array(state[name], dtype=float)
        self.pose_mean = np.array(state["buffer.pose_mean"], dtype=float)
        self.pose_scale = np.array(state["buffer.pose_scale"], dtype=float)


def build(config: ModelConfig = ModelConfig()) -> RingWatchNet:
    return RingWatchNet(config)
