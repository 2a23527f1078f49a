"""Composite training loss.

Weighted terms:
    L_IMU   = MSE(pose_imu) + MSE(force_imu)      (auxiliary IMU-branch heads)
    L_EMG   = MSE(pose_emg) + MSE(force_emg)      (auxiliary EMG-branch heads)
    L_Angle = MSE of the 15 interior joint angles of the fused pose
Optional terms (each with its own weight in LossOptions):
    L_fused  = MSE(pose) + MSE(force) on the fused heads
    L_smooth = mean squared difference of fused force between consecutive windows of one trial
    L_sat    = mean(max(0, force - ceiling)^2)

Pose MSEs are taken in standardized coordinates, (pred - target) / pose_scale,
so pose and normalized force enter on comparable scales.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..tensorgrad import Tensor
from .angles import joint_angles_tensor
from .network import ModelOutput

PARTS = ("imu", "emg", "angle", "fused", "smooth", "sat")


@dataclass(frozen=True)
class LossWeights:
    imu: float = 0.5
    emg: float = 0.5
    angle: float = 1.0

    def __post_init__(self):
        if min(self.imu, self.emg, self.angle) < 0:
            raise ValueError("loss weights must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LossOptions:
    fused_weight: float = 1.0
    smooth_weight: float = 0.0
    sat_weight: float = 0.0
    sat_ceiling: float = 1.1

    def __post_init__(self):
        if min(self.fused_weight, self.smooth_weight, self.sat_weight) < 0:
            raise ValueError("optional loss weights must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LossBreakdown:
    total: float
    imu: float
    emg: float
    angle: float
    fused: float | None = None
    smooth: float | None = None
    sat: float | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


def _coef(name: str, w: LossWeights, opts: LossOptions) -> float:
    return {"imu": w.imu, "emg": w.emg, "angle": w.angle, "fused": opts.fused_weight,
            "smooth": opts.smooth_weight, "sat": opts.sat_weight}[name]


def enabled_parts(opts: LossOptions) -> tuple[str, ...]:
    extra = tuple(n for n in ("fused", "smooth", "sat") if _coef(n, LossWeights(), opts) > 0)
    return ("imu", "emg", "angle") + extra


def combine(parts: dict, w: LossWeights = LossWeights(), opts: LossOptions = LossOptions()):
    """Weighted sum in fixed order; works on floats and on Tensors."""
    total = None
    for name in enabled_parts(opts):
        term = parts[name] * _coef(name, w, opts)
        total = term if total is None else total + term
    return total


def _mse(pred: Tensor, target: np.ndarray, scale=None) -> Tensor:
    diff = pred - target
    if scale is not None:
        diff = diff * (1.0 / scale)
    return (diff * diff).mean()


def smooth_pairs(trial_keys, t_end) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs (i, i+1) of adjacent batch rows from the same trial, in time order."""
    keys = np.asarray(trial_keys)
    t_end = np.asarray(t_end, dtype=float)
    same = (keys[1:] == keys[:-1]) & (t_end[1:] > t_end[:-1])
    i = np.flatnonzero(same)
    return i, i + 1


def loss_parts(out: ModelOutput, pose_target: np.ndarray, force_target: np.ndarray,
               opts: LossOptions = LossOptions(), pose_scale=None, trial_keys=None, t_end=None,
               target_angles: np.ndarray | None = None) -> dict[str, Tensor]:
    pose_target = np.asarray(pose_target, dtype=float)
    force_target = np.asarray(force_target, dtype=float)
    if target_angles is None:
        target_angles = joint_angles_tensor(Tensor(pose_target)).data
    parts = {
        "imu": _mse(out.pose_imu, pose_target, pose_scale) + _mse(out.force_imu, force_target),
        "emg": _mse(out.pose_emg, pose_target, pose_scale) + _mse(out.force_emg, force_target),
        "angle": _mse(joint_angles_tensor(out.pose), target_angles),
    }
    if opts.fused_weight > 0:
        parts["fused"] = _mse(out.pose, pose_target, pose_scale) + _mse(out.force, force_target)
    if opts.smooth_weight > 0:
        if trial_keys is None or t_end is None:
            raise ValueError("the smoothness term needs trial keys and window end times")
        a, b = smooth_pairs(trial_keys, t_end)
        if len(a):
            d = out.force[b] - out.force[a]
            parts["smooth"] = (d * d).mean()
        else:
            parts["smooth"] = Tensor(0.0)
    if opts.sat_weight > 0:
        excess = (out.force - opts.sat_ceiling).relu()
        parts["sat"] = (excess * excess).mean()
    return parts


def total_loss(out: ModelOutput, pose_target: np.ndarray, force_target: np.ndarray,
               w: LossWeights = LossWeights(), opts: LossOptions = LossOptions(), pose_scale=None,
               trial_keys=None, t_end=None, target_angles=None) -> tuple[Tensor, LossBreakdown]:
    """Differentiable total plus a float breakdown whose total recomposes exactly via ``combine``."""
    parts = loss_parts(out, pose_target, force_target, opts, pose_scale, trial_keys, t_end, target_angles)
    total = combine(parts, w, opts)
    values = {k: float(v.data) for k, v in parts.items()}
    breakdown = LossBreakdown(total=combine(values, w, opts), **values)
    return total, breakdown
