"""Pose and force metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..model import joint_angles_from_pose
from ..synthhand import FINGERS


class MetricsError(ValueError):
    pass


def mpjpe(pred_pose, gt_pose) -> float:
    """Mean Euclidean distance over joints (and over all leading axes), no alignment."""
    pred_pose = np.asarray(pred_pose, dtype=float)
    gt_pose = np.asarray(gt_pose, dtype=float)
    if pred_pose.shape != gt_pose.shape or pred_pose.shape[-1] != 3:
        raise MetricsError(f"pose shapes differ or are not (..., 3): {pred_pose.shape} vs {gt_pose.shape}")
    return float(np.mean(np.linalg.norm(pred_pose - gt_pose, axis=-1)))


def angle_diff(pred_pose, gt_pose) -> float:
    """Mean absolute difference of the 15 interior joint angles, in degrees."""
    a = joint_angles_from_pose(pred_pose)
    b = joint_angles_from_pose(gt_pose)
    return float(np.degrees(np.mean(np.abs(a - b))))


def pearson(x, y) -> tuple[float, bool]:
    """Pearson correlation and a degenerate flag; a constant series gives (0.0, True)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx <= 0.0 or syy <= 0.0:
        return 0.0, True
    r = float(np.dot(dx, dy)) / np.sqrt(sxx * syy)
    return float(np.clip(r, -1.0, 1.0)), False


@dataclass
class FingerForceMetrics:
    rmse: float
    mae: float
    pearson: float
    degenerate: bool = False


@dataclass
class ForceMetrics:
    fingers: dict[str, FingerForceMetrics]
    rmse: float
    mae: float
    pearson: float

    def to_dict(self) -> dict:
        return asdict(self)


def force_metrics(pred, gt) -> ForceMetrics:
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape or pred.ndim != 2 or pred.shape[1] != 5:
        raise MetricsError(f"force arrays must both be (T, 5), got {pred.shape} and {gt.shape}")
    if len(pred) < 2:
        raise MetricsError("force metrics need at least 2 samples")
    fingers = {}
    for i, name in enumerate(FINGERS):
        err = pred[:, i] - gt[:, i]
        r, degenerate = pearson(pred[:, i], gt[:, i])
        fingers[name] = FingerForceMetrics(float(np.sqrt(np.mean(err * err))), float(np.mean(np.abs(err))), r,
                                           degenerate)
    vals = list(fingers.values())
    return ForceMetrics(
        fingers=fingers,
        rmse=float(np.mean([f.rmse for f in vals])),
        mae=float(np.mean([f.mae for f in vals])),
        pearson=float(np.mean([f.pearson for f in vals])),
    )


@dataclass
class MetricsReport:
    label: str
    mpjpe_cm: float
    angle_diff_deg: float
    force_rmse: float
    force_mae: float
    force_pearson: float
    per_finger: dict = field(default_factory=dict)
    n_windows: int = 0
    variant: str = "full"
    user_id: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def metrics_report(label: str, pred_pose, pred_force, gt_pose, gt_force, variant: str = "full",
                   user_id: str | None = None) -> MetricsReport:
    fm = force_metrics(pred_force, gt_force)
    return MetricsReport(
        label=label,
        mpjpe_cm=mpjpe(pred_pose, gt_pose),
        angle_diff_deg=angle_diff(pred_pose, gt_pose),
        force_rmse=fm.rmse,
        force_mae=fm.mae,
        force_pearson=fm.pearson,
        per_finger={k: asdict(v) for k, v in fm.fingers.items()},
        n_windows=len(gt_pose),
        variant=variant,
        user_id=user_id,
    )


def mean_pose_baseline(train_pose, test_pose) -> float:
    """MPJPE of always predicting the mean training pose."""
    mean = np.asarray(train_pose, dtype=float).reshape(-1, 21, 3).mean(axis=0)
    test_pose = np.asarray(test_pose, dtype=float)
    return mpjpe(np.broadcast_to(mean, test_pose.shape), test_pose)
