"""Evaluation runs: held-out prediction, leave-one-user-out folds, ablation variants."""

from __future__ import annotations

import logging
from dataclasses import dataclass, fields
from typing import Callable

import numpy as np

from ..model import VARIANTS, LossWeights, ModelConfig, RingWatchNet, build
from ..pipeline import DatasetSplit, WindowSet, louo_splits, windows_from_sessions
from ..tensorgrad import no_grad
from ..train import TrainConfig, train_model
from .metrics import MetricsReport, mean_pose_baseline, metrics_report

logger = logging.getLogger(__name__)

_NUMERIC = ("mpjpe_cm", "angle_diff_deg", "force_rmse", "force_mae", "force_pearson")


class LeakageError(AssertionError):
    pass


@dataclass(frozen=True)
class AblationSpec:
    variant: str = "full"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")

    def loss_weights(self, base: LossWeights) -> LossWeights:
        """The removed branch's auxiliary loss is switched off."""
        if self.variant == "no_emg":
            return LossWeights(base.imu, 0.0, base.angle)
        if self.variant == "no_imu":
            return LossWeights(0.0, base.emg, base.angle)
        return base


def predict(model: RingWatchNet, windows: WindowSet, batch_size: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Fused-head pose (N, 21, 3) and normalized force (N, 5)."""
    poses, forces = [], []
    with no_grad():
        for start in range(0, len(windows), batch_size):
            sl = slice(start, start + batch_size)
            out = model(windows.imu[sl], windows.emg[sl])
            poses.append(out.pose.data)
            forces.append(out.force.data)
    if not poses:
        return np.zeros((0, 21, 3)), np.zeros((0, 5))
    return np.concatenate(poses), np.concatenate(forces)


def evaluate(model: RingWatchNet, windows: WindowSet, label: str = "test", user_id: str | None = None) -> MetricsReport:
    pose, force = predict(model, windows)
    return metrics_report(label, pose, force, windows.pose, windows.force, model.config.variant, user_id)


def check_no_leakage(split: DatasetSplit) -> None:
    overlap = set(split.train.user_ids.tolist()) & set(split.test.user_ids.tolist())
    if overlap:
        raise LeakageError(f"users present in both train and test: {sorted(overlap)}")


def mean_row(rows: list[MetricsReport], label: str = "mean") -> MetricsReport:
    """Arithmetic mean of the headline metrics over ``rows``."""
    vals = {k: float(np.mean([getattr(r, k) for r in rows])) for k in _NUMERIC}
    return MetricsReport(label=label, n_windows=int(sum(r.n_windows for r in rows)), variant=rows[0].variant, **vals)


@dataclass
class LouoResult:
    rows: list[MetricsReport]
    mean: MetricsReport
    baselines: dict[str, float]

    @property
    def all_rows(self) -> list[MetricsReport]:
        return self.rows + [self.mean]


def run_louo(data, model_config: ModelConfig, train_config: TrainConfig,
             log: Callable[[str], None] | None = None) -> LouoResult:
    """Train on all users but one, evaluate on the held-out user, for every user."""
    windows = data if isinstance(data, WindowSet) else windows_from_sessions(data)
    rows = []
    baselines = {}
    for fold in louo_splits(windows):
        check_no_leakage(fold)
        if log:
            log(f"louo fold user={fold.fold_user} train={len(fold.train)} test={len(fold.test)}")
        model = build(model_config)
        train_model(model, fold.train, train_config, log=log)
        rows.append(evaluate(model, fold.test, label=fold.fold_user, user_id=fold.fold_user))
        baselines[fold.fold_user] = mean_pose_baseline(fold.train.pose, fold.test.pose)
    return LouoResult(rows, mean_row(rows), baselines)


def run_ablation(spec: AblationSpec, split: DatasetSplit, model_config: ModelConfig, train_config: TrainConfig,
                 log: Callable[[str], None] | None = None) -> MetricsReport:
    """Train the ``spec`` variant from scratch on ``split.train`` and score it on ``split.test``."""
    cfg = TrainConfig(**{f.name: getattr(train_config, f.name) for f in fields(TrainConfig)})
    cfg.loss_weights = spec.loss_weights(train_config.loss_weights)
    model = build(model_config.replace(variant=spec.variant))
    train_model(model, split.train, cfg, log=log)
    return evaluate(model, split.test, label=spec.variant)


def run_ablations(split: DatasetSplit, model_config: ModelConfig, train_config: TrainConfig, variants=VARIANTS,
                  log: Callable[[str], None] | None = None) -> list[MetricsReport]:
    return [run_ablation(AblationSpec(v), split, model_config, train_config, log) for v in variants]
