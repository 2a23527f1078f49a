"""Mini-batch training with a patience-based LR schedule, early stopping and the two-stage recipe."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ..model import COMPONENTS, LossBreakdown, LossOptions, LossWeights, RingWatchNet, joint_angles_from_pose, total_loss
from ..pipeline import NormalizationSpec, WindowSet
from ..tensorgrad import no_grad
from .checkpoint import save_checkpoint
from .optim import AdamState, adam_step, clip_grad_norm

logger = logging.getLogger(__name__)


_STAGE_IDS = {"stage1": 1, "stage2": 2}


class TrainingError(ValueError):
    pass


@dataclass
class TrainConfig:
    batch_size: int = 256
    lr_main: float = 1e-3
    lr_finetune: float = 1e-4
    max_epochs: int = 100
    finetune_epochs: int | None = None  # None: same as max_epochs
    patience_lr: int = 5
    lr_factor: float = 0.5
    early_stop_patience: int = 10
    loss_weights: LossWeights = field(default_factory=LossWeights)
    loss_options: LossOptions = field(default_factory=LossOptions)
    seed: int = 0
    finetune_components: tuple = ("pose_decoder", "emg_encoder")
    val_fraction: float = 0.1
    grad_clip: float = 5.0

    def __post_init__(self):
        if self.batch_size < 1:
            raise TrainingError("batch_size must be >= 1")
        if not self.lr_finetune < self.lr_main:
            raise TrainingError("lr_finetune must be smaller than lr_main")
        if self.max_epochs < 1:
            raise TrainingError("max_epochs must be >= 1")
        if not 0.0 <= self.val_fraction < 1.0:
            raise TrainingError("val_fraction must lie in [0, 1)")
        if not 0.0 < self.lr_factor < 1.0:
            raise TrainingError("lr_factor must lie in (0, 1)")
        self.finetune_components = tuple(self.finetune_components)
        bad = set(self.finetune_components) - set(COMPONENTS)
        if bad:
            raise TrainingError(f"unknown fine-tune components {sorted(bad)}")
        if isinstance(self.loss_weights, dict):
            self.loss_weights = LossWeights(**self.loss_weights)
        if isinstance(self.loss_options, dict):
            self.loss_options = LossOptions(**self.loss_options)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["finetune_components"] = list(self.finetune_components)
        return d


@dataclass
class EpochRecord:
    epoch: int
    train: dict
    val: dict | None
    lr: float
    seconds: float


@dataclass
class TrainReport:
    stage: str
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    best_val: float = math.inf
    checkpoint_path: str | None = None
    trainable: list[str] = field(default_factory=list)
    stopped_early: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def split_validation(windows: WindowSet, fraction: float, seed: int) -> tuple[WindowSet, WindowSet | None]:
    """Carve whole trials (never single windows) out of ``windows`` for validation."""
    if fraction <= 0:
        return windows, None
    keys = windows.trial_keys
    trials = np.unique(keys)
    n_val = int(round(fraction * len(trials)))
    if n_val == 0 or n_val >= len(trials):
        return windows, None
    rng = np.random.default_rng([seed, 7])
    held = set(rng.choice(trials, size=n_val, replace=False).tolist())
    is_val = np.array([k in held for k in keys])
    return windows.subset(np.flatnonzero(~is_val)), windows.subset(np.flatnonzero(is_val))


def _batch_loss(model: RingWatchNet, ws: WindowSet, idx: np.ndarray, cfg: TrainConfig, angles: np.ndarray):
    opts = cfg.loss_options
    if opts.smooth_weight > 0:
        keys = ws.trial_keys[idx]
        idx = idx[np.lexsort((ws.t_end[idx], keys))]
    out = model(ws.imu[idx], ws.emg[idx])
    return total_loss(out, ws.pose[idx], ws.force[idx], cfg.loss_weights, opts, pose_scale=model.pose_scale,
                      trial_keys=ws.trial_keys[idx] if opts.smooth_weight > 0 else None, t_end=ws.t_end[idx],
                      target_angles=angles[idx])


def _mean_breakdown(items: list[tuple[LossBreakdown, int]]) -> dict:
    n = sum(k for _, k in items)
    keys = items[0][0].to_dict().keys()
    return {k: sum(b.to_dict()[k] * m for b, m in items) / n for k in keys}


def evaluate_loss(model: RingWatchNet, ws: WindowSet, cfg: TrainConfig, angles: np.ndarray | None = None) -> dict:
    if angles is None:
        angles = joint_angles_from_pose(ws.pose)
    items = []
    with no_grad():
        for start in range(0, len(ws), cfg.batch_size):
            idx = np.arange(start, min(start + cfg.batch_size, len(ws)))
            items.append((_batch_loss(model, ws, idx, cfg, angles)[1], len(idx)))
    return _mean_breakdown(items)


def train_stage(model: RingWatchNet, train: WindowSet, cfg: TrainConfig, trainable=COMPONENTS, lr: float | None = None,
                val: WindowSet | None = None, max_epochs: int | None = None, stage: str = "stage1",
                log: Callable[[str], None] | None = None) -> TrainReport:
    """Optimize the ``trainable`` components; the best-validation parameters are restored at the end."""
    if len(train) == 0:
        raise TrainingError("training set is empty")
    lr = cfg.lr_main if lr is None else lr
    max_epochs = cfg.max_epochs if max_epochs is None else max_epochs
    params = model.component_parameters(trainable)
    if not params:
        raise TrainingError(f"no parameters in components {trainable}")
    train_angles = joint_angles_from_pose(train.pose)
    val_angles = joint_angles_from_pose(val.pose) if val is not None and len(val) else None
    report = TrainReport(stage=stage, trainable=list(trainable))
    state = AdamState()
    best_params = [p.data.copy() for p in params]
    since_best = 0
    since_lr = 0
    for epoch in range(max_epochs):
        t0 = time.perf_counter()
        rng = np.random.default_rng([cfg.seed, _STAGE_IDS.get(stage, 99), epoch])
        order = rng.permutation(len(train))
        items = []
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            model.zero_grad()
            loss, parts = _batch_loss(model, train, idx, cfg, train_angles)
            loss.backward()
            grads = [p.grad for p in params]
            clip_grad_norm(grads, cfg.grad_clip)
            adam_step(params, grads, state, lr)
            items.append((parts, len(idx)))
        model.zero_grad()
        train_parts = _mean_breakdown(items)
        val_parts = evaluate_loss(model, val, cfg, val_angles) if val_angles is not None else None
        score = (val_parts or train_parts)["total"]
        record = EpochRecord(epoch, train_parts, val_parts, lr, time.perf_counter() - t0)
        report.epochs.append(record)
        if log:
            log(format_epoch(stage, record))
        if score < report.best_val:
            report.best_val = score
            report.best_epoch = epoch
            best_params = [p.data.copy() for p in params]
            since_best = since_lr = 0
        else:
            since_best += 1
            since_lr += 1
            if since_lr >= cfg.patience_lr:
                lr *= cfg.lr_factor
                since_lr = 0
            if since_best >= cfg.early_stop_patience:
                report.stopped_early = True
                break
    for p, data in zip(params, best_params):
        p.data = data
    return report


def format_epoch(stage: str, r: EpochRecord) -> str:
    parts = " ".join(f"{k}={v:.6g}" for k, v in r.train.items())
    line = f"{stage} epoch={r.epoch} lr={r.lr:.3g} time={r.seconds:.2f}s train[{parts}]"
    if r.val:
        line += " val[" + " ".join(f"{k}={v:.6g}" for k, v in r.val.items()) + "]"
    return line


def train_model(model: RingWatchNet, windows: WindowSet, cfg: TrainConfig, out_dir: Path | None = None,
                norm: NormalizationSpec = NormalizationSpec(), log: Callable[[str], None] | None = None,
                stages: tuple = ("stage1", "stage2")) -> list[TrainReport]:
    """Stage 1: every component at ``lr_main``; stage 2: ``finetune_components`` at ``lr_finetune``."""
    train, val = split_validation(windows, cfg.val_fraction, cfg.seed)
    model.set_pose_stats(train.pose)
    reports = []
    if "stage1" in stages:
        reports.append(train_stage(model, train, cfg, COMPONENTS, cfg.lr_main, val, cfg.max_epochs, "stage1", log))
    if "stage2" in stages:
        epochs = cfg.finetune_epochs if cfg.finetune_epochs is not None else cfg.max_epochs
        if epochs > 0:
            reports.append(train_stage(model, train, cfg, cfg.finetune_components, cfg.lr_finetune, val, epochs,
                                       "stage2", log))
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = save_checkpoint(model, out_dir / "model.w2fm", norm, {"train_config": cfg.to_dict()})
        for r in reports:
            r.checkpoint_path = str(path)
        (out_dir / "train_report.json").write_text(
            json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n")
    return reports
