"""Adam, staged training with LR scheduling and early stopping, W2FM checkpoints."""

from .checkpoint import (
    CheckpointError,
    CheckpointVersionError,
    CorruptCheckpointError,
    load_checkpoint,
    read_checkpoint,
    save_checkpoint,
)
from .optim import AdamState, adam_step, clip_grad_norm
from .trainer import (
    EpochRecord,
    TrainConfig,
    TrainingError,
    TrainReport,
    evaluate_loss,
    format_epoch,
    split_validation,
    train_model,
    train_stage,
)

__all__ = [
    "AdamState",
    "CheckpointError",
    "CheckpointVersionError",
    "CorruptCheckpointError",
    "EpochRecord",
    "TrainConfig",
    "TrainReport",
    "TrainingError",
    "adam_step",
    "clip_grad_norm",
    "evaluate_loss",
    "format_epoch",
    "load_checkpoint",
    "read_checkpoint",
    "save_checkpoint",
    "split_validation",
    "train_model",
    "train_stage",
]
