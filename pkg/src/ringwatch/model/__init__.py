"""Dual-branch IMU/EMG hand pose and force network and its loss."""

from .angles import ANGLE_TRIPLES, N_ANGLES, DegeneratePoseError, joint_angles_from_pose, joint_angles_tensor
from .config import POOLING, VARIANTS, ModelConfig
from .loss import LossBreakdown, LossOptions, LossWeights, combine, enabled_parts, loss_parts, total_loss
from .network import COMPONENTS, ModelOutput, RingWatchNet, build

__all__ = [
    "ANGLE_TRIPLES",
    "COMPONENTS",
    "DegeneratePoseError",
    "LossBreakdown",
    "LossOptions",
    "LossWeights",
    "ModelConfig",
    "ModelOutput",
    "N_ANGLES",
    "POOLING",
    "RingWatchNet",
    "VARIANTS",
    "build",
    "combine",
    "enabled_parts",
    "joint_angles_from_pose",
    "joint_angles_tensor",
    "loss_parts",
    "total_loss",
]
