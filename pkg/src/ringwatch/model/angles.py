"""Interior joint angles of a 21-landmark pose (numpy and differentiable versions)."""

from __future__ import annotations

import numpy as np

from ..tensorgrad import Tensor, atan2

# (previous, joint, next) landmark triples: MCP/PIP/DIP of each finger
# (for the thumb: CMC/MCP/IP), thumb first.
ANGLE_TRIPLES = np.array([
    (0 if s == 0 else 4 * f + s, 4 * f + s + 1, 4 * f + s + 2) for f in range(5) for s in range(3)
])
_PREV, _JOINT, _NEXT = ANGLE_TRIPLES.T
N_ANGLES = len(ANGLE_TRIPLES)
_TINY = 1e-12


class DegeneratePoseError(ValueError):
    pass


def joint_angles_from_pose(pose: np.ndarray, min_bone: float = 1e-9) -> np.ndarray:
    """(..., 21, 3) -> (..., 15) angles in [0, pi]; a straight joint is pi."""
    pose = np.asarray(pose, dtype=float)
    if pose.shape[-2:] != (21, 3):
        raise ValueError(f"pose must be (..., 21, 3), got {pose.shape}")
    ba = pose[..., _PREV, :] - pose[..., _JOINT, :]
    bc = pose[..., _NEXT, :] - pose[..., _JOINT, :]
    if np.any(np.linalg.norm(ba, axis=-1) < min_bone) or np.any(np.linalg.norm(bc, axis=-1) < min_bone):
        raise DegeneratePoseError("adjacent landmarks coincide")
    cross = np.linalg.norm(np.cross(ba, bc), axis=-1)
    dot = np.sum(ba * bc, axis=-1)
    return np.arctan2(cross, dot)


def joint_angles_tensor(pose: Tensor) -> Tensor:
    """Differentiable version for (..., 21, 3) tensors; a tiny floor keeps sqrt smooth."""
    a = pose[..., _PREV, :]
    b = pose[..., _JOINT, :]
    c = pose[..., _NEXT, :]
    ba = a - b
    bc = c - b
    x1, y1, z1 = ba[..., 0], ba[..., 1], ba[..., 2]
    x2, y2, z2 = bc[..., 0], bc[..., 1], bc[..., 2]
    cx = y1 * z2 - z1 * y2
    cy = z1 * x2 - x1 * z2
    cz = x1 * y2 - y1 * x2
    cross = (cx * cx + cy * cy + cz * cz + _TINY).sqrt()
    dot = x1 * x2 + y1 * y2 + z1 * z2
    return atan2(cross, dot)
