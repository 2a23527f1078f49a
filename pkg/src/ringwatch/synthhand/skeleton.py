"""21-landmark hand skeleton and forward kinematics.

Frame: wrist at the origin, fingers extend along +y, the back of the hand faces
+z, so flexion bends segments toward -z. Landmark order follows the MediaPipe
hand topology (wrist, then four landmarks per finger from thumb to little).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FINGERS = ("thumb", "index", "middle", "ring", "little")
N_LANDMARKS = 21
MAX_FLEX = np.pi / 2
MAX_ABD = np.pi / 6
_RANGE_TOL = 1e-9

# Segment lengths (cm) of an 18.5 cm hand: wrist/metacarpal offset, then three
# distal segments. For the thumb the offset reaches the CMC joint.
TEMPLATE_SEGMENTS = np.array(
    [
        [2.5, 4.2, 3.2, 2.6],
        [8.2, 4.3, 2.5, 2.0],
        [8.0, 4.9, 3.1, 2.5],
        [7.6, 4.5, 3.0, 2.4],
        [7.0, 3.6, 2.1, 2.0],
    ]
)
# Finger ray angle about +z from +y (radians); thumb side positive.
TEMPLATE_SPLAY = np.radians([50.0, 12.0, 0.0, -10.0, -20.0])
# Roll of each finger about its own ray; turns the thumb's flexion plane across the palm.
TEMPLATE_ROLL = np.radians([60.0, 0.0, 0.0, 0.0, 0.0])


class PoseDomainError(ValueError):
    """Joint angle outside its anatomical range."""


def rot_x(theta):
    c, s = np.cos(theta), np.sin(theta)
    z, o = np.zeros_like(c), np.ones_like(c)
    return np.stack([np.stack([o, z, z], -1), np.stack([z, c, -s], -1), np.stack([z, s, c], -1)], -2)


def rot_y(theta):
    c, s = np.cos(theta), np.sin(theta)
    z, o = np.zeros_like(c), np.ones_like(c)
    return np.stack([np.stack([c, z, s], -1), np.stack([z, o, z], -1), np.stack([-s, z, c], -1)], -2)


def rot_z(theta):
    c, s = np.cos(theta), np.sin(theta)
    z, o = np.zeros_like(c), np.ones_like(c)
    return np.stack([np.stack([c, -s, z], -1), np.stack([s, c, z], -1), np.stack([z, z, o], -1)], -2)


@dataclass
class HandSkeleton:
    segment_lengths: np.ndarray = field(default_factory=lambda: TEMPLATE_SEGMENTS.copy())
    splay: np.ndarray = field(default_factory=lambda: TEMPLATE_SPLAY.copy())
    roll: np.ndarray = field(default_factory=lambda: TEMPLATE_ROLL.copy())

    def __post_init__(self):
        self.segment_lengths = np.asarray(self.segment_lengths, dtype=float)
        if self.segment_lengths.shape != (5, 4) or np.any(self.segment_lengths <= 0):
            raise ValueError("segment_lengths must be a positive 5x4 array")
        if not 15.0 <= self.hand_length <= 22.0:
            raise ValueError(f"hand length {self.hand_length:.2f} cm outside [15, 22]")

    @property
    def hand_length(self) -> float:
        """Wrist to middle fingertip with the hand flat (cm)."""
        return float(self.segment_lengths[2].sum())

    @classmethod
    def from_hand_length(cls, hand_length: float) -> "HandSkeleton":
        scale = hand_length / TEMPLATE_SEGMENTS[2].sum()
        return cls(segment_lengths=TEMPLATE_SEGMENTS * scale)


@dataclass
class JointAngles:
    """Per finger: (flex1, flex2, flex3, abduction) in radians.

    For the thumb the flexions are CMC/MCP/IP with CMC abduction; for the other
    fingers MCP/PIP/DIP with MCP abduction.
    """

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(5, 4)
        check_angle_ranges(self.values)

    def flat(self) -> np.ndarray:
        return self.values.reshape(20)

    @classmethod
    def zeros(cls) -> "JointAngles":
        return cls(np.zeros((5, 4)))


def check_angle_ranges(values: np.ndarray) -> None:
    flex = values[..., :3]
    abd = values[..., 3]
    if np.any(flex < -_RANGE_TOL) or np.any(flex > MAX_FLEX + _RANGE_TOL):
        raise PoseDomainError("flexion angle outside [0, pi/2]")
    if np.any(np.abs(abd) > MAX_ABD + _RANGE_TOL):
        raise PoseDomainError("abduction angle outside [-pi/6, pi/6]")


def clip_angles(values: np.ndarray) -> np.ndarray:
    out = np.array(values, dtype=float)
    out[..., :3] = np.clip(out[..., :3], 0.0, MAX_FLEX)
    out[..., 3] = np.clip(out[..., 3], -MAX_ABD, MAX_ABD)
    return out


def kinematic_chain(angles: np.ndarray, skeleton: HandSkeleton) -> tuple[np.ndarray, np.ndarray]:
    """Landmarks and per-segment orientations for angle arrays of shape (..., 5, 4).

    Returns ``pose`` (..., 21, 3) in cm and ``rotations`` (..., 5, 4, 3, 3), the
    world orientation of every segment frame (segment along local +y).
    """
    angles = np.asarray(angles, dtype=float)
    check_angle_ranges(angles)
    lead = angles.shape[:-2]
    pose = np.zeros(lead + (N_LANDMARKS, 3))
    rotations = np.zeros(lead + (5, 4, 3, 3))
    y_axis = np.array([0.0, 1.0, 0.0])
    for f in range(5):
        flex = angles[..., f, :3]
        abd = angles[..., f, 3]
        lengths = skeleton.segment_lengths[f]
        base = rot_z(np.full(lead, skeleton.splay[f])) @ rot_y(np.full(lead, skeleton.roll[f]))
        frames = [base]
        r = base @ rot_z(abd) @ rot_x(-flex[..., 0])
        frames.append(r)
        r = r @ rot_x(-flex[..., 1])
        frames.append(r)
        r = r @ rot_x(-flex[..., 2])
        frames.append(r)
        point = np.zeros(lead + (3,))
        for s in range(4):
            point = point + frames[s] @ (y_axis * lengths[s])
            pose[..., 1 + 4 * f + s, :] = point
            rotations[..., f, s, :, :] = frames[s]
    return pose, rotations


def forward_kinematics(angles: JointAngles | np.ndarray, skeleton: HandSkeleton) -> np.ndarray:
    """21x3 landmark positions (cm) in the wrist-origin frame."""
    values = angles.values if isinstance(angles, JointAngles) else angles
    return kinematic_chain(values, skeleton)[0]


def thumb_distal_rotation(angles: np.ndarray, skeleton: HandSkeleton) -> np.ndarray:
    """Orientation of the thumb's distal segment, where the ring IMU sits."""
    return kinematic_chain(angles, skeleton)[1][..., 0, 3, :, :]
