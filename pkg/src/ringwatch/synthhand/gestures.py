"""Gesture library: target joint angles and fingertip forces for 20 hand actions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .skeleton import JointAngles, clip_angles

MAX_FORCE_N = 25.0

# finger rows: (flex1, flex2, flex3, abduction); thumb first
_SPREAD = (0.05, 0.0, -0.05, -0.1)


def _hand(thumb, index, middle, ring, little) -> np.ndarray:
    rows = [list(thumb)]
    for finger, spread in zip((index, middle, ring, little), _SPREAD):
        rows.append(list(finger) + [spread] if len(finger) == 3 else list(finger))
    return np.array(rows, dtype=float)


_FIST = (1.4, 1.5, 0.9)

# name -> (angles 5x4, forces in N thumb..little)
GESTURES: dict[str, tuple[np.ndarray, np.ndarray]] = {
    "open_stretch": (_hand((0.1, 0.0, 0.0, 0.35), (0, 0, 0, 0.2), (0, 0, 0, 0.0), (0, 0, 0, -0.2), (0, 0, 0, -0.35)), [0, 0, 0, 0, 0]),
    "fist_clench": (_hand((0.9, 0.8, 0.6, -0.3), _FIST, _FIST, _FIST, _FIST), [12, 10, 12, 10, 8]),
    "thumbs_up": (_hand((0.0, 0.0, 0.0, 0.4), _FIST, _FIST, _FIST, _FIST), [0, 6, 6, 5, 4]),
    "point": (_hand((0.8, 0.6, 0.5, -0.2), (0.05, 0.05, 0.0), _FIST, _FIST, _FIST), [4, 0, 5, 4, 3]),
    "mug_wrap": (_hand((0.6, 0.4, 0.3, 0.1), (0.9, 1.0, 0.6), (0.9, 1.0, 0.6), (0.9, 1.0, 0.6), (0.9, 1.0, 0.6)), [8, 7, 9, 7, 5]),
    "screwdriver_pinch": (_hand((0.7, 0.5, 0.4, -0.1), (0.6, 0.9, 0.5), (1.2, 1.3, 0.8), (1.2, 1.3, 0.8), (1.2, 1.3, 0.8)), [10, 10, 4, 3, 2]),
    "tennis_ball_squeeze": (_hand((0.7, 0.6, 0.7, 0.0), (0.8, 0.9, 0.7), (0.8, 0.9, 0.7), (0.8, 0.9, 0.7), (0.8, 0.9, 0.7)), [18, 15, 17, 14, 10]),
    "thermos_lift": (_hand((0.5, 0.5, 0.4, 0.2), (1.0, 1.1, 0.7), (1.0, 1.1, 0.7), (1.0, 1.1, 0.7), (1.0, 1.1, 0.7)), [12, 11, 13, 11, 7]),
    "tape_hold": (_hand((0.5, 0.3, 0.2, 0.1), (0.7, 0.6, 0.3), (0.6, 0.5, 0.3), (0.4, 0.4, 0.2), (0.3, 0.3, 0.2)), [2, 2, 1.5, 1, 0.5]),
    "key_pinch": (_hand((0.3, 0.2, 0.6, -0.4), (1.0, 1.2, 0.8), (1.0, 1.2, 0.8), (1.0, 1.2, 0.8), (1.0, 1.2, 0.8)), [9, 6, 2, 1, 1]),
    "bottle_grip": (_hand((0.4, 0.2, 0.2, 0.3), (0.7, 0.8, 0.5), (0.7, 0.8, 0.5), (0.7, 0.8, 0.5), (0.7, 0.8, 0.5)), [10, 9, 10, 8, 6]),
    "glass_hold": (_hand((0.3, 0.2, 0.1, 0.35), (0.5, 0.6, 0.4), (0.5, 0.6, 0.4), (0.5, 0.6, 0.4), (0.5, 0.6, 0.4)), [6, 5, 6, 5, 3]),
    "phone_hold": (_hand((0.2, 0.1, 0.3, 0.0), (0.4, 0.9, 0.5), (0.4, 0.9, 0.5), (0.4, 0.9, 0.5), (0.4, 0.9, 0.5)), [3, 3, 4, 4, 3]),
    "pen_tripod": (_hand((0.6, 0.3, 0.5, -0.2), (0.5, 0.7, 0.3), (0.6, 0.9, 0.5), (1.0, 1.2, 0.7), (1.0, 1.2, 0.7)), [5, 5, 4, 0.5, 0.3]),
    "card_lateral_pinch": (_hand((0.2, 0.1, 0.1, -0.5), (0.9, 1.0, 0.6), (1.1, 1.2, 0.7), (1.2, 1.3, 0.8), (1.2, 1.3, 0.8)), [7, 6, 1, 0, 0]),
    "tube_squeeze": (_hand((0.8, 0.7, 0.8, -0.1), (1.1, 1.2, 0.9), (1.1, 1.2, 0.9), (1.1, 1.2, 0.9), (1.1, 1.2, 0.9)), [14, 10, 9, 6, 3]),
    "button_press": (_hand((0.5, 0.4, 0.3, 0.0), (0.4, 0.5, 0.3), _FIST, _FIST, _FIST), [1, 8, 0.5, 0.5, 0.5]),
    "cup_handle": (_hand((0.4, 0.3, 0.7, 0.15), (0.9, 1.2, 0.9), (0.9, 1.1, 0.7), (1.2, 1.3, 0.8), (1.2, 1.3, 0.8)), [6, 7, 5, 2, 1]),
    "spray_trigger": (_hand((0.6, 0.4, 0.2, 0.25), (0.7, 1.0, 0.6), (1.0, 1.1, 0.7), (1.0, 1.1, 0.7), (1.0, 1.1, 0.7)), [5, 14, 6, 5, 4]),
    "ball_tripod_lift": (_hand((0.9, 0.4, 0.3, -0.05), (0.7, 0.8, 0.6), (0.7, 0.8, 0.6), (0.3, 0.3, 0.2), (0.3, 0.3, 0.2)), [8, 6, 6, 1, 1]),
}
GESTURE_NAMES = tuple(GESTURES)

REST_ANGLES = _hand((0.2, 0.1, 0.1, 0.1), (0.15, 0.2, 0.1), (0.15, 0.2, 0.1), (0.15, 0.2, 0.1), (0.15, 0.2, 0.1))
MVC_ANGLES = _hand((0.9, 0.8, 0.6, -0.3), _FIST, _FIST, _FIST, _FIST)

REST_ID = "calib_rest"
MVC_ID = "calib_mvc"


@dataclass
class GestureScript:
    """One scripted action: ramp from rest to a target pose/force, hold, release."""

    gesture_id: str
    duration_s: float
    target_angles: JointAngles
    force_targets: np.ndarray
    onset_s: float = 0.6
    offset_s: float = 0.6
    rest_s: float = 0.5
    tau_s: float = 0.05

    def __post_init__(self):
        self.force_targets = np.asarray(self.force_targets, dtype=float)
        if self.force_targets.shape != (5,):
            raise ValueError("force_targets needs 5 values")
        if np.any(self.force_targets < 0) or np.any(self.force_targets > MAX_FORCE_N):
            raise ValueError(f"force targets must lie in [0, {MAX_FORCE_N}] N")
        if not 2.0 <= self.duration_s <= 12.0:
            raise ValueError(f"duration {self.duration_s} s outside [2, 12]")
        if 2 * self.rest_s + self.onset_s + self.offset_s > self.duration_s:
            raise ValueError("ramps and rest periods exceed the trial duration")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * 100))


def make_script(gesture_id: str, rng: np.random.Generator, duration_range=(3.5, 4.5), ramp_range=(0.4, 0.8),
                angle_jitter: float = 0.05, force_scale_range=(0.6, 1.4), tau_s: float = 0.05) -> GestureScript:
    """Draw one repetition of ``gesture_id`` with per-trial variation."""
    angles, forces = GESTURES[gesture_id]
    angles = clip_angles(angles + rng.normal(0.0, angle_jitter, size=angles.shape))
    forces = np.clip(np.asarray(forces, dtype=float) * rng.uniform(*force_scale_range), 0.0, MAX_FORCE_N)
    duration = float(np.round(rng.uniform(*duration_range), 2))
    return GestureScript(
        gesture_id=gesture_id,
        duration_s=duration,
        target_angles=JointAngles(angles),
        force_targets=forces,
        onset_s=float(rng.uniform(*ramp_range)),
        offset_s=float(rng.uniform(*ramp_range)),
        tau_s=tau_s,
    )


def calibration_scripts(duration_s: float = 3.0) -> tuple[GestureScript, GestureScript]:
    """Rest (relaxed, no force) and maximum-contraction fist scripts."""
    rest = GestureScript(REST_ID, duration_s, JointAngles(REST_ANGLES), np.zeros(5), onset_s=0.3, offset_s=0.3)
    mvc = GestureScript(MVC_ID, duration_s, JointAngles(MVC_ANGLES), np.full(5, MAX_FORCE_N), onset_s=0.3, offset_s=0.3)
    return rest, mvc
