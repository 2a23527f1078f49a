"""Synthetic hand sessions: kinematics, force profiles, ring/watch IMU and wrist EMG."""

from .gestures import GESTURE_NAMES, GESTURES, MAX_FORCE_N, GestureScript, calibration_scripts, make_script
from .simulate import (
    FINGER_EMG_WEIGHTS,
    FS_HZ,
    GRAVITY,
    SimulatorConfig,
    SyntheticSession,
    Trial,
    UserProfile,
    activation_envelope,
    band_limited_noise,
    draw_user,
    generate_dataset,
    generate_session,
    linear_acceleration,
    muscle_drive,
    simulate_emg,
    simulate_imu,
    simulate_trial,
    synthesize_trial,
)
from .skeleton import (
    FINGERS,
    HandSkeleton,
    JointAngles,
    PoseDomainError,
    forward_kinematics,
    kinematic_chain,
    thumb_distal_rotation,
)

__all__ = [
    "FINGERS",
    "FINGER_EMG_WEIGHTS",
    "FS_HZ",
    "GESTURES",
    "GESTURE_NAMES",
    "GRAVITY",
    "GestureScript",
    "HandSkeleton",
    "JointAngles",
    "MAX_FORCE_N",
    "PoseDomainError",
    "SimulatorConfig",
    "SyntheticSession",
    "Trial",
    "UserProfile",
    "activation_envelope",
    "band_limited_noise",
    "calibration_scripts",
    "draw_user",
    "forward_kinematics",
    "generate_dataset",
    "generate_session",
    "kinematic_chain",
    "linear_acceleration",
    "make_script",
    "muscle_drive",
    "simulate_emg",
    "simulate_imu",
    "simulate_trial",
    "synthesize_trial",
    "thumb_distal_rotation",
]
