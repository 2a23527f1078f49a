"""Synthetic ring/watch sessions with ground-truth pose and fingertip force.

Everything runs at 100 Hz. Units: cm (pose), N (force), m/s^2 (acceleration),
mV (EMG), ms (timestamps).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .gestures import GESTURE_NAMES, MAX_FORCE_N, REST_ANGLES, GestureScript, calibration_scripts, make_script
from .skeleton import HandSkeleton, kinematic_chain, rot_x, rot_y

logger = logging.getLogger(__name__)

FS_HZ = 100.0
GRAVITY = 9.81
# EMG contribution per finger, thumb to little
FINGER_EMG_WEIGHTS = np.array([0.30, 0.25, 0.20, 0.15, 0.10])


@dataclass
class SimulatorConfig:
    """Free parameters of the synthetic world (not claims about any device)."""

    duration_range_s: tuple = (3.5, 4.5)
    ramp_range_s: tuple = (0.4, 0.8)
    angle_jitter_rad: float = 0.05
    force_scale_range: tuple = (0.6, 1.4)
    tau_s: float = 0.05
    calibration_duration_s: float = 3.0
    hand_length_range_cm: tuple = (16.0, 21.0)
    emg_gain_range: tuple = (0.6, 1.8)
    emg_noise_range_mv: tuple = (0.01, 0.03)
    imu_noise_range: tuple = (0.02, 0.06)
    emg_band_hz: tuple = (15.0, 45.0)
    watch_sway_rad: float = 0.02
    watch_sway_hz: float = 0.2


@dataclass
class UserProfile:
    user_id: str
    hand_length: float
    emg_gain: float
    emg_baseline_noise: float
    imu_noise_std: float
    seed: int

    def __post_init__(self):
        if not 0.5 <= self.emg_gain <= 2.0:
            raise ValueError(f"emg_gain {self.emg_gain} outside [0.5, 2.0]")
        if self.emg_baseline_noise <= 0 or self.imu_noise_std <= 0:
            raise ValueError("noise standard deviations must be positive")

    @property
    def skeleton(self) -> HandSkeleton:
        return HandSkeleton.from_hand_length(self.hand_length)


@dataclass
class Trial:
    script: GestureScript
    repetition: int
    timestamps_ms: np.ndarray
    angles: np.ndarray  # (N, 5, 4) rad
    pose: np.ndarray  # (N, 21, 3) cm
    force: np.ndarray  # (N, 5) N
    ring_imu: np.ndarray  # (N, 12): accel xyz, rotation row-major
    watch_imu: np.ndarray  # (N, 12)
    emg: np.ndarray  # (N,) mV

    @property
    def gesture_id(self) -> str:
        return self.script.gesture_id

    def __len__(self) -> int:
        return len(self.timestamps_ms)


@dataclass
class SyntheticSession:
    user: UserProfile
    trials: list[Trial]
    rest_trial: Trial
    mvc_trial: Trial
    config: SimulatorConfig = field(default_factory=SimulatorConfig)


def activation_envelope(script: GestureScript) -> np.ndarray:
    """0 at rest, cubic-eased ramps, 1 during the hold."""
    t = np.arange(script.n_samples) / FS_HZ
    on_start = script.rest_s
    off_end = script.duration_s - script.rest_s
    off_start = off_end - script.offset_s

    def ease(s):
        s = np.clip(s, 0.0, 1.0)
        return s * s * (3.0 - 2.0 * s)

    rise = ease((t - on_start) / script.onset_s)
    fall = 1.0 - ease((t - off_start) / script.offset_s)
    return np.minimum(rise, fall)


def synthesize_trial(script: GestureScript, user: UserProfile | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Angle trajectory (N, 5, 4) and force trajectory (N, 5) at 100 Hz.

    Forces follow first-order activation dynamics with time constant ``tau_s``
    toward ``envelope * force_targets``.
    """
    u = activation_envelope(script)
    target = script.target_angles.values
    angles = REST_ANGLES[None] + u[:, None, None] * (target - REST_ANGLES)[None]
    alpha = 1.0 - np.exp(-1.0 / (FS_HZ * script.tau_s))
    drive = u[:, None] * script.force_targets[None, :]
    # f[n] = f[n-1] + alpha * (drive[n] - f[n-1]), starting from zero
    force = signal.lfilter([alpha], [1.0, alpha - 1.0], drive, axis=0)
    np.clip(force, 0.0, MAX_FORCE_N, out=force)
    return angles, force


def linear_acceleration(positions_m: np.ndarray, fs: float = FS_HZ) -> np.ndarray:
    """Second central difference along axis 0; end samples copy their neighbours."""
    if len(positions_m) < 3:
        raise ValueError("need at least 3 samples for a second difference")
    acc = np.empty_like(positions_m)
    acc[1:-1] = (positions_m[2:] - 2.0 * positions_m[1:-1] + positions_m[:-2]) * fs * fs
    acc[0] = acc[1]
    acc[-1] = acc[-2]
    return acc


def simulate_imu(angles: np.ndarray, skeleton: HandSkeleton, user: UserProfile, rng: np.random.Generator,
                 config: SimulatorConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Ring (thumb distal segment) and watch IMU streams, each (N, 12).

    The accelerometer reports specific force in the sensor frame:
    R^T (a_linear + g z_hat) plus white noise.
    """
    config = config or SimulatorConfig()
    n = len(angles)
    if n < 3:
        raise ValueError("trajectory too short for IMU simulation")
    pose, rotations = kinematic_chain(angles, skeleton)
    ring_rot = rotations[:, 0, 3]
    tip_m = pose[:, 4, :] / 100.0
    gravity = np.array([0.0, 0.0, GRAVITY])
    world = linear_acceleration(tip_m) + gravity
    ring_acc = np.einsum("nji,nj->ni", ring_rot, world) + rng.normal(0.0, user.imu_noise_std, size=(n, 3))

    t = np.arange(n) / FS_HZ
    phase = rng.uniform(0, 2 * np.pi)
    sway = config.watch_sway_rad * np.sin(2 * np.pi * config.watch_sway_hz * t + phase)
    watch_rot = rot_x(sway) @ rot_y(0.6 * sway)
    watch_acc = np.einsum("nji,j->ni", watch_rot, gravity) + rng.normal(0.0, user.imu_noise_std, size=(n, 3))

    ring = np.concatenate([ring_acc, ring_rot.reshape(n, 9)], axis=1)
    watch = np.concatenate([watch_acc, watch_rot.reshape(n, 9)], axis=1)
    return ring, watch


def band_limited_noise(n: int, rng: np.random.Generator, band_hz=(15.0, 45.0), fs: float = FS_HZ) -> np.ndarray:
    """Zero-mean, unit-variance Gaussian noise band-passed to ``band_hz``."""
    pad = 64
    white = rng.normal(size=n + 2 * pad)
    hi = min(band_hz[1], 0.49 * fs)
    sos = signal.butter(4, [band_hz[0], hi], btype="bandpass", fs=fs, output="sos")
    x = signal.sosfiltfilt(sos, white)[pad : pad + n]
    x = x - x.mean()
    return x / x.std()


def muscle_drive(force: np.ndarray) -> np.ndarray:
    """Weighted finger activation, activation = (force / 25 N)^(2/3)."""
    activation = np.clip(force / MAX_FORCE_N, 0.0, None) ** (2.0 / 3.0)
    return activation @ FINGER_EMG_WEIGHTS


def simulate_emg(force: np.ndarray, user: UserProfile, rng: np.random.Generator,
                 config: SimulatorConfig | None = None) -> np.ndarray:
    """Raw single-channel EMG (mV): amplitude-modulated band noise plus baseline noise."""
    config = config or SimulatorConfig()
    force = np.asarray(force, dtype=float)
    if np.any(force < 0):
        raise ValueError("forces must be non-negative")
    n = len(force)
    carrier = band_limited_noise(n, rng, config.emg_band_hz)
    baseline = rng.normal(0.0, user.emg_baseline_noise, size=n)
    return user.emg_gain * muscle_drive(force) * carrier + baseline


def simulate_trial(script: GestureScript, user: UserProfile, rng: np.random.Generator, repetition: int = 0,
                   config: SimulatorConfig | None = None) -> Trial:
    config = config or SimulatorConfig()
    skeleton = user.skeleton
    angles, force = synthesize_trial(script, user)
    pose = kinematic_chain(angles, skeleton)[0]
    ring, watch = simulate_imu(angles, skeleton, user, rng, config)
    emg = simulate_emg(force, user, rng, config)
    timestamps = np.arange(len(angles), dtype=np.int64) * 10
    return Trial(script, repetition, timestamps, angles, pose, force, ring, watch, emg)


def draw_user(user_id: str, seed: int, config: SimulatorConfig | None = None) -> UserProfile:
    config = config or SimulatorConfig()
    rng = np.random.default_rng(seed)
    return UserProfile(
        user_id=user_id,
        hand_length=float(rng.uniform(*config.hand_length_range_cm)),
        emg_gain=float(rng.uniform(*config.emg_gain_range)),
        emg_baseline_noise=float(rng.uniform(*config.emg_noise_range_mv)),
        imu_noise_std=float(rng.uniform(*config.imu_noise_range)),
        seed=seed,
    )


def generate_session(user: UserProfile, trials_per_gesture: int, gestures=GESTURE_NAMES,
                     config: SimulatorConfig | None = None) -> SyntheticSession:
    """All repetitions of ``gestures`` for one user plus rest/MVC calibration trials."""
    config = config or SimulatorConfig()
    rng = np.random.default_rng(user.seed + 1)
    rest_script, mvc_script = calibration_scripts(config.calibration_duration_s)
    rest = simulate_trial(rest_script, user, rng, 0, config)
    mvc = simulate_trial(mvc_script, user, rng, 0, config)
    trials = []
    for rep in range(trials_per_gesture):
        for gesture in gestures:
            script = make_script(gesture, rng, config.duration_range_s, config.ramp_range_s, config.angle_jitter_rad,
                                 config.force_scale_range, config.tau_s)
            trials.append(simulate_trial(script, user, rng, rep, config))
    return SyntheticSession(user, trials, rest, mvc, config)


def user_seeds(seed: int, n_users: int) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(n_users)
    return [int(c.generate_state(1, dtype=np.uint32)[0]) for c in children]


def generate_dataset(n_users: int, trials_per_gesture: int, seed: int, gestures=GESTURE_NAMES,
                     config: SimulatorConfig | None = None) -> list[SyntheticSession]:
    """Deterministic sessions for ``n_users`` users; ``len(gestures) * trials_per_gesture`` trials each."""
    if n_users < 2:
        raise ValueError("need at least two users")
    config = config or SimulatorConfig()
    sessions = []
    for i, user_seed in enumerate(user_seeds(seed, n_users)):
        user = draw_user(f"u{i:02d}", user_seed, config)
        sessions.append(generate_session(user, trials_per_gesture, gestures, config))
        logger.debug("generated user %s (%d trials)", user.user_id, len(sessions[-1].trials))
    return sessions
