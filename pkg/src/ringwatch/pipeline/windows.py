"""Trial featurization, sliding windows and train/test splits."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..synthhand import SyntheticSession, Trial
from .normalize import NormalizationSpec, normalize_force
from .signals import CalibrationProfile, MODEL_HZ, calibrate, expand_emg, rectify_smooth, resample, resample_imu

logger = logging.getLogger(__name__)

WINDOW = 30
STEP = 5
IMU_DIM = 24
EMG_DIM = 6


class SplitConfigError(ValueError):
    pass


@dataclass
class TrialFeatures:
    """One trial at 30 Hz, ready for windowing."""

    user_id: str
    gesture_id: str
    repetition: int
    timestamps_ms: np.ndarray  # (T,)
    imu: np.ndarray  # (T, 24)
    emg: np.ndarray  # (T, 6)
    pose: np.ndarray  # (T, 21, 3) cm
    force: np.ndarray  # (T, 5) normalized

    def __len__(self) -> int:
        return len(self.timestamps_ms)


@dataclass
class WindowedSample:
    imu: np.ndarray
    emg: np.ndarray
    pose_target: np.ndarray
    force_target: np.ndarray
    user_id: str
    gesture_id: str
    t_end: float
    repetition: int = 0

    def __post_init__(self):
        if self.imu.shape[1] != IMU_DIM or self.emg.shape[1] != EMG_DIM:
            raise ValueError(f"window widths must be {IMU_DIM}/{EMG_DIM}, got {self.imu.shape}/{self.emg.shape}")
        if self.imu.shape[0] != self.emg.shape[0]:
            raise ValueError("IMU and EMG windows differ in length")


@dataclass
class WindowSet:
    """Stacked windows with per-window metadata; the batch form of WindowedSample."""

    imu: np.ndarray  # (N, W, 24)
    emg: np.ndarray  # (N, W, 6)
    pose: np.ndarray  # (N, 21, 3)
    force: np.ndarray  # (N, 5)
    user_ids: np.ndarray  # (N,) str
    gesture_ids: np.ndarray  # (N,) str
    repetitions: np.ndarray  # (N,) int
    t_end: np.ndarray  # (N,) ms

    def __len__(self) -> int:
        return len(self.imu)

    def __getitem__(self, i: int) -> WindowedSample:
        return WindowedSample(self.imu[i], self.emg[i], self.pose[i], self.force[i], str(self.user_ids[i]),
                              str(self.gesture_ids[i]), float(self.t_end[i]), int(self.repetitions[i]))

    @property
    def trial_keys(self) -> np.ndarray:
        """One string per window identifying its source trial."""
        return np.array([f"{u}|{g}|{r}" for u, g, r in zip(self.user_ids, self.gesture_ids, self.repetitions)])

    def subset(self, idx) -> "WindowSet":
        idx = np.asarray(idx)
        return WindowSet(self.imu[idx], self.emg[idx], self.pose[idx], self.force[idx], self.user_ids[idx],
                         self.gesture_ids[idx], self.repetitions[idx], self.t_end[idx])

    @classmethod
    def empty(cls, window: int = WINDOW) -> "WindowSet":
        return cls(np.zeros((0, window, IMU_DIM)), np.zeros((0, window, EMG_DIM)), np.zeros((0, 21, 3)),
                   np.zeros((0, 5)), np.array([], dtype=str), np.array([], dtype=str), np.zeros(0, dtype=int),
                   np.zeros(0))

    @classmethod
    def concat(cls, sets: Sequence["WindowSet"]) -> "WindowSet":
        sets = [s for s in sets if len(s)]
        if not sets:
            return cls.empty()
        return cls(*(np.concatenate([getattr(s, f) for s in sets]) for f in
                     ("imu", "emg", "pose", "force", "user_ids", "gesture_ids", "repetitions", "t_end")))

    @classmethod
    def from_samples(cls, samples: Sequence[WindowedSample]) -> "WindowSet":
        return cls(np.stack([s.imu for s in samples]), np.stack([s.emg for s in samples]),
                   np.stack([s.pose_target for s in samples]), np.stack([s.force_target for s in samples]),
                   np.array([s.user_id for s in samples]), np.array([s.gesture_id for s in samples]),
                   np.array([s.repetition for s in samples]), np.array([s.t_end for s in samples]))


def window_count(T: int, size: int = WINDOW, step: int = STEP) -> int:
    return 0 if T < size else (T - size) // step + 1


def featurize_trial(trial: Trial, user_id: str, calibration: CalibrationProfile,
                    norm: NormalizationSpec = NormalizationSpec()) -> TrialFeatures:
    """100 Hz raw trial -> 30 Hz features. The EMG envelope is taken before downsampling."""
    ring = resample_imu(trial.ring_imu)
    watch = resample_imu(trial.watch_imu)
    envelope = resample(rectify_smooth(trial.emg))
    emg = expand_emg(calibration.normalize(envelope))
    pose = resample(trial.pose)
    force = normalize_force(np.maximum(resample(trial.force), 0.0), norm)
    timestamps = np.arange(len(ring)) * (1000.0 / MODEL_HZ)
    return TrialFeatures(user_id, trial.gesture_id, trial.repetition, timestamps,
                         np.concatenate([ring, watch], axis=1), emg, pose, force)


def window(features: TrialFeatures, size: int = WINDOW, step: int = STEP) -> WindowSet:
    """Sliding windows within one trial; targets come from each window's last frame."""
    T = len(features)
    n = window_count(T, size, step)
    if n == 0:
        logger.warning("trial %s/%s rep %d has %d frames (< %d); skipped",
                       features.user_id, features.gesture_id, features.repetition, T, size)
        return WindowSet.empty(size)
    starts = np.arange(n) * step
    idx = starts[:, None] + np.arange(size)[None, :]
    ends = starts + size - 1
    return WindowSet(
        imu=features.imu[idx],
        emg=features.emg[idx],
        pose=features.pose[ends],
        force=features.force[ends],
        user_ids=np.full(n, features.user_id),
        gesture_ids=np.full(n, features.gesture_id),
        repetitions=np.full(n, features.repetition),
        t_end=features.timestamps_ms[ends],
    )


def session_calibration(session: SyntheticSession) -> CalibrationProfile:
    return calibrate(session.rest_trial.emg, session.mvc_trial.emg, session.user.user_id)


def featurize_sessions(sessions: Iterable[SyntheticSession], norm: NormalizationSpec = NormalizationSpec()) -> list[TrialFeatures]:
    out = []
    for session in sessions:
        calib = session_calibration(session)
        out.extend(featurize_trial(t, session.user.user_id, calib, norm) for t in session.trials)
    return out


def windows_from_sessions(sessions: Iterable[SyntheticSession], norm: NormalizationSpec = NormalizationSpec(),
                          size: int = WINDOW, step: int = STEP) -> WindowSet:
    return WindowSet.concat([window(f, size, step) for f in featurize_sessions(sessions, norm)])


@dataclass
class DatasetSplit:
    train: WindowSet
    test: WindowSet
    policy: str
    fold_user: str | None = None
    meta: dict = field(default_factory=dict)


def within_user_split(windows: WindowSet) -> DatasetSplit:
    """Hold out each user's last repetition of every gesture."""
    last = {}
    for u, g, r in zip(windows.user_ids, windows.gesture_ids, windows.repetitions):
        last[(u, g)] = max(last.get((u, g), r), r)
    is_test = np.array([r == last[(u, g)] for u, g, r in zip(windows.user_ids, windows.gesture_ids, windows.repetitions)])
    if not is_test.any() or is_test.all():
        raise SplitConfigError("within-user split needs at least two repetitions per gesture")
    return DatasetSplit(windows.subset(np.flatnonzero(~is_test)), windows.subset(np.flatnonzero(is_test)), "within-user")


def louo_splits(windows: WindowSet) -> list[DatasetSplit]:
    users = sorted(set(windows.user_ids.tolist()))
    if len(users) < 2:
        raise SplitConfigError("leave-one-user-out needs at least two users")
    folds = []
    for user in users:
        held = windows.user_ids == user
        folds.append(DatasetSplit(windows.subset(np.flatnonzero(~held)), windows.subset(np.flatnonzero(held)),
                                  "leave-one-user-out", fold_user=user))
    return folds


def split(windows: WindowSet, policy: str) -> list[DatasetSplit]:
    """``within-user`` gives one split, ``leave-one-user-out`` one per user."""
    if policy in ("within-user", "within_user"):
        return [within_user_split(windows)]
    if policy in ("leave-one-user-out", "louo"):
        return louo_splits(windows)
    raise SplitConfigError(f"unknown split policy {policy!r}")
