"""Model features from synced 30 Hz frames.

The live stream only has point samples of the raw EMG at the frame rate, so
the envelope here is a causal RMS over the last ``EMG_RMS_FRAMES`` frames
(5 frames, 167 ms) instead of the centered 150 ms window used on 100 Hz
recordings. The batch and incremental paths below compute the same numbers.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from ..pipeline import EMG_LAGS, CalibrationProfile, expand_emg, trailing_rms
from .sync import SyncedFrame

EMG_RMS_FRAMES = 5


def imu_row(frame: SyncedFrame) -> np.ndarray:
    return np.concatenate([frame.ring, frame.watch])


def featurize_frames(frames: list[SyncedFrame], calibration: CalibrationProfile,
                     rms_frames: int = EMG_RMS_FRAMES) -> tuple[np.ndarray, np.ndarray]:
    """Whole-sequence features: IMU (T, 24), EMG (T, 6)."""
    imu = np.stack([imu_row(f) for f in frames])
    raw = np.array([f.emg for f in frames])
    env = calibration.normalize(trailing_rms(raw, rms_frames))
    return imu, expand_emg(env, EMG_LAGS)


class OnlineFeaturizer:
    """Incremental twin of ``featurize_frames``: one frame in, one feature row out."""

    def __init__(self, calibration: CalibrationProfile, rms_frames: int = EMG_RMS_FRAMES, lags: int = EMG_LAGS):
        self.calibration = calibration
        self.raw = deque(maxlen=rms_frames)
        self.env = deque(maxlen=lags)
        self.first_env: float | None = None
        self.lags = lags

    def push(self, frame: SyncedFrame) -> tuple[np.ndarray, np.ndarray]:
        self.raw.append(frame.emg)
        window = np.fromiter(self.raw, dtype=float)
        env = float(self.calibration.normalize(np.sqrt(np.mean(window * window))))
        if self.first_env is None:
            self.first_env = env
        self.env.appendleft(env)
        lagged = list(self.env) + [self.first_env] * (self.lags - len(self.env))
        return imu_row(frame), np.array(lagged)
