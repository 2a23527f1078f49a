"""Resampling, EMG envelope extraction, lag expansion and per-user EMG calibration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SOURCE_HZ = 100
MODEL_HZ = 30
ENVELOPE_WINDOW = 15  # samples at 100 Hz (150 ms)
EMG_LAGS = 6
MIN_CALIBRATION_SAMPLES = 200  # 2 s at 100 Hz
MIN_MVC_RATIO = 2.0
MVC_PERCENTILE = 95.0


class SignalTooShortError(ValueError):
    pass


class CalibrationError(ValueError):
    pass


def resampled_length(n: int, src_hz: int = SOURCE_HZ, dst_hz: int = MODEL_HZ) -> int:
    return (n - 1) * dst_hz // src_hz + 1


def resample(x: np.ndarray, src_hz: int = SOURCE_HZ, dst_hz: int = MODEL_HZ) -> np.ndarray:
    """Linear interpolation of (T, ...) samples onto the ``dst_hz`` grid starting at t=0."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 4:
        raise SignalTooShortError(f"need at least 4 samples to resample, got {n}")
    m = resampled_length(n, src_hz, dst_hz)
    pos = np.arange(m) * (src_hz / dst_hz)
    lo = np.minimum(np.floor(pos).astype(int), n - 1)
    hi = np.minimum(lo + 1, n - 1)
    frac = (pos - lo).reshape((m,) + (1,) * (x.ndim - 1))
    return x[lo] + (x[hi] - x[lo]) * frac


def orthonormalize(rotations: np.ndarray) -> np.ndarray:
    """Nearest rotation (polar factor) of each 3x3 block."""
    u, _, vt = np.linalg.svd(rotations)
    return u @ vt


def resample_imu(imu: np.ndarray, src_hz: int = SOURCE_HZ, dst_hz: int = MODEL_HZ) -> np.ndarray:
    """Resample (T, 12) accel+rotation blocks; rotations are re-orthonormalized."""
    out = resample(imu, src_hz, dst_hz)
    rot = orthonormalize(out[:, 3:12].reshape(-1, 3, 3))
    out[:, 3:12] = rot.reshape(-1, 9)
    return out


def rectify_smooth(raw: np.ndarray, window: int = ENVELOPE_WINDOW) -> np.ndarray:
    """Centered moving RMS of the rectified signal; windows shrink at the edges."""
    raw = np.asarray(raw, dtype=float)
    if len(raw) < window:
        raise SignalTooShortError(f"need at least {window} samples for the envelope")
    half = window // 2
    sq = np.concatenate([[0.0], np.cumsum(raw * raw)])
    idx = np.arange(len(raw))
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, len(raw))
    mean_sq = (sq[hi] - sq[lo]) / (hi - lo)
    return np.sqrt(np.maximum(mean_sq, 0.0))


def trailing_rms(raw: np.ndarray, window: int) -> np.ndarray:
    """Causal moving RMS (used on the live 30 Hz stream)."""
    raw = np.asarray(raw, dtype=float)
    sq = np.concatenate([[0.0], np.cumsum(raw * raw)])
    idx = np.arange(len(raw))
    lo = np.maximum(idx + 1 - window, 0)
    mean_sq = (sq[idx + 1] - sq[lo]) / (idx + 1 - lo)
    return np.sqrt(np.maximum(mean_sq, 0.0))


def expand_emg(envelope: np.ndarray, lags: int = EMG_LAGS) -> np.ndarray:
    """(T,) -> (T, lags); column j is the envelope delayed by j frames, edge-padded."""
    envelope = np.asarray(envelope, dtype=float)
    T = len(envelope)
    idx = np.maximum(np.arange(T)[:, None] - np.arange(lags)[None, :], 0)
    return envelope[idx]


@dataclass
class CalibrationProfile:
    user_id: str
    emg_rest_level: float
    emg_mvc_level: float

    def __post_init__(self):
        if not self.emg_mvc_level > self.emg_rest_level > 0:
            raise CalibrationError(
                f"need mvc > rest > 0, got rest={self.emg_rest_level:.4g} mvc={self.emg_mvc_level:.4g}"
            )

    def normalize(self, envelope: np.ndarray) -> np.ndarray:
        return (np.asarray(envelope) - self.emg_rest_level) / (self.emg_mvc_level - self.emg_rest_level)

    def to_dict(self) -> dict:
        return {"user_id": self.user_id, "emg_rest_level": self.emg_rest_level, "emg_mvc_level": self.emg_mvc_level}


def calibrate(rest_raw: np.ndarray, mvc_raw: np.ndarray, user_id: str = "") -> CalibrationProfile:
    """Rest level = rectified mean of the rest recording; MVC level = 95th percentile of its envelope."""
    rest_raw = np.asarray(rest_raw, dtype=float)
    mvc_raw = np.asarray(mvc_raw, dtype=float)
    if len(rest_raw) < MIN_CALIBRATION_SAMPLES or len(mvc_raw) < MIN_CALIBRATION_SAMPLES:
        raise CalibrationError("calibration recordings must last at least 2 s")
    rest = float(np.mean(np.abs(rest_raw)))
    mvc = float(np.percentile(rectify_smooth(mvc_raw), MVC_PERCENTILE))
    if rest <= 0 or mvc < MIN_MVC_RATIO * rest:
        raise CalibrationError(
            f"maximum contraction level {mvc:.4g} mV is not clearly above rest {rest:.4g} mV"
        )
    return CalibrationProfile(user_id, rest, mvc)
