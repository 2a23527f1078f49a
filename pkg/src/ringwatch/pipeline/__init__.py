"""Raw 100 Hz sessions to windowed 30 Hz model inputs."""

from ..tensorgrad.nn import positional_encoding
from .io import (
    DatasetFormatError,
    load_windows,
    read_dataset,
    read_manifest,
    read_trial_matrix,
    save_windows,
    trial_columns,
    write_dataset,
    write_trial_csv,
)
from .normalize import FORCE_CLIP_MAX, NormalizationSpec, denormalize_force, normalize_force
from .signals import (
    EMG_LAGS,
    ENVELOPE_WINDOW,
    MODEL_HZ,
    SOURCE_HZ,
    CalibrationError,
    CalibrationProfile,
    SignalTooShortError,
    calibrate,
    expand_emg,
    rectify_smooth,
    resample,
    resample_imu,
    resampled_length,
    trailing_rms,
)
from .windows import (
    EMG_DIM,
    IMU_DIM,
    STEP,
    WINDOW,
    DatasetSplit,
    SplitConfigError,
    TrialFeatures,
    WindowedSample,
    WindowSet,
    featurize_sessions,
    featurize_trial,
    louo_splits,
    session_calibration,
    split,
    window,
    window_count,
    windows_from_sessions,
    within_user_split,
)

__all__ = [
    "CalibrationError",
    "CalibrationProfile",
    "DatasetFormatError",
    "DatasetSplit",
    "EMG_DIM",
    "EMG_LAGS",
    "ENVELOPE_WINDOW",
    "FORCE_CLIP_MAX",
    "IMU_DIM",
    "MODEL_HZ",
    "NormalizationSpec",
    "SOURCE_HZ",
    "STEP",
    "SignalTooShortError",
    "SplitConfigError",
    "TrialFeatures",
    "WINDOW",
    "WindowSet",
    "WindowedSample",
    "calibrate",
    "denormalize_force",
    "expand_emg",
    "featurize_sessions",
    "featurize_trial",
    "load_windows",
    "louo_splits",
    "normalize_force",
    "positional_encoding",
    "read_dataset",
    "read_manifest",
    "read_trial_matrix",
    "rectify_smooth",
    "resample",
    "resample_imu",
    "resampled_length",
    "save_windows",
    "session_calibration",
    "split",
    "trailing_rms",
    "trial_columns",
    "window",
    "window_count",
    "windows_from_sessions",
    "within_user_split",
    "write_dataset",
    "write_trial_csv",
]
