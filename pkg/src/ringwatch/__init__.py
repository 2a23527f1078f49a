"""Ring/watch IMU + EMG hand pose and fingertip force estimation."""

__version__ = "0.1.0"
