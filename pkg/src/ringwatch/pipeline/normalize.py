"""Log-domain min-max normalization of fingertip forces."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

FORCE_CLIP_MAX = 1.1


@dataclass(frozen=True)
class NormalizationSpec:
    """Force bounds in the log(1 + f) domain; EMG uses per-user calibration."""

    force_min: float = 0.0
    force_max: float = math.log(26.0)
    clip_max: float = FORCE_CLIP_MAX

    def __post_init__(self):
        if not self.force_max > self.force_min:
            raise ValueError("force_max must exceed force_min")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationSpec":
        return cls(**d)


def normalize_force(force_n, spec: NormalizationSpec = NormalizationSpec()) -> np.ndarray:
    force_n = np.asarray(force_n, dtype=float)
    if np.any(force_n < 0):
        raise ValueError("forces must be non-negative")
    y = (np.log1p(force_n) - spec.force_min) / (spec.force_max - spec.force_min)
    return np.clip(y, 0.0, spec.clip_max)


def denormalize_force(y, spec: NormalizationSpec = NormalizationSpec()) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return np.expm1(y * (spec.force_max - spec.force_min) + spec.force_min)
