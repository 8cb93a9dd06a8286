"""Synthetic patient cohorts and severity-calibrated gait parameters.

Severity classes are derived from the clinical FMA score; per-class gait
parameter ranges are calibrated so that variability (stride CV) and
left/right asymmetry are strictly ordered Severe > Moderate > Mild.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import numpy as np


class ImpairmentLevel(Enum):
    MILD = "mild"
    MODERATE = "moderate"
    SEVERE = "severe"

    @property
    def index(self) -> int:
        return _LEVEL_ORDER.index(self)


_LEVEL_ORDER = [ImpairmentLevel.MILD, ImpairmentLevel.MODERATE, ImpairmentLevel.SEVERE]


def level_from_fma(fma: int) -> ImpairmentLevel:
    """Three-way severity label from an FMA score (mild >= 85, moderate 50..84, severe < 50)."""
    if not isinstance(fma, (int, np.integer)):
        raise TypeError(f"fma score must be an integer, got {type(fma).__name__}")
    if not 0 <= fma <= 100:
        raise ValueError(f"fma score out of range [0, 100]: {fma}")
    if fma >= 85:
        return ImpairmentLevel.MILD
    if fma >= 50:
        return ImpairmentLevel.MODERATE
    return ImpairmentLevel.SEVERE


@dataclass
class PatientProfile:
    id: str
    age: int
    sex: str  # "male" | "female"
    bmi: float
    fma_score: int
    symptoms: str = ""

    def __post_init__(self) -> None:
        if self.age <= 0:
            raise ValueError("age must be positive")
        if self.bmi <= 0:
            raise ValueError("bmi must be positive")
        if not 0 <= self.fma_score <= 100:
            raise ValueError("fma score must be in [0, 100]")
        if self.sex not in ("male", "female"):
            raise ValueError(f"unknown sex: {self.sex}")

    @property
    def level(self) -> ImpairmentLevel:
        return level_from_fma(self.fma_score)


@dataclass
class GaitParams:
    cadence: float  # strides/s per foot
    stance_fraction_left: float
    stance_fraction_right: float
    peak_force_left: float  # nominal peak summed force, arbitrary calibrated units
    peak_force_right: float
    stride_cv_target: float
    noise_sigma: float
    affected_side: str  # "left" | "right" | "none"

    def __post_init__(self) -> None:
        if self.cadence <= 0:
            raise ValueError("cadence must be positive")
        for name in ("stance_fraction_left", "stance_fraction_right"):
            frac = getattr(self, name)
            if not 0.3 <= frac <= 0.9:
                raise ValueError(f"{name} out of range [0.3, 0.9]: {frac}")
        if self.peak_force_left <= 0 or self.peak_force_right <= 0:
            raise ValueError("peak forces must be positive")
        if self.stride_cv_target < 0:
            raise ValueError("stride_cv_target must be >= 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.affected_side not in ("left", "right", "none"):
            raise ValueError(f"unknown affected side: {self.affected_side}")


# Per-class calibration ranges. Chosen so that for any seed the draws are
# strictly ordered by severity (ranges are disjoint) in CV target, stance
# asymmetry, and peak-force asymmetry.
_CALIBRATION = {
    ImpairmentLevel.MILD: dict(
        cadence=(0.95, 1.10),
        stance_base=(0.58, 0.64),
        stance_delta=(0.000, 0.010),
        peak_rel_diff=(0.000, 0.020),
        cv=(0.030, 0.050),
        noise=(0.5, 1.5),
    ),
    ImpairmentLevel.MODERATE: dict(
        cadence=(0.82, 0.95),
        stance_base=(0.62, 0.68),
        stance_delta=(0.050, 0.080),
        peak_rel_diff=(0.120, 0.200),
        cv=(0.080, 0.120),
        noise=(1.0, 2.0),
    ),
    ImpairmentLevel.SEVERE: dict(
        cadence=(0.70, 0.82),
        stance_base=(0.66, 0.72),
        stance_delta=(0.100, 0.160),
        peak_rel_diff=(0.280, 0.400),
        cv=(0.160, 0.240),
        noise=(1.5, 3.0),
    ),
}


def default_gait_params(level: ImpairmentLevel, seed: int) -> GaitParams:
    """Deterministic severity-calibrated gait parameters for (level, seed)."""
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, level.index, 0x6A17])
    cal = _CALIBRATION[level]
    cadence = rng.uniform(*cal["cadence"])
    base = rng.uniform(*cal["stance_base"])
    delta = rng.uniform(*cal["stance_delta"])
    peak_diff = rng.uniform(*cal["peak_rel_diff"])
    cv = rng.uniform(*cal["cv"])
    noise = rng.uniform(*cal["noise"])
    nominal_peak = rng.uniform(900.0, 1100.0)

    if level is ImpairmentLevel.MILD:
        affected = "none"
        side_sign = 1.0 if rng.random() < 0.5 else -1.0
    else:
        affected = "left" if rng.random() < 0.5 else "right"
        side_sign = 1.0 if affected == "left" else -1.0

    # Affected side carries less load and a shorter stance; the unaffected
    # side compensates with a prolonged stance phase.
    stance_left = base - side_sign * delta / 2.0
    stance_right = base + side_sign * delta / 2.0
    peak_left = nominal_peak * (1.0 - side_sign * peak_diff / 2.0)
    peak_right = nominal_peak * (1.0 + side_sign * peak_diff / 2.0)

    return GaitParams(
        cadence=cadence,
        stance_fraction_left=stance_left,
        stance_fraction_right=stance_right,
        peak_force_left=peak_left,
        peak_force_right=peak_right,
        stride_cv_target=cv,
        noise_sigma=noise,
        affected_side=affected,
    )


_SYMPTOM_POOL = {
    ImpairmentLevel.MILD: [
        "minor hemiparesis",
        "mild gait instability",
        "occasional imbalance while walking",
        "slightly asymmetric gait",
    ],
    ImpairmentLevel.MODERATE: [
        "moderate one-sided weakness",
        "gait asymmetry with compensatory mechanisms",
        "difficulty with midline balance",
        "frequent toe dragging while walking",
    ],
    ImpairmentLevel.SEVERE: [
        "severe one-sided hemiplegia",
        "foot drop requiring ankle support",
        "loss of balance with need for assistance",
        "prolonged stance phase on unaffected side",
    ],
}

_FMA_RANGES = {
    ImpairmentLevel.MILD: (85, 95),
    ImpairmentLevel.MODERATE: (50, 84),
    ImpairmentLevel.SEVERE: (25, 49),
}


def make_cohort(n_per_class, seed: int, id_prefix: str = "P") -> List[PatientProfile]:
    """Seeded synthetic cohort; `n_per_class` is an int or a per-level dict
    keyed by {"mild", "moderate", "severe"}."""
    if isinstance(n_per_class, int):
        counts = {level: n_per_class for level in _LEVEL_ORDER}
    else:
        counts = {level: int(n_per_class.get(level.value, 0)) for level in _LEVEL_ORDER}
    if any(c < 1 for c in counts.values()):
        raise ValueError("each class needs at least one patient")
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, 0xC0F0])
    patients: List[PatientProfile] = []
    idx = 1
    for level in _LEVEL_ORDER:
        lo, hi = _FMA_RANGES[level]
        pool = _SYMPTOM_POOL[level]
        for _ in range(counts[level]):
            fma = int(rng.integers(lo, hi + 1))
            patients.append(
                PatientProfile(
                    id=f"{id_prefix}{idx:03d}",
                    age=int(rng.integers(30, 75)),
                    sex="male" if rng.random() < 0.6 else "female",
                    bmi=round(float(rng.uniform(19.0, 30.0)), 1),
                    fma_score=fma,
                    symptoms=pool[int(rng.integers(0, len(pool)))],
                )
            )
            idx += 1
    return patients
