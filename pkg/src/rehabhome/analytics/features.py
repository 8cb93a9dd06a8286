"""Statistical gait descriptors: variability, stance ratios, asymmetry.

CV is computed over per-stride peak summed force (population standard
deviation / mean, averaged over feet).  Stance phase ratio uses the
gateway's hysteresis contact detector; asymmetry is the absolute
difference normalized by the pair mean, so all descriptors are invariant
to uniform pressure scaling.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np

from ..gateway.contact import find_contact_intervals
from ..gateway.segment import GaitSegment
from ..records import Foot


class NoCycleError(ValueError):
    """Raised when a segment holds no complete gait cycle for the requested foot."""


def coefficient_of_variation(series: Sequence[float]) -> float:
    """Population standard deviation divided by mean."""
    values = np.asarray(list(series), dtype=float)
    if values.size == 0:
        raise ValueError("cv of an empty series is undefined")
    mean = float(values.mean())
    if mean == 0:
        raise ValueError("cv is undefined for zero-mean series")
    return float(values.std(ddof=0) / mean)


def asymmetry_index(l: float, r: float) -> float:
    """|l - r| / mean(l, r); 0 for perfect symmetry, bounded by 2."""
    total = l + r
    if total <= 0:
        raise ValueError("asymmetry index undefined for nonpositive pair sum")
    return abs(l - r) / (total / 2.0)


def _foot_matrix(segment: GaitSegment, foot: Foot) -> np.ndarray:
    return segment.left if foot is Foot.LEFT else segment.right


def stance_phase_ratio(segment: GaitSegment, foot: Foot, rate_hz: float = 200.0) -> float:
    """Total contact time over total cycle time across detected complete cycles."""
    total = _foot_matrix(segment, foot).sum(axis=1)
    intervals = find_contact_intervals(total, rate_hz=rate_hz)
    if len(intervals) < 2:
        raise NoCycleError(f"no complete gait cycle for {foot.value} foot")
    contact = 0.0
    cycle = 0.0
    for (s0, e0), (s1, _) in zip(intervals[:-1], intervals[1:]):
        contact += e0 - s0
        cycle += s1 - s0
    return contact / cycle


def stride_peaks(segment: GaitSegment, foot: Foot, rate_hz: float = 200.0) -> List[float]:
    """Peak summed force of each detected contact interval."""
    total = _foot_matrix(segment, foot).sum(axis=1)
    intervals = find_contact_intervals(total, rate_hz=rate_hz)
    return [float(total[s:e].max()) for s, e in intervals]


@dataclass
class GaitFeatures:
    cv: float
    stance_ratio_left: float
    stance_ratio_right: float
    pressure_asym: float
    stance_asym: float
    mean_peak_pressure_left: float
    mean_peak_pressure_right: float
    cadence: float  # strides/s


def extract_features(segment: GaitSegment, rate_hz: float = 200.0) -> GaitFeatures:
    """All descriptors for one accepted segment (needs >=2 strides per foot)."""
    peaks_l = stride_peaks(segment, Foot.LEFT, rate_hz)
    peaks_r = stride_peaks(segment, Foot.RIGHT, rate_hz)
    if len(peaks_l) < 2 or len(peaks_r) < 2:
        raise NoCycleError("feature extraction needs at least two strides per foot")
    cv = 0.5 * (coefficient_of_variation(peaks_l) + coefficient_of_variation(peaks_r))
    ratio_l = stance_phase_ratio(segment, Foot.LEFT, rate_hz)
    ratio_r = stance_phase_ratio(segment, Foot.RIGHT, rate_hz)
    mean_peak_l = float(np.mean(peaks_l))
    mean_peak_r = float(np.mean(peaks_r))
    duration_s = segment.left.shape[0] / rate_hz
    return GaitFeatures(
        cv=cv,
        stance_ratio_left=ratio_l,
        stance_ratio_right=ratio_r,
        pressure_asym=asymmetry_index(mean_peak_l, mean_peak_r),
        stance_asym=asymmetry_index(ratio_l, ratio_r),
        mean_peak_pressure_left=mean_peak_l,
        mean_peak_pressure_right=mean_peak_r,
        cadence=0.5 * (len(peaks_l) + len(peaks_r)) / duration_s,
    )


FEATURE_COLUMNS = [
    "patient",
    "start_ts",
    "cv",
    "stance_ratio_left",
    "stance_ratio_right",
    "pressure_asym",
    "stance_asym",
    "mean_peak_pressure_left",
    "mean_peak_pressure_right",
    "cadence",
    "label",
]


def features_to_csv(rows: Iterable[tuple], path=None) -> str:
    """Write (segment, features) rows to CSV; returns the CSV text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FEATURE_COLUMNS)
    for segment, feats in rows:
        writer.writerow(
            [
                segment.patient_ref,
                segment.start_ts,
                f"{feats.cv:.6f}",
                f"{feats.stance_ratio_left:.6f}",
                f"{feats.stance_ratio_right:.6f}",
                f"{feats.pressure_asym:.6f}",
                f"{feats.stance_asym:.6f}",
                f"{feats.mean_peak_pressure_left:.3f}",
                f"{feats.mean_peak_pressure_right:.3f}",
                f"{feats.cadence:.4f}",
                segment.label.value if segment.label is not None else "",
            ]
        )
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
