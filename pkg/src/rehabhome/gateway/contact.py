"""Foot-contact detection on summed per-frame force.

Dual-threshold hysteresis: enter contact above 20% of the segment maximum,
leave below 10%, minimum contact duration 150 ms.  Used both for stride
counting (edge-case admission) and stance-phase analytics.
"""

from __future__ import annotations

from typing import List, Tuple

import numpy as np

ENTER_FRAC = 0.20
EXIT_FRAC = 0.10
MIN_CONTACT_MS = 150.0


def find_contact_intervals(
    force: np.ndarray,
    rate_hz: float = 200.0,
    enter_frac: float = ENTER_FRAC,
    exit_frac: float = EXIT_FRAC,
    min_contact_ms: float = MIN_CONTACT_MS,
) -> List[Tuple[int, int]]:
    """Contact intervals [start, end) in frame indices on a 1-D force series."""
    force = np.asarray(force, dtype=float)
    if force.size == 0:
        return []
    peak = float(force.max())
    if peak <= 0:
        return []
    enter = enter_frac * peak
    exit_ = exit_frac * peak
    min_frames = max(1, int(round(min_contact_ms * rate_hz / 1000.0)))

    intervals: List[Tuple[int, int]] = []
    in_contact = False
    start = 0
    for i, value in enumerate(force):
        if not in_contact and value > enter:
            in_contact = True
            start = i
        elif in_contact and value < exit_:
            if i - start >= min_frames:
                intervals.append((start, i))
            in_contact = False
    if in_contact and len(force) - start >= min_frames:
        intervals.append((start, len(force)))
    return intervals


def strides_in_matrix(matrix: np.ndarray, rate_hz: float = 200.0) -> int:
    """Stride count for one foot's (frames x channels) pressure matrix."""
    total = np.asarray(matrix, dtype=float).sum(axis=1)
    return len(find_contact_intervals(total, rate_hz=rate_hz))


def count_strides(segment, rate_hz: float = 200.0) -> Tuple[int, int]:
    """(left, right) stride counts for a gait segment; all-zero feet count 0."""
    return (
        strides_in_matrix(segment.left, rate_hz=rate_hz),
        strides_in_matrix(segment.right, rate_hz=rate_hz),
    )
