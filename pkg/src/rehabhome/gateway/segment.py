"""Walking-bout detection and 5-second gait segmentation.

A bout starts when summed force stays above the contact threshold for at
least 0.5 s and ends after 1 s of quiescence (or a 1 s hole in the stream).
Bouts are cut into consecutive non-overlapping 5 s windows of 1000 paired
left/right rows; the trailing partial window is discarded.  Rows are paired
by unified timestamp (nearest within 2.5 ms); windows with more than 50 ms
of unpairable data are dropped and counted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..records import PRESSURE_CHANNELS
from ..sim.cohort import ImpairmentLevel
from .contact import count_strides

SEGMENT_FRAMES = 1000
SEGMENT_MS = 5000.0
PAIRING_TOLERANCE_MS = 2.5
MAX_HOLE_MS = 50.0
BOUT_START_SUSTAIN_MS = 500.0
BOUT_QUIET_MS = 1000.0


@dataclass
class SegmentFlags:
    assisted: bool = False
    speed_change: bool = False


@dataclass
class GaitSegment:
    patient_ref: str
    start_ts: int
    left: np.ndarray  # (1000, 48)
    right: np.ndarray  # (1000, 48)
    label: Optional[ImpairmentLevel] = None
    flags: SegmentFlags = field(default_factory=SegmentFlags)

    def validate(self) -> None:
        for name, mat in (("left", self.left), ("right", self.right)):
            if mat.shape != (SEGMENT_FRAMES, PRESSURE_CHANNELS):
                raise ValueError(f"{name} matrix must be {SEGMENT_FRAMES}x{PRESSURE_CHANNELS}, got {mat.shape}")
            if np.any(mat < 0):
                raise ValueError(f"{name} matrix contains negative values")


class RejectReason(Enum):
    SHORT_WALK = "short_walk"
    ASSISTED = "assisted"


@dataclass
class FilterDecision:
    accepted: bool
    reason: Optional[RejectReason] = None


def edge_case_filter(segment: GaitSegment, min_strides: int = 3, rate_hz: float = 200.0) -> FilterDecision:
    """Admission rule: reject short walks (<3 strides on either foot) and
    assisted walks; speed-change segments are retained."""
    left, right = count_strides(segment, rate_hz=rate_hz)
    if min(left, right) < min_strides:
        return FilterDecision(accepted=False, reason=RejectReason.SHORT_WALK)
    if segment.flags.assisted:
        return FilterDecision(accepted=False, reason=RejectReason.ASSISTED)
    return FilterDecision(accepted=True)


@dataclass
class PairedPressure:
    """Time-aligned left/right channel rows on the unified clock."""

    ts_ms: np.ndarray  # (n,)
    left: np.ndarray  # (n, 48)
    right: np.ndarray  # (n, 48)

    def __len__(self) -> int:
        return len(self.ts_ms)


def pair_pressure_streams(
    left: Sequence[Tuple[int, np.ndarray]],
    right: Sequence[Tuple[int, np.ndarray]],
    tolerance_ms: float = PAIRING_TOLERANCE_MS,
) -> PairedPressure:
    """Pair (ts, channels) rows from two sorted per-foot streams.

    Left is the reference clock; each left row is paired with the nearest
    right row within the tolerance, otherwise skipped (a hole).
    """
    if not left or not right:
        return PairedPressure(np.zeros(0), np.zeros((0, PRESSURE_CHANNELS)), np.zeros((0, PRESSURE_CHANNELS)))
    right_ts = np.array([ts for ts, _ in right], dtype=float)
    ts_out: List[int] = []
    l_rows: List[np.ndarray] = []
    r_rows: List[np.ndarray] = []
    j = 0
    for ts, l_vals in left:
        while j + 1 < len(right_ts) and abs(right_ts[j + 1] - ts) <= abs(right_ts[j] - ts):
            j += 1
        if abs(right_ts[j] - ts) <= tolerance_ms:
            ts_out.append(int(ts))
            l_rows.append(l_vals)
            r_rows.append(right[j][1])
    if not ts_out:
        return PairedPressure(np.zeros(0), np.zeros((0, PRESSURE_CHANNELS)), np.zeros((0, PRESSURE_CHANNELS)))
    return PairedPressure(np.asarray(ts_out, dtype=float), np.vstack(l_rows), np.vstack(r_rows))


def detect_bouts(paired: PairedPressure, rate_hz: float = 200.0, threshold_frac: float = 0.05) -> List[Tuple[int, int]]:
    """Walking bouts as [start, end) index ranges into the paired stream.

    The stream is split at holes longer than the quiescence window; within
    each chunk a bout opens once activity is sustained for 0.5 s and closes
    after 1 s of quiet.
    """
    n = len(paired)
    if n == 0:
        return []
    total = paired.left.sum(axis=1) + paired.right.sum(axis=1)
    peak = float(total.max())
    if peak <= 0:
        return []
    active = total > threshold_frac * peak
    ts = paired.ts_ms

    chunk_starts = [0] + [i for i in range(1, n) if ts[i] - ts[i - 1] > BOUT_QUIET_MS]
    chunk_bounds = list(zip(chunk_starts, chunk_starts[1:] + [n]))

    bouts: List[Tuple[int, int]] = []
    eps = 1e-9
    for c0, c1 in chunk_bounds:
        bout_start = run_start = quiet_start = last_active = None
        for i in range(c0, c1):
            if active[i]:
                last_active = i
                quiet_start = None
                if run_start is None:
                    run_start = i
                if bout_start is None and ts[i] - ts[run_start] >= BOUT_START_SUSTAIN_MS - eps:
                    bout_start = run_start
            else:
                run_start = None
                if quiet_start is None:
                    quiet_start = i
                if bout_start is not None and ts[i] - ts[quiet_start] >= BOUT_QUIET_MS - eps:
                    bouts.append((bout_start, last_active + 1))
                    bout_start = None
        if bout_start is not None:
            bouts.append((bout_start, last_active + 1))
    return bouts


def segment_walks(
    paired: PairedPressure,
    bouts: Sequence[Tuple[int, int]],
    patient_ref: str = "",
    label: Optional[ImpairmentLevel] = None,
    walk_meta: Optional[Sequence[Tuple[float, SegmentFlags]]] = None,
    rate_hz: float = 200.0,
    counters: Optional[Dict[str, int]] = None,
) -> List[GaitSegment]:
    """Cut bouts into consecutive 5 s GaitSegments.

    `walk_meta` maps bout starts to flags: each bout inherits the flags of
    the latest walk annotation at or before its start timestamp.
    """
    step_ms = 1000.0 / rate_hz
    segments: List[GaitSegment] = []
    counters = counters if counters is not None else {}
    counters.setdefault("segments_dropped_gap", 0)

    for b0, b1 in bouts:
        ts = paired.ts_ms[b0:b1]
        if len(ts) == 0:
            continue
        flags = SegmentFlags()
        if walk_meta:
            for meta_ts, meta_flags in sorted(walk_meta, key=lambda m: m[0]):
                if meta_ts <= ts[0] + 1000.0:
                    flags = meta_flags
        bout_start = ts[0]
        n_windows = int((ts[-1] + step_ms - bout_start) // SEGMENT_MS)
        for k in range(n_windows):
            w0 = bout_start + k * SEGMENT_MS
            grid_l = np.full((SEGMENT_FRAMES, PRESSURE_CHANNELS), np.nan)
            grid_r = np.full((SEGMENT_FRAMES, PRESSURE_CHANNELS), np.nan)
            mask = (paired.ts_ms >= w0) & (paired.ts_ms < w0 + SEGMENT_MS)
            idx = np.nonzero(mask)[0]
            slots = np.round((paired.ts_ms[idx] - w0) / step_ms).astype(int)
            valid = (slots >= 0) & (slots < SEGMENT_FRAMES)
            grid_l[slots[valid]] = paired.left[idx[valid]]
            grid_r[slots[valid]] = paired.right[idx[valid]]
            missing = np.isnan(grid_l[:, 0])
            n_missing = int(missing.sum())
            if n_missing > MAX_HOLE_MS / step_ms:
                counters["segments_dropped_gap"] += 1
                continue
            if n_missing:
                _fill_holes(grid_l)
                _fill_holes(grid_r)
            segment = GaitSegment(
                patient_ref=patient_ref,
                start_ts=int(round(w0)),
                left=grid_l,
                right=grid_r,
                label=label,
                flags=flags,
            )
            segment.validate()
            segments.append(segment)
    return segments


def _fill_holes(grid: np.ndarray) -> None:
    """Forward-fill missing rows (backfill a missing head) in place."""
    missing = np.isnan(grid[:, 0])
    last_good = None
    for i in range(len(grid)):
        if not missing[i]:
            last_good = i
        elif last_good is not None:
            grid[i] = grid[last_good]
    first_good = np.nonzero(~missing)[0]
    if len(first_good) and missing[0]:
        grid[: first_good[0]] = grid[first_good[0]]
