"""Gaze processing: dispersion-threshold fixations, object mapping, blink confirmation.

Fixation detection is the I-DT style rule: a maximal run of valid samples
whose bounding-box diagonal stays within the dispersion threshold and whose
time span reaches the minimum duration yields one fixation at the centroid.
Invalid samples (eye closure) break runs; short runs of invalid samples are
themselves the blink gesture used for selection confirmation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from ..records import BlinkEvent, GazeSample

DISPERSION_THRESH = 0.05
MIN_FIXATION_MS = 500.0
BLINK_MAX_MS = 400.0
CONFIRM_WINDOW_MS = 800.0


@dataclass
class Fixation:
    x: float
    y: float
    start_ts: float
    duration_ms: float
    n_samples: int

    @property
    def end_ts(self) -> float:
        return self.start_ts + self.duration_ms


@dataclass
class ObjectBox:
    label: str
    bbox: Tuple[float, float, float, float]  # x0, y0, x1, y1 normalized
    scene: str = ""

    def __post_init__(self) -> None:
        x0, y0, x1, y1 = self.bbox
        if not (0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1):
            raise ValueError(f"malformed bbox {self.bbox}")

    @property
    def area(self) -> float:
        x0, y0, x1, y1 = self.bbox
        return (x1 - x0) * (y1 - y0)

    def contains(self, x: float, y: float) -> bool:
        x0, y0, x1, y1 = self.bbox
        return x0 <= x <= x1 and y0 <= y <= y1


def detect_fixation(
    samples: Sequence[GazeSample],
    dispersion_thresh: float = DISPERSION_THRESH,
    min_duration_ms: float = MIN_FIXATION_MS,
) -> List[Fixation]:
    """Greedy left-to-right maximal dispersion-bounded runs of valid samples."""
    fixations: List[Fixation] = []
    n = len(samples)
    i = 0
    while i < n:
        if not samples[i].valid:
            i += 1
            continue
        min_x = max_x = samples[i].x
        min_y = max_y = samples[i].y
        j = i
        while j + 1 < n and samples[j + 1].valid:
            nx, ny = samples[j + 1].x, samples[j + 1].y
            new_min_x, new_max_x = min(min_x, nx), max(max_x, nx)
            new_min_y, new_max_y = min(min_y, ny), max(max_y, ny)
            if math.hypot(new_max_x - new_min_x, new_max_y - new_min_y) > dispersion_thresh:
                break
            min_x, max_x, min_y, max_y = new_min_x, new_max_x, new_min_y, new_max_y
            j += 1
        span = samples[j].timestamp - samples[i].timestamp
        if span >= min_duration_ms:
            run = samples[i : j + 1]
            fixations.append(
                Fixation(
                    x=sum(s.x for s in run) / len(run),
                    y=sum(s.y for s in run) / len(run),
                    start_ts=samples[i].timestamp,
                    duration_ms=span,
                    n_samples=len(run),
                )
            )
            i = j + 1
        else:
            i += 1
    return fixations


def map_fixation_to_object(fix: Fixation, boxes: Sequence[ObjectBox]) -> Optional[ObjectBox]:
    """Box containing the centroid; smallest area wins; None if uncontained."""
    hits = [b for b in boxes if b.contains(fix.x, fix.y)]
    if not hits:
        return None
    return min(hits, key=lambda b: (b.area, b.label, b.bbox))


def blinks_from_gaze(
    samples: Sequence[GazeSample],
    max_blink_ms: float = BLINK_MAX_MS,
    gap_split_ms: float = 150.0,
) -> List[BlinkEvent]:
    """Short runs (>=2 samples) of invalid gaze samples are blinks.

    Runs split on valid samples or on time gaps wider than `gap_split_ms`
    (separate eye closures with no tracking between them).
    """
    blinks: List[BlinkEvent] = []
    run: List[GazeSample] = []

    def close_run() -> None:
        if len(run) >= 2 and run[-1].timestamp - run[0].timestamp <= max_blink_ms:
            blinks.append(BlinkEvent(timestamp=run[0].timestamp))
        run.clear()

    for sample in samples:
        if not sample.valid:
            if run and sample.timestamp - run[-1].timestamp > gap_split_ms:
                close_run()
            run.append(sample)
        elif run:
            close_run()
    close_run()
    return blinks


def confirm_selection(blinks: Sequence[BlinkEvent], window_ms: float = CONFIRM_WINDOW_MS) -> bool:
    """True iff at least two blinks fall within any `window_ms` span."""
    times = sorted(b.timestamp for b in blinks)
    return any(t2 - t1 <= window_ms for t1, t2 in zip(times, times[1:]))
