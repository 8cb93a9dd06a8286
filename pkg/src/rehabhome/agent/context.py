"""Six-minute, 1-minute-resolution context windows over the fused timeline.

Each minute carries arithmetic means of the physiological and ambient
signals plus the dominant activity state (most occupancy, approximated by
the 1 Hz perception heartbeats).  Minutes without samples are explicit
missing markers, never interpolated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from ..records import ActivityState, AmbientSample, Modality, PerceptionEvent, PhysioSample

WINDOW_MINUTES = 6
MINUTE_MS = 60_000.0


@dataclass
class MinuteSummary:
    start_ts: float
    hr_mean: Optional[float] = None
    hrv_mean: Optional[float] = None
    temp_mean: Optional[float] = None
    light_mean: Optional[float] = None
    activity: Optional[str] = None
    missing: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "start_ts": self.start_ts,
            "hr_mean": self.hr_mean,
            "hrv_mean": self.hrv_mean,
            "temp_mean": self.temp_mean,
            "light_mean": self.light_mean,
            "activity": self.activity,
            "missing": self.missing,
        }


@dataclass
class ContextWindow:
    minutes: List[MinuteSummary]  # exactly WINDOW_MINUTES entries
    now_ts: float
    patient_ref: str
    clock_s: Optional[float] = None  # local time-of-day seconds at now_ts
    all_missing: bool = False

    def __post_init__(self) -> None:
        if len(self.minutes) != WINDOW_MINUTES:
            raise ValueError(f"context window must hold exactly {WINDOW_MINUTES} minutes")

    @property
    def latest(self) -> MinuteSummary:
        return self.minutes[-1]


def _mean(values: List[float]) -> Optional[float]:
    return sum(values) / len(values) if values else None


def build_context(records: Sequence, now_ts: float, patient_ref: str = "") -> ContextWindow:
    """Aggregate timeline records into the agent's 6-minute window ending at now_ts.

    `records` is any sequence with (ts_ms, modality, payload) attributes,
    e.g. gateway TimelineRecord objects.
    """
    window_start = now_ts - WINDOW_MINUTES * MINUTE_MS
    hr: List[List[float]] = [[] for _ in range(WINDOW_MINUTES)]
    hrv: List[List[float]] = [[] for _ in range(WINDOW_MINUTES)]
    temp: List[List[float]] = [[] for _ in range(WINDOW_MINUTES)]
    light: List[List[float]] = [[] for _ in range(WINDOW_MINUTES)]
    activity_seconds: List[Dict[str, int]] = [dict() for _ in range(WINDOW_MINUTES)]
    clock_s: Optional[float] = None
    clock_ts: Optional[float] = None

    for record in records:
        ts = record.ts_ms
        payload = record.payload
        if isinstance(payload, AmbientSample) and ts <= now_ts and (clock_ts is None or ts > clock_ts):
            clock_ts = ts
            clock_s = payload.time_of_day
        if not (window_start <= ts < now_ts):
            continue
        slot = int((ts - window_start) // MINUTE_MS)
        if not 0 <= slot < WINDOW_MINUTES:
            continue
        if isinstance(payload, PhysioSample):
            hr[slot].append(payload.heart_rate)
            hrv[slot].append(payload.hrv)
            temp[slot].append(payload.skin_temp)
        elif isinstance(payload, AmbientSample):
            light[slot].append(payload.light_level)
        elif isinstance(payload, PerceptionEvent):
            counts = activity_seconds[slot]
            counts[payload.state.value] = counts.get(payload.state.value, 0) + 1

    minutes: List[MinuteSummary] = []
    for i in range(WINDOW_MINUTES):
        dominant = None
        if activity_seconds[i]:
            dominant = max(sorted(activity_seconds[i]), key=lambda s: activity_seconds[i][s])
        summary = MinuteSummary(
            start_ts=window_start + i * MINUTE_MS,
            hr_mean=_mean(hr[i]),
            hrv_mean=_mean(hrv[i]),
            temp_mean=_mean(temp[i]),
            light_mean=_mean(light[i]),
            activity=dominant,
        )
        summary.missing = summary.hr_mean is None and summary.light_mean is None and dominant is None
        minutes.append(summary)

    if clock_s is not None and clock_ts is not None:
        clock_s = (clock_s + (now_ts - clock_ts) / 1000.0) % 86400.0
    window = ContextWindow(minutes=minutes, now_ts=now_ts, patient_ref=patient_ref, clock_s=clock_s)
    window.all_missing = all(m.missing for m in minutes)
    return window
