"""Per-device clock correction.

There is no live NTP exchange at desk scale; each source registers a clock
model (offset + linear drift correction) and every device timestamp is mapped
onto the gateway's unified millisecond timeline.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class ClockModel:
    offset_ms: float = 0.0
    drift_ppm: float = 0.0

    def __post_init__(self) -> None:
        if abs(self.drift_ppm) >= 1000:
            raise ValueError(f"|drift| must be < 1000 ppm, got {self.drift_ppm}")


def synchronize(device_ts: float, clock: ClockModel) -> int:
    """Unified timestamp in ms: device_ts + offset + drift * device_ts / 1e6, rounded."""
    unified = device_ts + clock.offset_ms + clock.drift_ppm * device_ts / 1e6
    return int(round(unified))


def correction_for_skew(offset_ms: float, drift_ppm: float) -> ClockModel:
    """Clock model that inverts a simulated device skew (first order in drift)."""
    drift_corr = -drift_ppm / (1.0 + drift_ppm / 1e6)
    offset_corr = -offset_ms * (1.0 + drift_corr / 1e6)
    return ClockModel(offset_ms=offset_corr, drift_ppm=drift_corr)
