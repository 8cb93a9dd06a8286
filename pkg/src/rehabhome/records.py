"""Sensor record types shared by the simulator, gateway, and downstream consumers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np

PRESSURE_ROWS = 4
PRESSURE_COLS = 12
PRESSURE_CHANNELS = PRESSURE_ROWS * PRESSURE_COLS


class Foot(str, Enum):
    LEFT = "left"
    RIGHT = "right"


class Modality(str, Enum):
    PRESSURE = "pressure"
    PHYSIO = "physio"
    AMBIENT = "ambient"
    GAZE = "gaze"
    VOICE = "voice"
    PERCEPTION = "perception"


class ActivityState(str, Enum):
    WALKING = "walking"
    SITTING = "sitting"
    FALLING = "falling"
    IDLE = "idle"


@dataclass
class PressureFrame:
    """One 4x12 pressure sample for a single foot, timestamped in ms."""

    timestamp: float
    foot: Foot
    values: np.ndarray  # shape (4, 12), nonnegative

    def validate(self) -> None:
        if self.values.shape != (PRESSURE_ROWS, PRESSURE_COLS):
            raise ValueError(f"pressure grid must be 4x12, got {self.values.shape}")
        if np.any(self.values < 0):
            raise ValueError("pressure values must be nonnegative")

    def channels(self) -> np.ndarray:
        """Row-major flattening (heel row first) to the 48-channel vector."""
        return self.values.reshape(PRESSURE_CHANNELS)


@dataclass
class PhysioSample:
    timestamp: float
    heart_rate: float  # bpm, plausible range [30, 220]
    hrv: float  # ms, RMSSD-style scalar, >= 0
    skin_temp: float  # degrees C, plausible range [30, 42]

    def validate(self) -> None:
        if not 30.0 <= self.heart_rate <= 220.0:
            raise ValueError(f"heart rate out of range: {self.heart_rate}")
        if self.hrv < 0:
            raise ValueError("hrv must be >= 0")
        if not 30.0 <= self.skin_temp <= 42.0:
            raise ValueError(f"skin temp out of range: {self.skin_temp}")


@dataclass
class AmbientSample:
    timestamp: float
    light_level: float  # lux, >= 0
    time_of_day: float  # local wall-clock seconds since midnight

    def validate(self) -> None:
        if self.light_level < 0:
            raise ValueError("light level must be >= 0")


@dataclass
class GazeSample:
    timestamp: float
    x: float
    y: float
    valid: bool = True

    def validate(self) -> None:
        if self.valid and not (0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0):
            raise ValueError(f"valid gaze sample out of range: ({self.x}, {self.y})")


@dataclass
class VoiceUtterance:
    timestamp: float
    text: str


@dataclass
class BlinkEvent:
    timestamp: float


@dataclass
class PerceptionEvent:
    """Activity-state change or scene event produced by the (simulated) perception stack."""

    timestamp: float
    state: ActivityState
    detail: Dict[str, Any] = field(default_factory=dict)


PAYLOAD_TYPES = {
    Modality.PRESSURE: PressureFrame,
    Modality.PHYSIO: PhysioSample,
    Modality.AMBIENT: AmbientSample,
    Modality.GAZE: GazeSample,
    Modality.VOICE: VoiceUtterance,
    Modality.PERCEPTION: PerceptionEvent,
}


@dataclass
class SensorPacket:
    source_id: str
    modality: Modality
    device_timestamp: float  # ms on the device clock
    payload: Any

    def well_formed(self) -> Optional[str]:
        """Return a rejection reason, or None if the packet is valid."""
        expected = PAYLOAD_TYPES[self.modality]
        if not isinstance(self.payload, expected):
            return f"payload type {type(self.payload).__name__} does not match modality {self.modality.value}"
        if not math.isfinite(self.device_timestamp):
            return "non-finite device timestamp"
        validate = getattr(self.payload, "validate", None)
        if validate is not None:
            try:
                validate()
            except ValueError as exc:
                return str(exc)
        return None


def payload_to_dict(packet: SensorPacket) -> Dict[str, Any]:
    """JSON-serializable view of a packet payload (pressure grids as nested lists)."""
    p = packet.payload
    if isinstance(p, PressureFrame):
        return {"foot": p.foot.value, "values": p.values.tolist()}
    if isinstance(p, PhysioSample):
        return {"heart_rate": p.heart_rate, "hrv": p.hrv, "skin_temp": p.skin_temp}
    if isinstance(p, AmbientSample):
        return {"light_level": p.light_level, "time_of_day": p.time_of_day}
    if isinstance(p, GazeSample):
        return {"x": p.x, "y": p.y, "valid": p.valid}
    if isinstance(p, VoiceUtterance):
        return {"text": p.text}
    if isinstance(p, PerceptionEvent):
        return {"state": p.state.value, "detail": p.detail}
    raise TypeError(f"unknown payload type {type(p).__name__}")
