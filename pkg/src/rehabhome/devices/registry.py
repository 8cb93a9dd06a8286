"""Device registry: descriptors, capability schemas, and cached states.

Each appliance kind has a closed action vocabulary with parameter
constraints; the agent safety whitelist is built from the same tables, so
nothing the registry can execute falls outside the whitelist vocabulary.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import yaml

# action -> (ordered param keys, {param: constraint})
# constraints: ("enum", values...) or ("range", lo, hi)
CAPABILITIES: Dict[str, Dict[str, Tuple[List[str], Dict[str, tuple]]]] = {
    "lamp": {
        "toggle_light": (["power"], {"power": ("enum", "on", "off")}),
        "set_brightness": (["level"], {"level": ("range", 1, 100)}),
    },
    "ac": {
        "toggle_ac": (["power"], {"power": ("enum", "on", "off")}),
        "set_temperature": (["celsius"], {"celsius": ("range", 16, 30)}),
        "set_mode": (["mode"], {"mode": ("enum", "cool", "heat", "fan")}),
    },
    "tv": {
        "toggle_tv": (["power"], {"power": ("enum", "on", "off")}),
        "set_channel": (["channel"], {"channel": ("range", 1, 100)}),
        "set_volume": (["volume"], {"volume": ("range", 0, 100)}),
    },
}

# properties reported by get_prop, with the action that sets each
PROPERTIES: Dict[str, Dict[str, str]] = {
    "lamp": {"power": "toggle_light", "brightness": "set_brightness"},
    "ac": {"power": "toggle_ac", "temperature_setpoint": "set_temperature", "mode": "set_mode"},
    "tv": {"power": "toggle_tv", "channel": "set_channel", "volume": "set_volume"},
}

# action param key -> property it lands in
PARAM_TO_PROPERTY: Dict[str, str] = {
    "power": "power",
    "level": "brightness",
    "celsius": "temperature_setpoint",
    "mode": "mode",
    "channel": "channel",
    "volume": "volume",
}

DEFAULT_STATES: Dict[str, Dict[str, Any]] = {
    "lamp": {"power": "off", "brightness": 60},
    "ac": {"power": "off", "temperature_setpoint": 24, "mode": "cool"},
    "tv": {"power": "off", "channel": 1, "volume": 30},
}


def capability_schema(kind: str) -> Dict[str, Tuple[List[str], Dict[str, tuple]]]:
    if kind not in CAPABILITIES:
        raise KeyError(f"unknown device kind {kind!r}")
    return CAPABILITIES[kind]


def validate_param(constraint: tuple, value: Any) -> bool:
    if constraint[0] == "enum":
        return value in constraint[1:]
    if constraint[0] == "range":
        _, lo, hi = constraint
        return isinstance(value, (int, float)) and not isinstance(value, bool) and lo <= value <= hi
    raise ValueError(f"unknown constraint {constraint!r}")


@dataclass
class DeviceDescriptor:
    device_id: int
    token: bytes
    host: str
    port: int
    kind: str
    name: str = ""
    room: str = ""

    def __post_init__(self) -> None:
        if not 0 <= self.device_id <= 0xFFFFFFFF:
            raise ValueError("device_id must fit in 32 bits")
        if len(self.token) != 16:
            raise ValueError("token must be exactly 16 bytes")
        if self.kind not in CAPABILITIES:
            raise ValueError(f"unknown device kind {self.kind!r}")

    @property
    def address(self) -> Tuple[str, int]:
        return (self.host, self.port)

    @property
    def capabilities(self):
        return CAPABILITIES[self.kind]


@dataclass
class DeviceState:
    device_id: int
    properties: Dict[str, Any] = field(default_factory=dict)
    last_seen_ts: float = 0.0
    stamp: int = 0
    online: bool = True

    def touch(self, stamp: int, now: Optional[float] = None) -> None:
        self.last_seen_ts = time.time() if now is None else now
        self.stamp = stamp


class Registry:
    def __init__(self, devices: Optional[List[DeviceDescriptor]] = None):
        self.devices: Dict[int, DeviceDescriptor] = {}
        for d in devices or []:
            self.add(d)

    def add(self, descriptor: DeviceDescriptor) -> None:
        if descriptor.device_id in self.devices:
            raise ValueError(f"duplicate device_id {descriptor.device_id}")
        self.devices[descriptor.device_id] = descriptor

    def by_kind(self, kind: str) -> List[DeviceDescriptor]:
        return [d for d in self.devices.values() if d.kind == kind]

    def first_of_kind(self, kind: str) -> Optional[DeviceDescriptor]:
        matches = self.by_kind(kind)
        return matches[0] if matches else None

    def get(self, device_id: int) -> DeviceDescriptor:
        return self.devices[device_id]

    def __len__(self) -> int:
        return len(self.devices)

    @classmethod
    def load(cls, path) -> "Registry":
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
        if not isinstance(raw, dict) or "devices" not in raw:
            raise ValueError("registry file must contain a top-level 'devices' list")
        devices = []
        for entry in raw["devices"]:
            devices.append(
                DeviceDescriptor(
                    device_id=int(entry["device_id"]),
                    token=bytes.fromhex(entry["token"]),
                    host=str(entry.get("host", "127.0.0.1")),
                    port=int(entry.get("port", 54321)),
                    kind=str(entry["kind"]),
                    name=str(entry.get("name", "")),
                    room=str(entry.get("room", "")),
                )
            )
        return cls(devices)

    def dump(self, path) -> None:
        entries = [
            {
                "device_id": d.device_id,
                "token": d.token.hex(),
                "host": d.host,
                "port": d.port,
                "kind": d.kind,
                "name": d.name,
                "room": d.room,
            }
            for d in self.devices.values()
        ]
        with open(path, "w", encoding="utf-8") as fh:
            yaml.safe_dump({"devices": entries}, fh, sort_keys=False)
