"""Voice command parsing against a fixed grammar table.

Grammar: `<verb> [the] <device> [in the <room>] [to <value>]`, case
insensitive.  Verbs map to capability actions per device kind; anything
that fails to resolve returns NoMatch with the offending token (the caller
may re-prompt), never an exception.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

from ..devices.registry import DeviceDescriptor, Registry

# multi-word entries first so the longest match wins
VERBS: List[Tuple[str, str]] = [
    ("turn on", "power_on"),
    ("turn off", "power_off"),
    ("switch on", "power_on"),
    ("switch off", "power_off"),
    ("power on", "power_on"),
    ("power off", "power_off"),
    ("set", "set"),
    ("dim", "dim"),
    ("open", "power_on"),
]

DEVICE_NOUNS: List[Tuple[str, str]] = [
    ("air conditioner", "ac"),
    ("air conditioning", "ac"),
    ("aircon", "ac"),
    ("ac", "ac"),
    ("television", "tv"),
    ("tv", "tv"),
    ("lights", "lamp"),
    ("light", "lamp"),
    ("lamp", "lamp"),
]

POWER_ACTIONS = {"lamp": "toggle_light", "ac": "toggle_ac", "tv": "toggle_tv"}
SET_ACTIONS = {"lamp": ("set_brightness", "level"), "ac": ("set_temperature", "celsius"), "tv": ("set_channel", "channel")}
DEFAULT_DIM_LEVEL = 30


@dataclass
class Intent:
    target_device: int
    action: str
    params: Dict[str, Any]
    source: str = "voice"  # voice | gaze | agent
    issued_ts: float = 0.0
    device_kind: str = ""

    def __post_init__(self) -> None:
        if not self.action:
            raise ValueError("intent action must be nonempty")


@dataclass
class NoMatch:
    token: str
    reason: str = ""


def _normalize(text: str) -> List[str]:
    return re.sub(r"[^a-z0-9 ]+", " ", text.lower()).split()


def _take_phrase(tokens: List[str], table: List[Tuple[str, str]]) -> Optional[Tuple[str, List[str]]]:
    for phrase, value in table:
        words = phrase.split()
        if tokens[: len(words)] == words:
            return value, tokens[len(words) :]
    return None


def parse_voice_command(text: str, registry: Registry, issued_ts: float = 0.0) -> Union[Intent, NoMatch]:
    if not text or not text.strip():
        return NoMatch(token="", reason="empty utterance")
    tokens = _normalize(text)
    if not tokens:
        return NoMatch(token=text.strip()[:20], reason="no usable tokens")

    verb_match = _take_phrase(tokens, VERBS)
    if verb_match is None:
        return NoMatch(token=tokens[0], reason="unknown verb")
    verb, rest = verb_match

    if rest and rest[0] == "the":
        rest = rest[1:]
    noun_match = _take_phrase(rest, DEVICE_NOUNS)
    if noun_match is None:
        return NoMatch(token=rest[0] if rest else "", reason="unknown device")
    kind, rest = noun_match

    room = ""
    if rest[:2] == ["in", "the"] and len(rest) >= 3:
        room = rest[2]
        rest = rest[3:]

    value: Optional[int] = None
    if rest[:1] == ["to"]:
        if len(rest) < 2 or not re.fullmatch(r"\d+", rest[1]):
            return NoMatch(token=rest[1] if len(rest) > 1 else "to", reason="missing numeric value")
        value = int(rest[1])
        rest = rest[2:]
    if rest:
        return NoMatch(token=rest[0], reason="trailing tokens")

    candidates = registry.by_kind(kind)
    if room:
        roomed = [d for d in candidates if d.room.lower() == room]
        candidates = roomed or candidates
    if not candidates:
        return NoMatch(token=kind, reason=f"no registered {kind}")
    device = candidates[0]

    if verb in ("power_on", "power_off"):
        return Intent(device.device_id, POWER_ACTIONS[kind], {"power": "on" if verb == "power_on" else "off"},
                      issued_ts=issued_ts, device_kind=kind)
    if verb == "dim":
        if kind != "lamp":
            return NoMatch(token=kind, reason="dim applies to lights")
        return Intent(device.device_id, "set_brightness", {"level": value if value is not None else DEFAULT_DIM_LEVEL},
                      issued_ts=issued_ts, device_kind=kind)
    if verb == "set":
        if value is None:
            return NoMatch(token=kind, reason="set needs a value")
        action, param_key = SET_ACTIONS[kind]
        return Intent(device.device_id, action, {param_key: value}, issued_ts=issued_ts, device_kind=kind)
    return NoMatch(token=verb, reason="unmapped verb")
