"""Scenario script parsing.

A scenario is one YAML document with top-level keys `seed`, `patient`, and
`events[]`; each event carries `t_s` and `kind` plus kind-specific fields.
Optional top-level keys: `start_clock` ("HH:MM" local time, default 12:00),
`duration_s`, `baseline` (hr/hrv/temp/light), and `scene` (labeled boxes for
gaze targeting).  Parse errors carry the 1-based line of the offending node.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import yaml
from yaml.constructor import SafeConstructor


class ScenarioParseError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


@dataclass
class SceneObject:
    label: str
    bbox: Tuple[float, float, float, float]  # x0, y0, x1, y1 normalized


@dataclass
class ScenarioEvent:
    t_s: float
    kind: str
    fields: Dict[str, Any] = field(default_factory=dict)
    line: Optional[int] = None

    def get(self, key, default=None):
        return self.fields.get(key, default)


@dataclass
class ScenarioScript:
    seed: int
    patient: str
    events: List[ScenarioEvent]
    start_clock_s: float = 12 * 3600.0
    duration_s: Optional[float] = None
    baseline: Dict[str, float] = field(default_factory=dict)
    scene: List[SceneObject] = field(default_factory=list)

    def __post_init__(self) -> None:
        for key, value in _DEFAULT_BASELINE.items():
            self.baseline.setdefault(key, value)
        if not self.scene:
            self.scene = list(DEFAULT_SCENE)

    def end_time_s(self) -> float:
        """Explicit duration if given, else last event end plus a short tail."""
        if self.duration_s is not None:
            return self.duration_s
        end = 0.0
        for ev in self.events:
            end = max(end, ev.t_s + float(ev.get("duration_s", 0.0) or 0.0))
            if ev.kind == "gaze":
                end = max(end, ev.t_s + float(ev.get("dwell_ms", 0.0)) / 1000.0 + 1.0)
            if ev.kind == "blink":
                end = max(end, ev.t_s + ev.get("count", 0) * ev.get("spacing_ms", 0.0) / 1000.0 + 1.0)
        return end + 5.0


# kind -> (required fields, optional fields with defaults)
EVENT_SCHEMA: Dict[str, Tuple[Dict[str, type], Dict[str, Any]]] = {
    "start_walk": ({"duration_s": float}, {"assisted": False, "speed_profile": "steady"}),
    "sit": ({}, {}),
    "fall": ({}, {}),
    "voice": ({"text": str}, {}),
    "gaze": ({"target": str, "dwell_ms": float}, {}),
    "blink": ({"count": int, "spacing_ms": float}, {}),
    "ambient_ramp": ({"light_from": float, "light_to": float, "duration_s": float}, {}),
    "physio_ramp": (
        {"duration_s": float},
        {"hr_from": None, "hr_to": None, "hrv_from": None, "hrv_to": None, "temp_from": None, "temp_to": None},
    ),
}

_DEFAULT_BASELINE = {"hr": 70.0, "hrv": 55.0, "temp": 36.6, "light": 300.0}

DEFAULT_SCENE = [
    SceneObject("lamp", (0.05, 0.25, 0.20, 0.55)),
    SceneObject("tv", (0.35, 0.30, 0.65, 0.60)),
    SceneObject("air_conditioner", (0.72, 0.08, 0.95, 0.28)),
]


def _construct(node):
    ctor = SafeConstructor()
    return ctor.construct_object(node, deep=True)


def _line(node) -> int:
    return node.start_mark.line + 1


def _as_number(value, name: str, line: int) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioParseError(f"field {name!r} must be a number, got {value!r}", line)
    return float(value)


def parse_scenario(text: str) -> ScenarioScript:
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ScenarioParseError(f"invalid YAML: {exc}", mark.line + 1 if mark else None)
    if root is None or not isinstance(root, yaml.MappingNode):
        raise ScenarioParseError("scenario must be a YAML mapping", 1)

    top: Dict[str, Tuple[Any, int]] = {}
    for key_node, value_node in root.value:
        key = _construct(key_node)
        top[key] = (_construct(value_node), _line(value_node))

    known_top = {"seed", "patient", "events", "start_clock", "duration_s", "baseline", "scene"}
    for key in top:
        if key not in known_top:
            raise ScenarioParseError(f"unknown top-level key {key!r}", top[key][1])
    for required in ("seed", "patient", "events"):
        if required not in top:
            raise ScenarioParseError(f"missing top-level key {required!r}", 1)

    seed_value, seed_line = top["seed"]
    if isinstance(seed_value, bool) or not isinstance(seed_value, int):
        raise ScenarioParseError(f"seed must be an integer, got {seed_value!r}", seed_line)
    patient_value, patient_line = top["patient"]
    if not isinstance(patient_value, str) or not patient_value:
        raise ScenarioParseError("patient must be a nonempty string", patient_line)

    start_clock_s = 12 * 3600.0
    if "start_clock" in top:
        raw, line = top["start_clock"]
        try:
            hh, mm = str(raw).split(":")
            start_clock_s = int(hh) * 3600.0 + int(mm) * 60.0
        except Exception:
            raise ScenarioParseError(f"start_clock must be 'HH:MM', got {raw!r}", line)
        if not 0 <= start_clock_s < 24 * 3600:
            raise ScenarioParseError(f"start_clock out of range: {raw!r}", line)

    duration_s = None
    if "duration_s" in top:
        raw, line = top["duration_s"]
        duration_s = _as_number(raw, "duration_s", line)
        if duration_s < 0:
            raise ScenarioParseError("duration_s must be >= 0", line)

    baseline = dict(_DEFAULT_BASELINE)
    if "baseline" in top:
        raw, line = top["baseline"]
        if not isinstance(raw, dict):
            raise ScenarioParseError("baseline must be a mapping", line)
        for key, value in raw.items():
            if key not in _DEFAULT_BASELINE:
                raise ScenarioParseError(f"unknown baseline key {key!r}", line)
            baseline[key] = _as_number(value, f"baseline.{key}", line)

    scene = list(DEFAULT_SCENE)
    if "scene" in top:
        raw, line = top["scene"]
        if not isinstance(raw, list):
            raise ScenarioParseError("scene must be a list", line)
        scene = []
        for item in raw:
            if not isinstance(item, dict) or "label" not in item or "bbox" not in item:
                raise ScenarioParseError("scene items need 'label' and 'bbox'", line)
            bbox = item["bbox"]
            if len(bbox) != 4 or not (bbox[0] < bbox[2] and bbox[1] < bbox[3]):
                raise ScenarioParseError(f"bad bbox for scene object {item['label']!r}", line)
            scene.append(SceneObject(str(item["label"]), tuple(float(v) for v in bbox)))

    events_pair = top["events"]
    events_node = None
    for key_node, value_node in root.value:
        if _construct(key_node) == "events":
            events_node = value_node
    if not isinstance(events_node, yaml.SequenceNode):
        raise ScenarioParseError("events must be a list", events_pair[1])

    events: List[ScenarioEvent] = []
    last_t = float("-inf")
    for ev_node in events_node.value:
        line = _line(ev_node)
        if not isinstance(ev_node, yaml.MappingNode):
            raise ScenarioParseError("each event must be a mapping", line)
        raw_event = _construct(ev_node)
        if "t_s" not in raw_event:
            raise ScenarioParseError("event missing 't_s'", line)
        if "kind" not in raw_event:
            raise ScenarioParseError("event missing 'kind'", line)
        kind = raw_event.pop("kind")
        t_s = _as_number(raw_event.pop("t_s"), "t_s", line)
        if kind not in EVENT_SCHEMA:
            raise ScenarioParseError(f"unknown event kind {kind!r}", line)
        if t_s < last_t:
            raise ScenarioParseError(f"event times must be nondecreasing (t_s={t_s})", line)
        last_t = t_s

        required, optional = EVENT_SCHEMA[kind]
        fields: Dict[str, Any] = {}
        for name, typ in required.items():
            if name not in raw_event:
                raise ScenarioParseError(f"event kind {kind!r} requires field {name!r}", line)
            value = raw_event.pop(name)
            if typ is float:
                value = _as_number(value, name, line)
            elif typ is int:
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ScenarioParseError(f"field {name!r} must be an integer", line)
            elif typ is str and not isinstance(value, str):
                raise ScenarioParseError(f"field {name!r} must be a string", line)
            fields[name] = value
        for name, default in optional.items():
            if name in raw_event:
                fields[name] = raw_event.pop(name)
            elif default is not None:
                fields[name] = default
        if raw_event:
            extra = sorted(raw_event)[0]
            raise ScenarioParseError(f"unknown field {extra!r} for event kind {kind!r}", line)
        if "duration_s" in fields and float(fields["duration_s"]) <= 0:
            raise ScenarioParseError(f"duration_s must be > 0 for {kind!r}", line)
        events.append(ScenarioEvent(t_s=t_s, kind=kind, fields=fields, line=line))

    return ScenarioScript(
        seed=seed_value,
        patient=patient_value,
        events=events,
        start_clock_s=start_clock_s,
        duration_s=duration_s,
        baseline=baseline,
        scene=scene,
    )


def load_scenario(path) -> ScenarioScript:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())
