"""Scenario execution: turns a script into time-ordered multimodal packets.

All streams are generated deterministically from the script seed.  Packets
are delivered to sinks in simulated-time order; an optional in-memory log
(canonical dict records) supports byte-identical replay comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..records import (
    ActivityState,
    AmbientSample,
    Foot,
    GazeSample,
    Modality,
    PerceptionEvent,
    PhysioSample,
    PressureFrame,
    SensorPacket,
    VoiceUtterance,
    payload_to_dict,
)
from .cohort import GaitParams, ImpairmentLevel, default_gait_params
from .gait_gen import generate_walk
from .scenario import ScenarioScript

SOURCE_ORDER = ["insole_L", "insole_R", "wristband", "ambient", "eyetracker", "mic", "percept"]

PHYSIO_RATE_HZ = 1.0
AMBIENT_RATE_HZ = 1.0
GAZE_RATE_HZ = 30.0


@dataclass
class ClockSkew:
    """Simulated device clock error: device_ts = true_ts + offset + drift*true_ts/1e6."""

    offset_ms: float = 0.0
    drift_ppm: float = 0.0

    def apply(self, true_ts: float) -> float:
        return true_ts + self.offset_ms + self.drift_ppm * true_ts / 1e6


@dataclass
class ScenarioRun:
    script: ScenarioScript
    records: List[Dict[str, Any]]
    packet_count: int
    duration_s: float


def _ramp_value(baseline: float, ramps: Sequence[Tuple[float, float, float, float]], t: float) -> float:
    value = baseline
    for t0, t1, v0, v1 in ramps:
        if t >= t1:
            value = v1
        elif t >= t0:
            value = v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    return value


def _activity_timeline(script: ScenarioScript, end_s: float) -> List[Tuple[float, ActivityState, Dict[str, Any]]]:
    """State transitions (t_s, state, detail) implied by the event list."""
    changes: List[Tuple[float, ActivityState, Dict[str, Any]]] = [(0.0, ActivityState.IDLE, {})]
    for ev in script.events:
        if ev.kind == "start_walk":
            detail = {
                "assisted": bool(ev.get("assisted", False)),
                "speed_change": ev.get("speed_profile", "steady") == "varying",
            }
            changes.append((ev.t_s, ActivityState.WALKING, detail))
            walk_end = ev.t_s + float(ev.get("duration_s"))
            if walk_end < end_s:
                changes.append((walk_end, ActivityState.IDLE, {}))
        elif ev.kind == "sit":
            changes.append((ev.t_s, ActivityState.SITTING, {}))
        elif ev.kind == "fall":
            changes.append((ev.t_s, ActivityState.FALLING, {}))
    changes.sort(key=lambda c: c[0])
    return changes


def _state_at(changes, t: float) -> ActivityState:
    state = ActivityState.IDLE
    for ct, cs, _ in changes:
        if ct <= t:
            state = cs
        else:
            break
    return state


def run_scenario(
    script: ScenarioScript,
    sinks: Iterable[Callable[[SensorPacket], Any]] = (),
    gait_params: Optional[GaitParams] = None,
    skew: Optional[Dict[str, ClockSkew]] = None,
    rate_hz: float = 200.0,
    keep_log: bool = True,
) -> ScenarioRun:
    """Execute a scenario, pushing packets to sinks in simulated-time order.

    `gait_params` defaults to mild-level parameters derived from the script
    seed; the cohort pipeline passes the patient's own parameters.
    """
    sinks = list(sinks)
    skew = skew or {}
    rng = np.random.default_rng([script.seed & 0xFFFFFFFF, 0x5CE0])
    end_s = script.end_time_s()
    if gait_params is None:
        gait_params = default_gait_params(ImpairmentLevel.MILD, script.seed)

    hr_ramps, hrv_ramps, temp_ramps, light_ramps = [], [], [], []
    for ev in script.events:
        if ev.kind == "physio_ramp":
            t0, t1 = ev.t_s, ev.t_s + float(ev.get("duration_s"))
            if ev.get("hr_from") is not None:
                hr_ramps.append((t0, t1, float(ev.get("hr_from")), float(ev.get("hr_to"))))
            if ev.get("hrv_from") is not None:
                hrv_ramps.append((t0, t1, float(ev.get("hrv_from")), float(ev.get("hrv_to"))))
            if ev.get("temp_from") is not None:
                temp_ramps.append((t0, t1, float(ev.get("temp_from")), float(ev.get("temp_to"))))
        elif ev.kind == "ambient_ramp":
            t0, t1 = ev.t_s, ev.t_s + float(ev.get("duration_s"))
            light_ramps.append((t0, t1, float(ev.get("light_from")), float(ev.get("light_to"))))

    base = script.baseline
    streams: List[List[SensorPacket]] = [[] for _ in SOURCE_ORDER]

    def emit(source: str, modality: Modality, true_ts_ms: float, payload) -> None:
        device_ts = skew[source].apply(true_ts_ms) if source in skew else true_ts_ms
        if hasattr(payload, "timestamp"):
            payload.timestamp = device_ts  # payload clock == device clock
        packet = SensorPacket(source_id=source, modality=modality, device_timestamp=device_ts, payload=payload)
        streams[SOURCE_ORDER.index(source)].append(packet)

    # Pressure: one stream per insole for each walking bout.
    for walk_index, ev in enumerate(e for e in script.events if e.kind == "start_walk"):
        duration = float(ev.get("duration_s"))
        left, right = generate_walk(
            gait_params,
            duration_s=min(duration, end_s - ev.t_s),
            rate_hz=rate_hz,
            seed=script.seed + 7919 * (walk_index + 1),
            speed_profile=ev.get("speed_profile", "steady"),
        )
        offset_ms = ev.t_s * 1000.0
        for frame in left:
            emit("insole_L", Modality.PRESSURE, offset_ms + frame.timestamp,
                 PressureFrame(offset_ms + frame.timestamp, Foot.LEFT, frame.values))
        for frame in right:
            emit("insole_R", Modality.PRESSURE, offset_ms + frame.timestamp,
                 PressureFrame(offset_ms + frame.timestamp, Foot.RIGHT, frame.values))

    # Physio and ambient at 1 Hz.
    n_seconds = int(math.floor(end_s))
    physio_noise = rng.normal(0.0, 1.0, size=(n_seconds, 3))
    for i in range(n_seconds):
        t = float(i)
        ts = t * 1000.0
        hr = _ramp_value(base["hr"], hr_ramps, t) + 0.5 * physio_noise[i, 0]
        hrv = _ramp_value(base["hrv"], hrv_ramps, t) + 0.5 * physio_noise[i, 1]
        temp = _ramp_value(base["temp"], temp_ramps, t) + 0.02 * physio_noise[i, 2]
        emit("wristband", Modality.PHYSIO, ts,
             PhysioSample(ts, heart_rate=min(max(hr, 30.0), 220.0), hrv=max(hrv, 0.0),
                          skin_temp=min(max(temp, 30.0), 42.0)))
        emit("ambient", Modality.AMBIENT, ts,
             AmbientSample(ts, light_level=max(_ramp_value(base["light"], light_ramps, t), 0.0),
                           time_of_day=(script.start_clock_s + t) % 86400.0))

    # Gaze dwells (with a brief scatter prefix) and blink patterns.
    scene_by_label = {obj.label: obj for obj in script.scene}
    gaze_step_ms = 1000.0 / GAZE_RATE_HZ
    for ev in script.events:
        if ev.kind == "gaze":
            target = ev.get("target")
            if target not in scene_by_label:
                raise ValueError(f"gaze target {target!r} not in scene")
            box = scene_by_label[target].bbox
            cx, cy = (box[0] + box[2]) / 2.0, (box[1] + box[3]) / 2.0
            start_ms = ev.t_s * 1000.0
            n_scatter = 10
            for j in range(n_scatter):
                ts = start_ms - (n_scatter - j) * gaze_step_ms
                if ts < 0:
                    continue
                emit("eyetracker", Modality.GAZE, ts,
                     GazeSample(ts, float(rng.uniform(0.15, 0.85)), float(rng.uniform(0.15, 0.85))))
            n_dwell = int(round(float(ev.get("dwell_ms")) / gaze_step_ms))
            for j in range(n_dwell):
                ts = start_ms + j * gaze_step_ms
                emit("eyetracker", Modality.GAZE, ts,
                     GazeSample(ts,
                                float(np.clip(cx + rng.uniform(-0.004, 0.004), 0.0, 1.0)),
                                float(np.clip(cy + rng.uniform(-0.004, 0.004), 0.0, 1.0))))
        elif ev.kind == "blink":
            # A blink is a short run of invalid samples in the gaze stream.
            for b in range(int(ev.get("count"))):
                blink_start = ev.t_s * 1000.0 + b * float(ev.get("spacing_ms"))
                for j in range(3):
                    ts = blink_start + j * gaze_step_ms
                    emit("eyetracker", Modality.GAZE, ts, GazeSample(ts, 0.0, 0.0, valid=False))
        elif ev.kind == "voice":
            ts = ev.t_s * 1000.0
            emit("mic", Modality.VOICE, ts, VoiceUtterance(ts, str(ev.get("text"))))

    # Activity: transition events plus a 1 Hz heartbeat for occupancy stats.
    changes = _activity_timeline(script, end_s)
    for ct, state, detail in changes:
        ts = ct * 1000.0
        emit("percept", Modality.PERCEPTION, ts,
             PerceptionEvent(ts, state, dict(detail, transition=True)))
    for i in range(n_seconds):
        ts = i * 1000.0 + 500.0  # offset so heartbeats never collide with transitions
        state = _state_at(changes, ts / 1000.0)
        emit("percept", Modality.PERCEPTION, ts, PerceptionEvent(ts, state, {"heartbeat": True}))

    # Merge all streams into simulated-time order (stable by source priority).
    merged: List[Tuple[float, int, int, SensorPacket]] = []
    for pri, stream in enumerate(streams):
        for seq, packet in enumerate(stream):
            merged.append((packet.device_timestamp, pri, seq, packet))
    merged.sort(key=lambda item: (item[0], item[1], item[2]))

    records: List[Dict[str, Any]] = []
    for ts, _, _, packet in merged:
        for sink in sinks:
            sink(packet)
        if keep_log:
            records.append(
                {
                    "ts_ms": packet.device_timestamp,
                    "source": packet.source_id,
                    "modality": packet.modality.value,
                    "payload": payload_to_dict(packet),
                }
            )

    return ScenarioRun(script=script, records=records, packet_count=len(merged), duration_s=end_s)
