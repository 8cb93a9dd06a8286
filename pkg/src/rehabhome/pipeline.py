"""End-to-end wiring: simulation into the gateway, interaction processing,
agent scheduling, and virtual device dispatch.

Two entry points: `simulate_cohort` produces the labeled segment dataset and
feature table; `run_closed_loop` executes one scenario against live virtual
appliances with the full intent and Auto-Care paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .agent.loop import AgentLoop, AgentTickResult
from .agent.policy import DeviceBindings
from .config import AgentConfig, RunConfig
from .devices.client import MiioClient, Unreachable
from .devices.registry import DeviceDescriptor, Registry
from .devices.transport import InProcTransport
from .devices.virtual import UdpDeviceServer, VirtualDevice, make_virtual_device
from .gateway.fusion import Gateway, TimelineRecord
from .gateway.segment import GaitSegment, SegmentFlags, detect_bouts, edge_case_filter, pair_pressure_streams, segment_walks
from .interaction.dispatch import DeliveryReceipt, IntentArbiter
from .interaction.gaze import ObjectBox, blinks_from_gaze, confirm_selection, detect_fixation, map_fixation_to_object
from .interaction.voice import Intent, NoMatch, parse_voice_command
from .analytics.features import GaitFeatures, NoCycleError, extract_features
from .records import ActivityState, Modality
from .sim.cohort import PatientProfile, default_gait_params, make_cohort
from .sim.runner import SOURCE_ORDER, run_scenario
from .sim.scenario import ScenarioEvent, ScenarioScript

OBJECT_KIND = {"lamp": "lamp", "tv": "tv", "air_conditioner": "ac"}
POWER_ACTIONS = {"lamp": "toggle_light", "ac": "toggle_ac", "tv": "toggle_tv"}


def new_gateway() -> Gateway:
    gw = Gateway()
    for source in SOURCE_ORDER:
        gw.register_clock(source)
    return gw


def build_walk_script(patient: PatientProfile, seed: int, walk_seconds: float) -> ScenarioScript:
    """Two walking bouts with a rest gap; used for dataset generation."""
    half = walk_seconds / 2.0
    events = [
        ScenarioEvent(t_s=5.0, kind="start_walk", fields={"duration_s": half, "assisted": False, "speed_profile": "steady"}),
        ScenarioEvent(t_s=5.0 + half + 10.0, kind="start_walk", fields={"duration_s": half, "assisted": False, "speed_profile": "steady"}),
    ]
    return ScenarioScript(seed=seed, patient=patient.id, events=events, duration_s=half * 2 + 25.0)


def pressure_streams(records: Sequence[TimelineRecord]):
    left, right = [], []
    for r in records:
        if r.modality is Modality.PRESSURE:
            row = (r.ts_ms, r.payload.channels())
            (left if r.source_id == "insole_L" else right).append(row)
    return left, right


def walk_metadata(records: Sequence[TimelineRecord]) -> List[Tuple[float, SegmentFlags]]:
    meta = []
    for r in records:
        if r.modality is Modality.PERCEPTION and r.payload.detail.get("transition") and r.payload.state is ActivityState.WALKING:
            meta.append((float(r.ts_ms), SegmentFlags(
                assisted=bool(r.payload.detail.get("assisted", False)),
                speed_change=bool(r.payload.detail.get("speed_change", False)),
            )))
    return meta


def segments_from_gateway(gw: Gateway, patient: PatientProfile, counters: Optional[Dict[str, int]] = None):
    """Pair, bout-detect, window, and filter the gateway's pressure timeline."""
    counters = counters if counters is not None else {}
    records = gw.timeline.records
    left, right = pressure_streams(records)
    paired = pair_pressure_streams(left, right)
    bouts = detect_bouts(paired)
    segments = segment_walks(
        paired,
        bouts,
        patient_ref=patient.id,
        label=patient.level,
        walk_meta=walk_metadata(records),
        counters=counters,
    )
    accepted: List[GaitSegment] = []
    for seg in segments:
        decision = edge_case_filter(seg)
        if decision.accepted:
            accepted.append(seg)
        else:
            key = f"rejected_{decision.reason.value}"
            counters[key] = counters.get(key, 0) + 1
    counters["segments_total"] = counters.get("segments_total", 0) + len(segments)
    counters["segments_accepted"] = counters.get("segments_accepted", 0) + len(accepted)
    return accepted, counters


@dataclass
class CohortSimResult:
    patients: List[PatientProfile]
    segments: List[GaitSegment]
    features: List[Tuple[GaitSegment, GaitFeatures]]
    counters: Dict[str, int]
    timeline_rows: List[Dict[str, Any]]


def simulate_cohort(config: RunConfig) -> CohortSimResult:
    patients = make_cohort(config.cohort, config.seed)
    all_segments: List[GaitSegment] = []
    features: List[Tuple[GaitSegment, GaitFeatures]] = []
    counters: Dict[str, int] = {}
    timeline_rows: List[Dict[str, Any]] = []

    for idx, patient in enumerate(patients):
        gait_params = default_gait_params(patient.level, config.seed + 1000 * (idx + 1))
        script = build_walk_script(patient, seed=config.seed + idx, walk_seconds=config.walk_seconds_per_patient)
        gw = new_gateway()
        run_scenario(script, sinks=[gw.ingest], gait_params=gait_params, keep_log=False)
        gw.flush(final=True)
        accepted, counters = segments_from_gateway(gw, patient, counters)
        all_segments.extend(accepted)
        for seg in accepted:
            try:
                features.append((seg, extract_features(seg)))
            except NoCycleError:
                counters["features_skipped"] = counters.get("features_skipped", 0) + 1
        for record in gw.timeline.records:
            if record.modality is Modality.PRESSURE and not config.log_pressure_frames:
                continue
            row = record.to_dict()
            row["patient"] = patient.id
            timeline_rows.append(row)
        for key, value in gw.metrics.items():
            counters[f"gateway_{key}"] = counters.get(f"gateway_{key}", 0) + value

    return CohortSimResult(patients, all_segments, features, counters, timeline_rows)


# -- closed loop ---------------------------------------------------------------


@dataclass
class DeviceFixture:
    registry: Registry
    devices: Dict[int, VirtualDevice]
    clients: Dict[int, MiioClient]
    servers: List[UdpDeviceServer] = field(default_factory=list)

    def stop(self) -> None:
        for client in self.clients.values():
            client.close()
        for server in self.servers:
            server.stop()


def start_devices(registry: Registry, transport: str = "udp") -> DeviceFixture:
    """Spin up one virtual appliance per registry entry and handshake clients.

    `transport`: "udp" binds loopback sockets on ephemeral ports; "inproc"
    wires clients straight to the device handlers.
    """
    devices: Dict[int, VirtualDevice] = {}
    clients: Dict[int, MiioClient] = {}
    servers: List[UdpDeviceServer] = []
    for descriptor in registry.devices.values():
        device = make_virtual_device(descriptor)
        devices[descriptor.device_id] = device
        if transport == "udp":
            server = UdpDeviceServer(device, port=0).start()
            servers.append(server)
            live = DeviceDescriptor(
                device_id=descriptor.device_id,
                token=descriptor.token,
                host="127.0.0.1",
                port=server.address[1],
                kind=descriptor.kind,
                name=descriptor.name,
                room=descriptor.room,
            )
            clients[descriptor.device_id] = MiioClient(live, timeout_s=2.0)
        elif transport == "inproc":
            clients[descriptor.device_id] = MiioClient(descriptor, transport=InProcTransport(device.handle_datagram), timeout_s=0.5)
        else:
            raise ValueError(f"unknown transport {transport!r}")
    fixture = DeviceFixture(registry=registry, devices=devices, clients=clients, servers=servers)
    for client in clients.values():
        client.handshake()
    return fixture


def agent_bindings(registry: Registry) -> DeviceBindings:
    ac = registry.first_of_kind("ac")
    lamp = registry.first_of_kind("lamp")
    return DeviceBindings(
        ac_device=str(ac.device_id) if ac else None,
        lamp_device=str(lamp.device_id) if lamp else None,
    )


@dataclass
class ClosedLoopResult:
    script: ScenarioScript
    gateway: Gateway
    receipts: List[DeliveryReceipt]
    notifications: List[Dict[str, Any]]
    audit: List[Dict[str, Any]]
    tick_results: List[AgentTickResult]
    fall_results: List[AgentTickResult]
    device_logs: Dict[int, List[Dict[str, Any]]]
    no_matches: List[Dict[str, Any]]


def run_closed_loop(
    script: ScenarioScript,
    registry: Registry,
    agent_config: Optional[AgentConfig] = None,
    transport: str = "udp",
    backend_override=None,
) -> ClosedLoopResult:
    agent_config = agent_config or AgentConfig()
    fixture = start_devices(registry, transport=transport)
    try:
        gw = new_gateway()
        run_scenario(script, sinks=[gw.ingest], keep_log=False)
        gw.flush(final=True)
        records = gw.timeline.records

        arbiter = IntentArbiter(fixture.clients)
        backend = backend_override
        if backend is None:
            backend = agent_config.endpoint if agent_config.backend == "llm" and agent_config.endpoint else "rule"
        agent = AgentLoop(
            patient_ref=script.patient,
            arbiter=arbiter,
            backend=backend,
            thresholds=agent_config.thresholds,
            bindings=agent_bindings(registry),
            resting_hr=script.baseline.get("hr", 70.0),
            style=agent_config.style,
        )

        no_matches: List[Dict[str, Any]] = []
        # voice commands
        for r in records:
            if r.modality is Modality.VOICE:
                parsed = parse_voice_command(r.payload.text, registry, issued_ts=float(r.ts_ms))
                if isinstance(parsed, Intent):
                    arbiter.issue(parsed)
                else:
                    no_matches.append({"ts_ms": r.ts_ms, "text": r.payload.text, "token": parsed.token, "reason": parsed.reason})

        # gaze selection: fixation -> object -> double-blink confirmation
        gaze_samples = [r.payload for r in records if r.modality is Modality.GAZE]
        boxes = [ObjectBox(obj.label, obj.bbox) for obj in script.scene]
        blinks = blinks_from_gaze(gaze_samples)
        for fix in detect_fixation(gaze_samples):
            box = map_fixation_to_object(fix, boxes)
            if box is None or box.label not in OBJECT_KIND:
                continue
            kind = OBJECT_KIND[box.label]
            descriptor = registry.first_of_kind(kind)
            if descriptor is None:
                continue
            window = [b for b in blinks if fix.end_ts <= b.timestamp <= fix.end_ts + 1600.0]
            if not confirm_selection(window):
                continue
            client = fixture.clients[descriptor.device_id]
            current = client.state.properties.get("power", "off")
            intent = Intent(
                target_device=descriptor.device_id,
                action=POWER_ACTIONS[kind],
                params={"power": "off" if current == "on" else "on"},
                source="gaze",
                issued_ts=fix.end_ts,
            )
            arbiter.issue(intent)

        # agent schedule: minute ticks plus fall triggers and follow-ups
        end_s = script.end_time_s()
        points: List[Tuple[float, int, Dict[str, Any]]] = []
        for minute in range(1, int(math.floor(end_s / 60.0)) + 1):
            points.append((minute * 60_000.0, 0, {"kind": "tick"}))
        voice_times = [float(r.ts_ms) for r in records if r.modality is Modality.VOICE]
        window_ms = agent_config.fall_response_window_s * 1000.0
        for r in records:
            if r.modality is Modality.PERCEPTION and r.payload.detail.get("transition") and r.payload.state is ActivityState.FALLING:
                fall_ts = float(r.ts_ms)
                responded = any(fall_ts < t <= fall_ts + window_ms for t in voice_times)
                points.append((fall_ts, 1, {"kind": "fall"}))
                points.append((fall_ts + window_ms, 2, {"kind": "fall_followup", "responded": responded}))
        points.sort(key=lambda p: (p[0], p[1]))

        tick_results: List[AgentTickResult] = []
        fall_results: List[AgentTickResult] = []
        for ts, _, info in points:
            if info["kind"] == "tick":
                tick_results.append(agent.tick(records, ts))
            elif info["kind"] == "fall":
                fall_results.append(agent.on_fall(records, ts))
            else:
                fall_results.append(agent.fall_followup(records, ts, responded=info["responded"]))

        device_logs = {
            device_id: [
                {"device_id": device_id, "ts": entry.ts, "request_id": entry.request_id, "method": entry.method, "params": entry.params}
                for entry in device.command_log
            ]
            for device_id, device in fixture.devices.items()
        }
        return ClosedLoopResult(
            script=script,
            gateway=gw,
            receipts=arbiter.receipts,
            notifications=agent.notification_log,
            audit=agent.audit_log,
            tick_results=tick_results,
            fall_results=fall_results,
            device_logs=device_logs,
            no_matches=no_matches,
        )
    finally:
        fixture.stop()
