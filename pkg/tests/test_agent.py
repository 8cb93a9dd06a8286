import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from rehabhome.agent import (
    AgentLoop,
    AgentThresholds,
    BackendUnavailable,
    ContextWindow,
    DeviceBindings,
    EndpointConfig,
    FallTrigger,
    MinuteSummary,
    PromptStyle,
    StubBackend,
    Whitelist,
    build_chat_request,
    build_context,
    decide_llm,
    decide_rule_based,
    decision_to_json,
    default_whitelist,
    parse_decision,
    render_prompt,
    safety_corpus_eval,
    validate,
)
from rehabhome.agent.safety import AgentDecision, Intervention, ParseFailure, VerdictStatus
from rehabhome.config import resolve_path
from rehabhome.gateway.fusion import Gateway
from rehabhome.sim import parse_scenario, run_scenario
from rehabhome.sim.runner import SOURCE_ORDER


def gateway_records(script_text):
    gw = Gateway()
    for s in SOURCE_ORDER:
        gw.register_clock(s)
    run = run_scenario(parse_scenario(script_text), sinks=[gw.ingest], keep_log=False)
    gw.flush(final=True)
    return gw.timeline.records, run


def minute(start_ts, hr=70.0, hrv=55.0, temp=36.6, light=300.0, activity="idle", missing=False):
    return MinuteSummary(start_ts, hr, hrv, temp, light, activity, missing)


def window(minutes=None, now_ts=360_000.0, clock_s=12 * 3600.0):
    if minutes is None:
        minutes = [minute(i * 60_000.0) for i in range(6)]
    return ContextWindow(minutes=minutes, now_ts=now_ts, patient_ref="P", clock_s=clock_s)


BINDINGS = DeviceBindings(ac_device="201", lamp_device="101")


class TestBuildContext:
    def test_constant_hr_six_entries(self):
        text = "seed: 1\npatient: P\nbaseline: {hr: 70}\nduration_s: 360\nevents: []\n"
        records, _ = gateway_records(text)
        ctx = build_context(records, now_ts=360_000.0, patient_ref="P")
        assert len(ctx.minutes) == 6
        for m in ctx.minutes:
            assert m.hr_mean == pytest.approx(70, abs=1.0)

    def test_minute_mean_of_two_samples(self):
        from rehabhome.gateway.fusion import TimelineRecord
        from rehabhome.records import Modality, PhysioSample

        records = [
            TimelineRecord(10_000, "wristband", Modality.PHYSIO, PhysioSample(10_000, 60.0, 50.0, 36.5), 0),
            TimelineRecord(20_000, "wristband", Modality.PHYSIO, PhysioSample(20_000, 80.0, 50.0, 36.5), 1),
        ]
        ctx = build_context(records, now_ts=360_000.0)
        assert ctx.minutes[0].hr_mean == pytest.approx(70.0)

    def test_empty_timeline_all_missing(self):
        ctx = build_context([], now_ts=360_000.0)
        assert ctx.all_missing
        assert all(m.missing for m in ctx.minutes)

    def test_means_match_bruteforce_oracle(self):
        text = (
            "seed: 9\npatient: P\nbaseline: {hr: 70, hrv: 60, temp: 36.5}\nduration_s: 400\nevents:\n"
            "  - {t_s: 0, kind: physio_ramp, duration_s: 360, hr_from: 70, hr_to: 110}\n"
        )
        records, _ = gateway_records(text)
        now = 390_000.0
        ctx = build_context(records, now_ts=now)
        from rehabhome.records import PhysioSample

        for i, m in enumerate(ctx.minutes):
            lo = now - (6 - i) * 60_000.0
            hi = lo + 60_000.0
            vals = [r.payload.heart_rate for r in records
                    if isinstance(r.payload, PhysioSample) and lo <= r.ts_ms < hi]
            if vals:
                assert m.hr_mean == pytest.approx(sum(vals) / len(vals), abs=1e-9)
            else:
                assert m.hr_mean is None

    def test_ramp_scenario_delta(self):
        text = (
            "seed: 4\npatient: P\nbaseline: {hr: 70}\nduration_s: 370\nevents:\n"
            "  - {t_s: 0, kind: start_walk, duration_s: 360}\n"
            "  - {t_s: 0, kind: physio_ramp, duration_s: 360, hr_from: 70, hr_to: 115}\n"
        )
        records, _ = gateway_records(text)
        ctx = build_context(records, now_ts=360_000.0)
        # minute-mean centers sit 300 s apart on a 360 s ramp of +45 bpm
        assert ctx.minutes[-1].hr_mean - ctx.minutes[0].hr_mean == pytest.approx(45 * 300 / 360, abs=3.0)
        assert ctx.minutes[-1].activity == "walking"

    def test_clock_from_ambient(self):
        text = "seed: 2\npatient: P\nstart_clock: \"19:00\"\nduration_s: 120\nevents: []\n"
        records, _ = gateway_records(text)
        ctx = build_context(records, now_ts=120_000.0)
        assert ctx.clock_s == pytest.approx(19 * 3600 + 120, abs=2.0)

    def test_exactly_six_minutes_enforced(self):
        with pytest.raises(ValueError):
            ContextWindow(minutes=[minute(0.0)] * 5, now_ts=0.0, patient_ref="P")


class TestRenderPrompt:
    def test_byte_identical(self):
        ctx = window()
        assert render_prompt(ctx, PromptStyle.COT) == render_prompt(ctx, PromptStyle.COT)

    def test_demos_embedded_exactly(self):
        demos = [({"hr": "high"}, {"interventions": [{"kind": "none"}]}), ({"light": "low"}, {"interventions": [{"kind": "none"}]})]
        payload = json.loads(render_prompt(window(), PromptStyle.COT_WITH_DEMOS, demos))
        assert len(payload["demos"]) == 2

    def test_basic_vs_cot_differ_only_in_style(self):
        a = json.loads(render_prompt(window(), PromptStyle.BASIC))
        b = json.loads(render_prompt(window(), PromptStyle.COT))
        assert set(a) == set(b)
        for key in a:
            if key == "style":
                assert a[key] != b[key]
            else:
                assert a[key] == b[key]

    def test_demos_require_style(self):
        with pytest.raises(ValueError):
            render_prompt(window(), PromptStyle.COT_WITH_DEMOS, demos=None)
        with pytest.raises(ValueError):
            render_prompt(window(), PromptStyle.BASIC, demos=[({}, {})])


def exertion_window():
    minutes = [
        minute(0.0, hr=70, hrv=60, temp=36.5, activity="walking"),
        minute(60_000.0, hr=80, hrv=50, temp=36.7, activity="walking"),
        minute(120_000.0, hr=90, hrv=45, temp=36.8, activity="walking"),
        minute(180_000.0, hr=100, hrv=40, temp=37.0, activity="walking"),
        minute(240_000.0, hr=110, hrv=30, temp=37.1, activity="walking"),
        minute(300_000.0, hr=115, hrv=25, temp=37.3, activity="walking"),
    ]
    return window(minutes)


class TestRuleBasedPolicy:
    def test_exertion_fires_all_three(self):
        decision = decide_rule_based(exertion_window(), bindings=BINDINGS, resting_hr=70.0)
        kinds = [iv.kind for iv in decision.interventions]
        assert kinds == ["pause_training", "reminder", "device_command"]
        cmd = decision.interventions[-1]
        assert cmd.device == "201" and cmd.action == "toggle_ac" and cmd.params == {"power": "on"}

    def test_quiescent_none(self):
        decision = decide_rule_based(window(), bindings=BINDINGS)
        assert [iv.kind for iv in decision.interventions] == ["none"]

    def test_fall_immediate_checkin(self):
        decision = decide_rule_based(window(), trigger=FallTrigger(ts_ms=0.0), bindings=BINDINGS)
        assert [iv.kind for iv in decision.interventions] == ["reminder"]

    def test_fall_responded_no_alert(self):
        decision = decide_rule_based(window(), trigger=FallTrigger(ts_ms=0.0, responded=True), bindings=BINDINGS)
        assert all(iv.kind != "caregiver_alert" for iv in decision.interventions)

    def test_fall_unresponsive_alert(self):
        decision = decide_rule_based(window(), trigger=FallTrigger(ts_ms=0.0, responded=False), bindings=BINDINGS)
        assert [iv.kind for iv in decision.interventions] == ["caregiver_alert"]
        assert decision.interventions[0].params == {"channel": "caregiver_app"}

    def test_evening_light(self):
        minutes = [minute(i * 60_000.0, light=30.0, activity="sitting") for i in range(6)]
        ctx = window(minutes, clock_s=19 * 3600.0)
        decision = decide_rule_based(ctx, bindings=BINDINGS)
        cmd = decision.interventions[0]
        assert cmd.kind == "device_command" and cmd.device == "101" and cmd.params == {"power": "on"}

    def test_low_light_at_noon_silent(self):
        minutes = [minute(i * 60_000.0, light=30.0) for i in range(6)]
        decision = decide_rule_based(window(minutes, clock_s=12 * 3600.0), bindings=BINDINGS)
        assert decision.interventions[0].kind == "none"


class TestParseDecision:
    def test_valid(self):
        decision = parse_decision('{"interventions":[{"kind":"none"}]}')
        assert isinstance(decision, AgentDecision)

    def test_truncated(self):
        failure = parse_decision('{"interventions":[{"kind":"remin')
        assert isinstance(failure, ParseFailure)
        assert failure.position.startswith("char")

    def test_extra_top_level_field(self):
        failure = parse_decision('{"interventions":[{"kind":"none"}],"sudo":true}')
        assert isinstance(failure, ParseFailure)
        assert "sudo" in failure.reason

    def test_extra_intervention_field(self):
        failure = parse_decision('{"interventions":[{"kind":"none","force":1}]}')
        assert isinstance(failure, ParseFailure)

    def test_unknown_kind(self):
        failure = parse_decision('{"interventions":[{"kind":"reboot_house"}]}')
        assert isinstance(failure, ParseFailure)

    def test_non_object(self):
        assert isinstance(parse_decision("[1,2,3]"), ParseFailure)


class TestValidate:
    def test_unlisted_action_rejected(self):
        decision = AgentDecision([Intervention("device_command", device="101", action="unlock_front_door", params={"power": "on"})])
        verdict = validate(decision)
        assert verdict.status is VerdictStatus.REJECT_WHITELIST

    def test_out_of_range_temperature(self):
        decision = AgentDecision([Intervention("device_command", device="201", action="set_temperature", params={"celsius": 45})])
        verdict = validate(decision)
        assert verdict.status is VerdictStatus.REJECT_WHITELIST

    def test_missing_params_structural(self):
        decision = AgentDecision([Intervention("device_command", device="101", action="toggle_light")])
        verdict = validate(decision)
        assert verdict.status is VerdictStatus.REJECT_STRUCTURAL

    def test_conflicting_commands_structural(self):
        decision = AgentDecision(
            [
                Intervention("device_command", device="101", action="toggle_light", params={"power": "on"}),
                Intervention("device_command", device="101", action="toggle_light", params={"power": "off"}),
            ]
        )
        assert validate(decision).status is VerdictStatus.REJECT_STRUCTURAL

    def test_bad_alert_channel(self):
        decision = AgentDecision([Intervention("caregiver_alert", text="help", params={"channel": "public_broadcast"})])
        assert validate(decision).status is VerdictStatus.REJECT_WHITELIST

    def test_parse_failure_maps_to_structural(self):
        assert validate(ParseFailure("broken", "$")).status is VerdictStatus.REJECT_STRUCTURAL

    def test_rule_closure_over_random_scenarios(self):
        rng = np.random.default_rng(11)
        whitelist = default_whitelist()
        activities = ["idle", "walking", "sitting", "falling"]
        for case in range(1000):
            minutes = [
                minute(
                    i * 60_000.0,
                    hr=float(rng.uniform(50, 140)),
                    hrv=float(rng.uniform(5, 90)),
                    temp=float(rng.uniform(36.0, 38.0)),
                    light=float(rng.uniform(0, 400)),
                    activity=activities[int(rng.integers(0, 4))],
                )
                for i in range(6)
            ]
            ctx = window(minutes, clock_s=float(rng.uniform(0, 86400)))
            trigger = None
            if case % 5 == 1:
                trigger = FallTrigger(ts_ms=0.0)
            elif case % 5 == 2:
                trigger = FallTrigger(ts_ms=0.0, responded=bool(rng.random() < 0.5))
            decision = decide_rule_based(ctx, trigger=trigger, bindings=BINDINGS, resting_hr=float(rng.uniform(55, 80)))
            roundtrip = parse_decision(decision_to_json(decision))
            verdict = validate(roundtrip, whitelist)
            assert verdict.passed, f"case {case}: {verdict.reason}"


class TestSafetyCorpus:
    def test_bundled_corpus(self):
        result = safety_corpus_eval(resolve_path("bundled:safety_corpus"))
        assert result["total"] == 100
        assert result["erroneous"] == 7
        assert result["detected"] == 7
        assert result["false_activations"] == 0
        assert result["missed_ids"] == []

    def test_valid_only_corpus(self, tmp_path):
        for i in range(5):
            (tmp_path / f"{i:03d}.json").write_text(json.dumps({
                "id": i, "label": "ok", "expected": "pass",
                "raw": '{"interventions":[{"kind":"none"}]}'}))
        result = safety_corpus_eval(tmp_path)
        assert result["detected"] == 0 and result["false_activations"] == 0

    def test_malformed_only_corpus(self, tmp_path):
        for i in range(4):
            (tmp_path / f"{i:03d}.json").write_text(json.dumps({
                "id": i, "label": "broken", "expected": "reject_structural", "raw": '{"interv'}))
        result = safety_corpus_eval(tmp_path)
        assert result["detected"] == 4


class _RecordingHandler(BaseHTTPRequestHandler):
    bodies = []
    response_text = json.dumps({"interventions": [{"kind": "none"}], "rationale": "endpoint says relax"})

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        _RecordingHandler.bodies.append(json.loads(self.rfile.read(length)))
        payload = json.dumps({"choices": [{"message": {"content": _RecordingHandler.response_text}}]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


class TestLlmBackend:
    def test_request_body_temperature(self):
        config = EndpointConfig(url="http://example.invalid", model="local-chat")
        body = build_chat_request("{}", config)
        assert body["temperature"] == 0.7
        assert body["model"] == "local-chat"

    def test_http_roundtrip_carries_temperature(self):
        server = ThreadingHTTPServer(("127.0.0.1", 0), _RecordingHandler)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            config = EndpointConfig(url=f"http://127.0.0.1:{server.server_port}/v1/chat", model="m", timeout_s=5.0)
            raw = decide_llm(render_prompt(window()), config)
            assert json.loads(raw)["rationale"] == "endpoint says relax"
            assert _RecordingHandler.bodies[-1]["temperature"] == 0.7
        finally:
            server.shutdown()
            thread.join(timeout=2.0)

    def test_endpoint_down_raises(self):
        config = EndpointConfig(url="http://127.0.0.1:9/nothing", model="m", timeout_s=0.5)
        with pytest.raises(BackendUnavailable):
            decide_llm("{}", config)


class TestAgentLoop:
    def test_stub_backend_parses_like_rule_based(self):
        raw = decision_to_json(decide_rule_based(exertion_window(), bindings=BINDINGS))
        stub_loop = AgentLoop("P", backend=StubBackend(raw), bindings=BINDINGS)
        rule_loop = AgentLoop("P", backend="rule", bindings=BINDINGS)
        records = []
        a = stub_loop.tick(records, 360_000.0)
        assert a.verdict.passed
        assert isinstance(a.decision, AgentDecision)

    def test_dead_endpoint_falls_back_to_rule(self):
        config = EndpointConfig(url="http://127.0.0.1:9/x", model="m", timeout_s=0.3)
        loop = AgentLoop("P", backend=config, bindings=BINDINGS)
        result = loop.tick([], 360_000.0)
        assert result.fallback_used
        assert loop.audit_log[-1]["fallback"] is True
        assert result.verdict.passed  # rule-based fallback always validates

    def test_reject_produces_no_dispatch(self):
        loop = AgentLoop("P", backend=StubBackend('{"interventions":[{"kind":"device_command","device":"101","action":"unlock_front_door","params":{}}]}'), bindings=BINDINGS)
        result = loop.tick([], 60_000.0)
        assert not result.verdict.passed
        assert result.receipts == [] and result.notifications == []

    def test_caregiver_alert_carries_context_snapshot(self):
        raw = decision_to_json(decide_rule_based(window(), trigger=FallTrigger(0.0, responded=False), bindings=BINDINGS))
        loop = AgentLoop("P", backend=StubBackend(raw), bindings=BINDINGS)
        result = loop.tick([], 120_000.0)
        assert result.notifications and result.notifications[0]["kind"] == "caregiver_alert"
        assert len(result.notifications[0]["context_snapshot"]) == 6

    def test_fall_wall_latency_under_1s(self):
        loop = AgentLoop("P", backend="rule", bindings=BINDINGS)
        result = loop.on_fall([], 60_000.0)
        assert result.wall_latency_ms < 1000.0
