import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from rehabhome.cli import main as cli_main
from rehabhome.config import load_config, resolve_path
from rehabhome.devices.registry import Registry
from rehabhome.gateway.segment import RejectReason, edge_case_filter
from rehabhome.jsonl import read_container, read_jsonl
from rehabhome.pipeline import new_gateway, run_closed_loop, segments_from_gateway, simulate_cohort
from rehabhome.sim import parse_scenario, run_scenario
from rehabhome.sim.cohort import GaitParams, PatientProfile
from rehabhome.model.evaluate import metrics_from_confusion


def sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_config(tmp_path, name="config.yaml", **overrides):
    config = {
        "seed": 7,
        "out_dir": str(tmp_path / "out"),
        "cohort": {"mild": 1, "moderate": 1, "severe": 1},
        "walk_seconds_per_patient": 30,
        "classifier": {
            "map_size": 28,
            "encoder_channels": [4, 8],
            "feature_dim": 32,
            "head_hidden": [64],
            "max_epochs": 4,
        },
    }
    config.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(config), encoding="utf-8")  # YAML is a JSON superset
    return path


def patient(level_fma=90):
    return PatientProfile(id="PX", age=50, sex="male", bmi=24.0, fma_score=level_fma)


def segments_for_script(text, gait_params=None):
    gw = new_gateway()
    run_scenario(parse_scenario(text), sinks=[gw.ingest], gait_params=gait_params, keep_log=False)
    gw.flush(final=True)
    counters = {}
    return segments_from_gateway_with_filterless(gw, counters)


def segments_from_gateway_with_filterless(gw, counters):
    # mirror of pipeline.segments_from_gateway but returning pre-filter segments
    from rehabhome.gateway.segment import detect_bouts, pair_pressure_streams, segment_walks
    from rehabhome.pipeline import pressure_streams, walk_metadata

    left, right = pressure_streams(gw.timeline.records)
    paired = pair_pressure_streams(left, right)
    return segment_walks(paired, detect_bouts(paired), patient_ref="PX", label=None,
                         walk_meta=walk_metadata(gw.timeline.records), counters=counters)


SLOW_PARAMS = GaitParams(
    cadence=0.35,
    stance_fraction_left=0.62,
    stance_fraction_right=0.62,
    peak_force_left=1000.0,
    peak_force_right=1000.0,
    stride_cv_target=0.03,
    noise_sigma=1.0,
    affected_side="none",
)


class TestEdgeCaseSuite:
    def test_two_stride_walk_rejected_short(self):
        text = "seed: 1\npatient: PX\nevents:\n  - {t_s: 1, kind: start_walk, duration_s: 6}\n"
        segments = segments_for_script(text, gait_params=SLOW_PARAMS)
        assert segments, "expected at least one 5s segment"
        decisions = [edge_case_filter(s) for s in segments]
        assert all(not d.accepted and d.reason is RejectReason.SHORT_WALK for d in decisions)

    def test_assisted_walk_rejected_assisted(self):
        text = "seed: 2\npatient: PX\nevents:\n  - {t_s: 1, kind: start_walk, duration_s: 6, assisted: true}\n"
        segments = segments_for_script(text)
        assert segments
        for seg in segments:
            assert seg.flags.assisted
            decision = edge_case_filter(seg)
            assert not decision.accepted and decision.reason is RejectReason.ASSISTED

    def test_speed_change_walk_fully_accepted(self):
        text = "seed: 3\npatient: PX\nevents:\n  - {t_s: 1, kind: start_walk, duration_s: 12, speed_profile: varying}\n"
        segments = segments_for_script(text)
        assert segments
        for seg in segments:
            assert seg.flags.speed_change
            assert edge_case_filter(seg).accepted


class TestSimulateCohort:
    def test_small_cohort_counts(self, tmp_path):
        config = load_config(write_config(tmp_path))
        result = simulate_cohort(config)
        assert len(result.patients) == 3
        labels = [s.label.value for s in result.segments]
        assert set(labels) == {"mild", "moderate", "severe"}
        assert result.counters["segments_accepted"] == len(result.segments)
        assert len(result.features) == len(result.segments)
        assert all(r["modality"] != "pressure" for r in result.timeline_rows)


class TestClosedLoopVariants:
    def test_fall_with_response_no_alert(self):
        registry = Registry.load(resolve_path("bundled:registry.yaml"))
        text = (
            "seed: 5\npatient: P\nduration_s: 200\nevents:\n"
            "  - {t_s: 90, kind: fall}\n"
            "  - {t_s: 100, kind: voice, text: \"I am fine\"}\n"
        )
        result = run_closed_loop(parse_scenario(text), registry, transport="inproc")
        kinds = [n["kind"] for n in result.notifications]
        assert "reminder" in kinds  # check-in query
        assert "caregiver_alert" not in kinds

    def test_gaze_selection_toggles_device(self):
        registry = Registry.load(resolve_path("bundled:registry.yaml"))
        text = (
            "seed: 6\npatient: P\nduration_s: 40\nevents:\n"
            "  - {t_s: 5, kind: gaze, target: tv, dwell_ms: 800}\n"
            "  - {t_s: 6.2, kind: blink, count: 2, spacing_ms: 300}\n"
        )
        result = run_closed_loop(parse_scenario(text), registry, transport="inproc")
        gaze_receipts = [r for r in result.receipts if r.intent.source == "gaze"]
        assert len(gaze_receipts) == 1
        assert gaze_receipts[0].success
        assert result.device_logs[301] and result.device_logs[301][0]["method"] == "toggle_tv"

    def test_voice_nomatch_logged(self):
        registry = Registry.load(resolve_path("bundled:registry.yaml"))
        text = "seed: 7\npatient: P\nduration_s: 30\nevents:\n  - {t_s: 2, kind: voice, text: \"make me a sandwich\"}\n"
        result = run_closed_loop(parse_scenario(text), registry, transport="inproc")
        assert result.no_matches and result.no_matches[0]["token"] == "make"
        assert result.receipts == []


class TestCliCommands:
    def test_simulate_train_deterministic(self, tmp_path):
        cfg_a = write_config(tmp_path, name="a.yaml", out_dir=str(tmp_path / "a"))
        cfg_b = write_config(tmp_path, name="b.yaml", out_dir=str(tmp_path / "b"))
        for cfg in (cfg_a, cfg_b):
            assert cli_main(["simulate", "--config", str(cfg)]) == 0
            assert cli_main(["train", "--config", str(cfg)]) == 0
        for name in ("timeline.jsonl", "segments.bin", "maps.bin", "features.csv", "cohort.json",
                     "sim_counters.json", "checkpoint.bin", "history.csv", "eval_report.json"):
            assert sha(tmp_path / "a" / name) == sha(tmp_path / "b" / name), name

    def test_invalid_scenario_exits_nonzero_with_position(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("seed: 1\npatient: P\nevents:\n  - {t_s: 0, kind: warp}\n", encoding="utf-8")
        cfg = write_config(tmp_path)
        code = cli_main(["run-scenario", "--config", str(cfg), "--scenario", str(bad), "--transport", "inproc"])
        captured = capsys.readouterr()
        assert code != 0
        assert "line 4" in captured.err

    def test_missing_class_exits_nonzero(self, tmp_path, capsys):
        cfg = write_config(tmp_path, cohort={"mild": 2, "moderate": 1, "severe": 0})
        code = cli_main(["simulate", "--config", str(cfg)])
        assert code != 0

    def test_max_epochs_one(self, tmp_path):
        cfg = write_config(tmp_path)
        assert cli_main(["simulate", "--config", str(cfg)]) == 0
        assert cli_main(["train", "--config", str(cfg), "--max-epochs", "1"]) == 0
        lines = (tmp_path / "out" / "history.csv").read_text().strip().splitlines()
        assert len(lines) == 2  # header + exactly one epoch

    def test_eval_report_recompute_consistency(self, tmp_path):
        cfg = write_config(tmp_path)
        assert cli_main(["simulate", "--config", str(cfg)]) == 0
        assert cli_main(["train", "--config", str(cfg)]) == 0
        report = json.loads((tmp_path / "out" / "eval_report.json").read_text())
        recomputed = metrics_from_confusion(np.array(report["confusion"]))
        assert report["weighted_accuracy"] == pytest.approx(recomputed.weighted_accuracy, abs=1e-6)
        assert report["macro_f1"] == pytest.approx(recomputed.macro_f1, abs=1e-6)

    def test_report_deterministic_bytes(self, tmp_path):
        cfg = write_config(tmp_path)
        assert cli_main(["simulate", "--config", str(cfg)]) == 0
        assert cli_main(["safety-eval", "--config", str(cfg)]) == 0
        assert cli_main(["report", "--config", str(cfg)]) == 0
        first = sha(tmp_path / "out" / "metrics.json")
        assert cli_main(["report", "--config", str(cfg)]) == 0
        assert sha(tmp_path / "out" / "metrics.json") == first

    def test_run_scenario_and_replay(self, tmp_path):
        cfg = write_config(tmp_path)
        code = cli_main(["run-scenario", "--config", str(cfg), "--scenario", "bundled:scenarios/evening_light.yaml", "--transport", "inproc"])
        assert code == 0
        run_dir = tmp_path / "out" / "evening_light"
        timeline = run_dir / "timeline.jsonl"
        assert timeline.exists()
        devices = read_jsonl(run_dir / "devices.jsonl")
        assert any(d["method"] == "toggle_light" for d in devices)
        assert cli_main(["agent-replay", "--config", str(cfg), "--timeline", str(timeline)]) == 0
        replay = read_jsonl(tmp_path / "out" / "replay_audit.jsonl")
        assert replay and all(r["verdict"] == "pass" for r in replay)

    def test_serve_devices_bounded(self, tmp_path):
        cfg = write_config(tmp_path)
        assert cli_main(["serve-devices", "--config", str(cfg), "--duration", "0.3"]) == 0

    def test_maps_container_roundtrip(self, tmp_path):
        cfg = write_config(tmp_path)
        assert cli_main(["simulate", "--config", str(cfg)]) == 0
        tensors, meta = read_container(tmp_path / "out" / "maps.bin")
        assert meta["map_size"] == 28
        assert tensors["left"].shape[1:] == (28, 28)
        assert tensors["left"].min() >= 0.0 and tensors["left"].max() <= 1.0
