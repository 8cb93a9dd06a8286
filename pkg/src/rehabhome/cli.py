"""Command-line entry points.

Subcommands: simulate, train, eval, serve-devices, run-scenario,
agent-replay, safety-eval, report.  Every command takes --config/--seed/--out
and is deterministic for a fixed (config, seed), wall-clock latency fields
excepted.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .agent.loop import AgentLoop
from .agent.safety import safety_corpus_eval
from .analytics.features import features_to_csv
from .analytics.maps import rasterize_pressure_map
from .config import RunConfig, load_config, resolve_path
from .devices.registry import Registry
from .devices.monitor import poll_once
from .devices.virtual import UdpDeviceServer, make_virtual_device
from .jsonl import read_container, read_timeline, write_container, write_jsonl
from .metrics import build_report, render_table, report_json
from .model.checkpoint import load_checkpoint, save_checkpoint
from .model.data import build_dataset_from_arrays
from .model.evaluate import evaluate
from .model.train import TrainingDiverged, train
from .pipeline import agent_bindings, run_closed_loop, simulate_cohort
from .records import Foot
from .sim.scenario import ScenarioParseError, load_scenario


def _ensure_out(config: RunConfig) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(config: RunConfig) -> int:
    out = _ensure_out(config)
    try:
        result = simulate_cohort(config)
    except ValueError as exc:
        print(f"simulate failed: {exc}", file=sys.stderr)
        return 2

    write_jsonl(out / "timeline.jsonl", result.timeline_rows)
    write_jsonl(
        out / "segments_index.jsonl",
        [
            {
                "patient": s.patient_ref,
                "start_ts": s.start_ts,
                "label": s.label.value,
                "assisted": s.flags.assisted,
                "speed_change": s.flags.speed_change,
            }
            for s in result.segments
        ],
    )

    n = len(result.segments)
    seg_left = np.stack([s.left for s in result.segments]).astype(np.float32) if n else np.zeros((0, 1000, 48), np.float32)
    seg_right = np.stack([s.right for s in result.segments]).astype(np.float32) if n else np.zeros((0, 1000, 48), np.float32)
    labels = np.array([s.label.index for s in result.segments], dtype=np.int32)
    meta = {
        "patients": [s.patient_ref for s in result.segments],
        "start_ts": [s.start_ts for s in result.segments],
        "seed": config.seed,
    }
    write_container(out / "segments.bin", {"left": seg_left, "right": seg_right, "labels": labels}, meta)

    size = config.classifier.map_size
    maps_l = np.zeros((n, size, size), dtype=np.float32)
    maps_r = np.zeros((n, size, size), dtype=np.float32)
    for i, seg in enumerate(result.segments):
        maps_l[i] = rasterize_pressure_map(seg, Foot.LEFT, size, size).values.astype(np.float32)
        maps_r[i] = rasterize_pressure_map(seg, Foot.RIGHT, size, size).values.astype(np.float32)
    write_container(out / "maps.bin", {"left": maps_l, "right": maps_r, "labels": labels}, {"map_size": size, "seed": config.seed})

    features_to_csv(result.features, out / "features.csv")
    (out / "sim_counters.json").write_text(json.dumps(result.counters, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    (out / "cohort.json").write_text(
        json.dumps(
            [
                {"id": p.id, "age": p.age, "sex": p.sex, "bmi": p.bmi, "fma": p.fma_score, "level": p.level.value, "symptoms": p.symptoms}
                for p in result.patients
            ],
            sort_keys=True,
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    per_class = {lvl: int((labels == i).sum()) for i, lvl in enumerate(("mild", "moderate", "severe"))}
    print(f"simulate: {len(result.patients)} patients, {n} accepted segments {per_class} -> {out}")
    return 0


def cmd_train(config: RunConfig, max_epochs: int | None = None) -> int:
    out = _ensure_out(config)
    maps_path = out / "maps.bin"
    if not maps_path.exists():
        print(f"train: missing {maps_path}; run simulate first", file=sys.stderr)
        return 2
    tensors, meta = read_container(maps_path)
    if int(meta["map_size"]) != config.classifier.map_size:
        print(f"train: maps were rasterized at {meta['map_size']}, config wants {config.classifier.map_size}", file=sys.stderr)
        return 2
    try:
        dataset = build_dataset_from_arrays(tensors["left"], tensors["right"], tensors["labels"], seed=config.seed)
    except ValueError as exc:
        print(f"train failed: {exc}", file=sys.stderr)
        return 2
    model_config = config.classifier
    if max_epochs is not None:
        from dataclasses import replace

        model_config = replace(model_config, max_epochs=max_epochs)
    try:
        trained = train(model_config, dataset)
    except TrainingDiverged as exc:
        print(f"train diverged: {exc}", file=sys.stderr)
        (out / "history.csv").write_text(
            "epoch,train_loss,val_loss\n"
            + "".join(f"{r['epoch']},{r['train_loss']},{r['val_loss']}\n" for r in exc.history),
            encoding="utf-8",
        )
        return 3
    save_checkpoint(trained.net, out / "checkpoint.bin")
    (out / "history.csv").write_text(trained.history_csv(), encoding="utf-8")
    report = evaluate(trained.net, dataset)
    (out / "eval_report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    print(
        f"train: {trained.epochs_run} epochs (best {trained.best_epoch}), "
        f"weighted acc {report.weighted_accuracy:.3f}, macro F1 {report.macro_f1:.3f}"
    )
    return 0


def cmd_eval(config: RunConfig, checkpoint: str | None = None) -> int:
    out = _ensure_out(config)
    ckpt_path = Path(checkpoint) if checkpoint else out / "checkpoint.bin"
    maps_path = out / "maps.bin"
    if not ckpt_path.exists() or not maps_path.exists():
        print("eval: need maps.bin and checkpoint.bin (run simulate + train)", file=sys.stderr)
        return 2
    net = load_checkpoint(ckpt_path)
    tensors, _ = read_container(maps_path)
    dataset = build_dataset_from_arrays(tensors["left"], tensors["right"], tensors["labels"], seed=config.seed)
    report = evaluate(net, dataset)
    (out / "eval_report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    print(f"eval: weighted acc {report.weighted_accuracy:.3f}, macro F1 {report.macro_f1:.3f}")
    return 0


def cmd_serve_devices(config: RunConfig, duration_s: float | None = None) -> int:
    registry = Registry.load(config.registry_path)
    servers = []
    try:
        for descriptor in registry.devices.values():
            device = make_virtual_device(descriptor)
            server = UdpDeviceServer(device).start()
            servers.append(server)
            print(f"serving {descriptor.kind} id={descriptor.device_id} on udp://{server.address[0]}:{server.address[1]}")
    except OSError as exc:
        for server in servers:
            server.stop()
        print(f"serve-devices: {exc}", file=sys.stderr)
        return 2
    try:
        if duration_s is None:
            while True:
                time.sleep(1.0)
        else:
            time.sleep(duration_s)
    except KeyboardInterrupt:
        pass
    finally:
        for server in servers:
            server.stop()
    return 0


def cmd_run_scenario(config: RunConfig, scenario: str | None, transport: str = "udp") -> int:
    out = _ensure_out(config)
    paths = [resolve_path(scenario)] if scenario else config.scenario_paths
    registry = Registry.load(config.registry_path)
    for path in paths:
        try:
            script = load_scenario(path)
        except ScenarioParseError as exc:
            print(f"run-scenario: {path}: {exc}", file=sys.stderr)
            return 2
        result = run_closed_loop(script, registry, config.agent, transport=transport)
        prefix = Path(path).stem
        run_dir = out / prefix
        run_dir.mkdir(parents=True, exist_ok=True)
        rows = [r.to_dict() for r in result.gateway.timeline.records
                if config.log_pressure_frames or r.modality.value != "pressure"]
        write_jsonl(run_dir / "timeline.jsonl", rows)
        write_jsonl(run_dir / "intents.jsonl", [r.to_dict() for r in result.receipts])
        write_jsonl(run_dir / "notifications.jsonl", result.notifications)
        write_jsonl(run_dir / "audit.jsonl", result.audit)
        write_jsonl(run_dir / "devices.jsonl", [e for log in result.device_logs.values() for e in log])
        write_jsonl(run_dir / "nomatch.jsonl", result.no_matches)
        print(
            f"run-scenario {prefix}: {len(result.receipts)} intents, "
            f"{len(result.notifications)} notifications, "
            f"{sum(len(v) for v in result.device_logs.values())} device commands -> {run_dir}"
        )
    return 0


def cmd_agent_replay(config: RunConfig, timeline: str) -> int:
    out = _ensure_out(config)
    path = Path(timeline)
    if not path.exists():
        print(f"agent-replay: timeline not found: {path}", file=sys.stderr)
        return 2
    records = read_timeline(path)
    if not records:
        print("agent-replay: empty timeline", file=sys.stderr)
        return 2
    registry = Registry.load(config.registry_path)
    loop = AgentLoop(
        patient_ref="replay",
        arbiter=None,
        backend="rule",
        thresholds=config.agent.thresholds,
        bindings=agent_bindings(registry),
        style=config.agent.style,
    )
    end_ts = max(r.ts_ms for r in records)
    minute = 60_000
    for now in range(minute, int(end_ts) + 1, minute):
        loop.tick(records, float(now))
    loop.write_audit_log(out / "replay_audit.jsonl")
    loop.write_notification_log(out / "replay_notifications.jsonl")
    print(f"agent-replay: {len(loop.audit_log)} ticks -> {out}")
    return 0


def cmd_safety_eval(config: RunConfig) -> int:
    out = _ensure_out(config)
    result = safety_corpus_eval(config.safety_corpus)
    (out / "safety_eval.json").write_text(json.dumps(result, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(
        f"safety-eval: {result['detected']}/{result['erroneous']} erroneous outputs detected, "
        f"{result['false_activations']} false activations over {result['total']} items"
    )
    return 0 if (result["detected"] == result["erroneous"] and result["false_activations"] == 0) else 1


def cmd_report(config: RunConfig) -> int:
    out = _ensure_out(config)
    report = build_report(out)
    (out / "metrics.json").write_text(report_json(report), encoding="utf-8")
    table = render_table(report)
    (out / "metrics.txt").write_text(table, encoding="utf-8")
    print(table, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rehabhome", description="Desk-scale smart-home rehabilitation platform")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="run configuration YAML")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="override output directory")

    common(sub.add_parser("simulate", help="generate cohort dataset + timeline artifacts"))

    p_train = sub.add_parser("train", help="train the impairment classifier on simulate artifacts")
    common(p_train)
    p_train.add_argument("--max-epochs", type=int, default=None)

    p_eval = sub.add_parser("eval", help="evaluate a trained checkpoint")
    common(p_eval)
    p_eval.add_argument("--checkpoint", default=None)

    p_serve = sub.add_parser("serve-devices", help="run virtual appliances on their registry ports")
    common(p_serve)
    p_serve.add_argument("--duration", type=float, default=None, help="serve for N seconds then exit")

    p_run = sub.add_parser("run-scenario", help="closed-loop scenario execution against virtual devices")
    common(p_run)
    p_run.add_argument("--scenario", default=None, help="scenario path (default: all configured scenarios)")
    p_run.add_argument("--transport", choices=("udp", "inproc"), default="udp")

    p_replay = sub.add_parser("agent-replay", help="re-run agent decisions over a saved timeline")
    common(p_replay)
    p_replay.add_argument("--timeline", required=True)

    common(sub.add_parser("safety-eval", help="run the bundled safety corpus through parse+validate"))
    common(sub.add_parser("report", help="aggregate run logs into a metrics report"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, seed=args.seed, out=args.out)
    except (FileNotFoundError, ValueError, ScenarioParseError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.command == "simulate":
        return cmd_simulate(config)
    if args.command == "train":
        return cmd_train(config, max_epochs=args.max_epochs)
    if args.command == "eval":
        return cmd_eval(config, checkpoint=args.checkpoint)
    if args.command == "serve-devices":
        return cmd_serve_devices(config, duration_s=args.duration)
    if args.command == "run-scenario":
        return cmd_run_scenario(config, scenario=args.scenario, transport=args.transport)
    if args.command == "agent-replay":
        return cmd_agent_replay(config, timeline=args.timeline)
    if args.command == "safety-eval":
        return cmd_safety_eval(config)
    if args.command == "report":
        return cmd_report(config)
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
