"""Run reports: aggregate the JSONL/JSON artifacts of a run directory into
one MetricsReport (JSON + human-readable table).

Reports are pure functions of the logs on disk, so re-running `report` over
the same directory reproduces identical bytes.  Wall-clock latency numbers
live in their own section and are excluded from artifact digests.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional

from .jsonl import read_jsonl


def _latency_stats(latencies: List[float]) -> Dict[str, Any]:
    if not latencies:
        return {"n": 0, "mean_ms": None, "sd_ms": None, "p95_ms": None}
    n = len(latencies)
    mean = sum(latencies) / n
    sd = math.sqrt(sum((x - mean) ** 2 for x in latencies) / n)
    ordered = sorted(latencies)
    p95 = ordered[min(n - 1, max(0, math.ceil(0.95 * n) - 1))]
    return {"n": n, "mean_ms": round(mean, 3), "sd_ms": round(sd, 3), "p95_ms": round(p95, 3)}


def build_report(out_dir) -> Dict[str, Any]:
    out = Path(out_dir)
    report: Dict[str, Any] = {"sections": {}, "incomplete": []}

    intents_path = out / "intents.jsonl"
    if intents_path.exists():
        receipts = read_jsonl(intents_path)
        dispatched = [r for r in receipts if not r.get("guard_denied")]
        successes = [r for r in dispatched if r.get("success")]
        first_try = [r for r in successes if r.get("retries", 0) == 0]
        latencies = [r["latency_ms"] for r in successes]
        report["sections"]["intents"] = {
            "total": len(receipts),
            "dispatched": len(dispatched),
            "guard_denied": sum(1 for r in receipts if r.get("guard_denied")),
            "successes": len(successes),
            "first_try_rate": round(len(first_try) / len(dispatched), 6) if dispatched else None,
            "after_retry_rate": round(len(successes) / len(dispatched), 6) if dispatched else None,
            "latency": _latency_stats(latencies),
        }
    else:
        report["incomplete"].append("intents")

    counters_path = out / "sim_counters.json"
    if counters_path.exists():
        report["sections"]["simulation"] = json.loads(counters_path.read_text(encoding="utf-8"))
    else:
        report["incomplete"].append("simulation")

    eval_path = out / "eval_report.json"
    if eval_path.exists():
        report["sections"]["classifier"] = json.loads(eval_path.read_text(encoding="utf-8"))
    else:
        report["incomplete"].append("classifier")

    safety_path = out / "safety_eval.json"
    if safety_path.exists():
        safety = json.loads(safety_path.read_text(encoding="utf-8"))
        safety.pop("items", None)
        report["sections"]["safety"] = safety
    else:
        report["incomplete"].append("safety")

    audit_path = out / "audit.jsonl"
    if audit_path.exists():
        audit = read_jsonl(audit_path)
        report["sections"]["agent"] = {
            "ticks": len(audit),
            "fallbacks": sum(1 for a in audit if a.get("fallback")),
            "verdicts": {
                status: sum(1 for a in audit if a.get("verdict") == status)
                for status in ("pass", "reject_structural", "reject_whitelist")
            },
            "dispatched_commands": sum(a.get("dispatched_commands", 0) for a in audit),
            "notifications": sum(a.get("notifications", 0) for a in audit),
        }

    poll_path = out / "poll_events.jsonl"
    if poll_path.exists():
        events = read_jsonl(poll_path)
        report["sections"]["devices"] = {
            "reconciliation_events": sum(1 for e in events if e.get("type") == "reconciliation"),
            "offline_transitions": sum(1 for e in events if e.get("type") == "offline"),
        }

    return report


def report_json(report: Dict[str, Any]) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def render_table(report: Dict[str, Any]) -> str:
    lines: List[str] = ["run report", "=" * 54]
    sections = report["sections"]
    if "intents" in sections:
        s = sections["intents"]
        lat = s["latency"]
        lines.append("intents")
        lines.append(f"  dispatched / total        {s['dispatched']} / {s['total']}")
        lines.append(f"  guard denied              {s['guard_denied']}")
        lines.append(f"  first-try success rate    {s['first_try_rate']}")
        lines.append(f"  after-retry success rate  {s['after_retry_rate']}")
        if lat["n"]:
            lines.append(f"  latency mean/sd/p95 (ms)  {lat['mean_ms']} / {lat['sd_ms']} / {lat['p95_ms']}")
    if "simulation" in sections:
        s = sections["simulation"]
        lines.append("simulation")
        for key in sorted(s):
            lines.append(f"  {key:<26}{s[key]}")
    if "classifier" in sections:
        c = sections["classifier"]
        lines.append("classifier")
        lines.append(f"  weighted accuracy         {c.get('weighted_accuracy')}")
        lines.append(f"  macro precision/recall    {c.get('macro_precision')} / {c.get('macro_recall')}")
        lines.append(f"  macro f1                  {c.get('macro_f1')}")
        lines.append(f"  confusion                 {c.get('confusion')}")
    if "safety" in sections:
        s = sections["safety"]
        lines.append("safety corpus")
        lines.append(f"  detected / erroneous      {s.get('detected')} / {s.get('erroneous')}")
        lines.append(f"  false activations         {s.get('false_activations')}")
    if "agent" in sections:
        a = sections["agent"]
        lines.append("agent")
        lines.append(f"  ticks (fallbacks)         {a['ticks']} ({a['fallbacks']})")
        lines.append(f"  verdicts                  {a['verdicts']}")
        lines.append(f"  dispatched commands       {a['dispatched_commands']}")
        lines.append(f"  notifications             {a['notifications']}")
    if "devices" in sections:
        d = sections["devices"]
        lines.append("devices")
        lines.append(f"  reconciliation events     {d['reconciliation_events']}")
        lines.append(f"  offline transitions       {d['offline_transitions']}")
    if report["incomplete"]:
        lines.append(f"incomplete sections: {', '.join(report['incomplete'])}")
    return "\n".join(lines) + "\n"
