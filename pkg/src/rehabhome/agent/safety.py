"""Decision parsing and the safety layer.

Parsing is strict: the raw text must be a JSON object matching the required
output schema exactly, unknown fields anywhere are rejected.  Validation
runs structural checks first (completeness, internal conflicts), then the
whitelist check (action vocabulary + parameter constraints + alert
channels).  The first failure wins.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from ..devices.registry import CAPABILITIES, validate_param

INTERVENTION_KINDS = ("reminder", "device_command", "caregiver_alert", "pause_training", "none")
_INTERVENTION_FIELDS = {"kind", "text", "device", "action", "params"}
_TOP_FIELDS = {"interventions", "rationale"}
DEFAULT_ALERT_CHANNELS = ("caregiver_app", "sms")
_CONFLICTING_PARAM_VALUES = {"power": ("on", "off")}


@dataclass
class Intervention:
    kind: str
    text: Optional[str] = None
    device: Optional[str] = None
    action: Optional[str] = None
    params: Optional[Dict[str, Any]] = None

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"kind": self.kind}
        for name in ("text", "device", "action", "params"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out


@dataclass
class AgentDecision:
    interventions: List[Intervention]
    rationale: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"interventions": [iv.to_dict() for iv in self.interventions]}
        if self.rationale is not None:
            out["rationale"] = self.rationale
        return out


def decision_to_json(decision: AgentDecision) -> str:
    return json.dumps(decision.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass
class ParseFailure:
    reason: str
    position: str = ""


def parse_decision(raw: str) -> Union[AgentDecision, ParseFailure]:
    """Strict parse of a raw model response against the output schema."""
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        return ParseFailure(reason=f"invalid JSON: {exc.msg}", position=f"char {exc.pos}")
    if not isinstance(data, dict):
        return ParseFailure(reason="decision must be a JSON object", position="$")
    unknown = set(data) - _TOP_FIELDS
    if unknown:
        return ParseFailure(reason=f"unknown field {sorted(unknown)[0]!r}", position="$")
    if "interventions" not in data:
        return ParseFailure(reason="missing field 'interventions'", position="$")
    if not isinstance(data["interventions"], list):
        return ParseFailure(reason="'interventions' must be a list", position="$.interventions")
    rationale = data.get("rationale")
    if rationale is not None and not isinstance(rationale, str):
        return ParseFailure(reason="'rationale' must be a string", position="$.rationale")

    interventions: List[Intervention] = []
    for i, item in enumerate(data["interventions"]):
        where = f"$.interventions[{i}]"
        if not isinstance(item, dict):
            return ParseFailure(reason="intervention must be an object", position=where)
        unknown = set(item) - _INTERVENTION_FIELDS
        if unknown:
            return ParseFailure(reason=f"unknown field {sorted(unknown)[0]!r}", position=where)
        kind = item.get("kind")
        if kind not in INTERVENTION_KINDS:
            return ParseFailure(reason=f"unknown intervention kind {kind!r}", position=where)
        text = item.get("text")
        if text is not None and not isinstance(text, str):
            return ParseFailure(reason="'text' must be a string", position=where)
        device = item.get("device")
        if device is not None and not isinstance(device, str):
            return ParseFailure(reason="'device' must be a string", position=where)
        action = item.get("action")
        if action is not None and not isinstance(action, str):
            return ParseFailure(reason="'action' must be a string", position=where)
        params = item.get("params")
        if params is not None and not isinstance(params, dict):
            return ParseFailure(reason="'params' must be an object", position=where)
        interventions.append(Intervention(kind=kind, text=text, device=device, action=action, params=params))
    return AgentDecision(interventions=interventions, rationale=rationale)


class VerdictStatus(Enum):
    PASS = "pass"
    REJECT_STRUCTURAL = "reject_structural"
    REJECT_WHITELIST = "reject_whitelist"


@dataclass
class SafetyVerdict:
    status: VerdictStatus
    reason: str = ""
    offending: str = ""

    @property
    def passed(self) -> bool:
        return self.status is VerdictStatus.PASS


@dataclass
class Whitelist:
    """Closed action vocabulary with parameter constraints + allowed alert channels."""

    allowed: Dict[str, Dict[str, tuple]]
    alert_channels: Tuple[str, ...] = DEFAULT_ALERT_CHANNELS


def default_whitelist() -> Whitelist:
    allowed: Dict[str, Dict[str, tuple]] = {}
    for kind_schema in CAPABILITIES.values():
        for action, (param_keys, constraints) in kind_schema.items():
            allowed[action] = {k: constraints[k] for k in param_keys}
    return Whitelist(allowed=allowed)


def _structural_check(decision: AgentDecision) -> Optional[SafetyVerdict]:
    commands: List[Intervention] = []
    for i, iv in enumerate(decision.interventions):
        where = f"interventions[{i}]"
        if iv.kind == "device_command":
            if not iv.device or not iv.action or iv.params is None:
                return SafetyVerdict(VerdictStatus.REJECT_STRUCTURAL,
                                     reason="device_command needs device, action, and params", offending=where)
            commands.append(iv)
        elif iv.kind in ("reminder", "caregiver_alert"):
            if not iv.text:
                return SafetyVerdict(VerdictStatus.REJECT_STRUCTURAL,
                                     reason=f"{iv.kind} needs text", offending=where)
    # internal conflicts: same device commanded to opposing values in one decision
    for a in range(len(commands)):
        for b in range(a + 1, len(commands)):
            iva, ivb = commands[a], commands[b]
            if iva.device != ivb.device:
                continue
            if iva.action == ivb.action and iva.params != ivb.params:
                for key, values in _CONFLICTING_PARAM_VALUES.items():
                    pa, pb = (iva.params or {}).get(key), (ivb.params or {}).get(key)
                    if pa in values and pb in values and pa != pb:
                        return SafetyVerdict(VerdictStatus.REJECT_STRUCTURAL,
                                             reason=f"conflicting {iva.action} commands for device {iva.device}",
                                             offending=f"interventions[{a}]/interventions[{b}]")
    return None


def _whitelist_check(decision: AgentDecision, whitelist: Whitelist) -> Optional[SafetyVerdict]:
    for i, iv in enumerate(decision.interventions):
        where = f"interventions[{i}]"
        if iv.kind == "device_command":
            if iv.action not in whitelist.allowed:
                return SafetyVerdict(VerdictStatus.REJECT_WHITELIST,
                                     reason=f"action {iv.action!r} not whitelisted", offending=iv.action or where)
            constraints = whitelist.allowed[iv.action]
            params = iv.params or {}
            if set(params) != set(constraints):
                return SafetyVerdict(VerdictStatus.REJECT_WHITELIST,
                                     reason=f"params for {iv.action!r} must be exactly {sorted(constraints)}",
                                     offending=iv.action)
            for key, value in params.items():
                if not validate_param(constraints[key], value):
                    return SafetyVerdict(VerdictStatus.REJECT_WHITELIST,
                                         reason=f"parameter {key}={value!r} outside constraints", offending=iv.action)
        elif iv.kind == "caregiver_alert":
            channel = (iv.params or {}).get("channel")
            if channel is not None and channel not in whitelist.alert_channels:
                return SafetyVerdict(VerdictStatus.REJECT_WHITELIST,
                                     reason=f"alert channel {channel!r} not allowed", offending=str(channel))
    return None


def validate(decision: Union[AgentDecision, ParseFailure], whitelist: Optional[Whitelist] = None) -> SafetyVerdict:
    """Structural checks, then whitelist checks; parse failures reject structurally."""
    if isinstance(decision, ParseFailure):
        return SafetyVerdict(VerdictStatus.REJECT_STRUCTURAL,
                             reason=f"parse failure: {decision.reason}", offending=decision.position)
    whitelist = whitelist or default_whitelist()
    verdict = _structural_check(decision)
    if verdict is not None:
        return verdict
    verdict = _whitelist_check(decision, whitelist)
    if verdict is not None:
        return verdict
    return SafetyVerdict(VerdictStatus.PASS)


def safety_corpus_eval(corpus_dir, whitelist: Optional[Whitelist] = None) -> Dict[str, Any]:
    """Run parse+validate over a directory of numbered corpus files.

    Each file holds {"id", "raw", "expected": "pass"|"reject_structural"|"reject_whitelist", "label"}.
    Returns detection counts: erroneous items caught and valid items wrongly rejected.
    """
    whitelist = whitelist or default_whitelist()
    paths = sorted(Path(corpus_dir).glob("*.json"))
    if not paths:
        raise FileNotFoundError(f"no corpus files under {corpus_dir}")
    detected = 0
    false_activations = 0
    missed: List[int] = []
    items = []
    for path in paths:
        entry = json.loads(path.read_text(encoding="utf-8"))
        verdict = validate(parse_decision(entry["raw"]), whitelist)
        expected_pass = entry["expected"] == "pass"
        if expected_pass and not verdict.passed:
            false_activations += 1
        if not expected_pass:
            if verdict.passed:
                missed.append(entry["id"])
            else:
                detected += 1
        items.append({"id": entry["id"], "label": entry.get("label", ""), "expected": entry["expected"],
                      "verdict": verdict.status.value})
    return {
        "total": len(paths),
        "erroneous": sum(1 for it in items if it["expected"] != "pass"),
        "detected": detected,
        "false_activations": false_activations,
        "missed_ids": missed,
        "items": items,
    }
