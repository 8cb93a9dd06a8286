"""The Auto-Care decision loop.

One sequential loop per patient: a tick each simulated minute plus
event-driven fall triggers.  Each tick builds the 6-minute context, renders
the canonical prompt, obtains a decision (rule-based reference policy, an
offline stub, or a chat endpoint with rule-based fallback), passes it
through the safety layer, and dispatches only on Pass.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

from ..interaction.dispatch import DeliveryReceipt, IntentArbiter
from ..interaction.voice import Intent
from .context import ContextWindow, build_context
from .llm import BackendUnavailable, EndpointConfig, decide_llm
from .policy import AgentThresholds, DeviceBindings, FallTrigger, decide_rule_based
from .prompts import PromptStyle, render_prompt
from .safety import (
    AgentDecision,
    ParseFailure,
    SafetyVerdict,
    Whitelist,
    decision_to_json,
    default_whitelist,
    parse_decision,
    validate,
)

Backend = Union[str, EndpointConfig, Callable[[str], str]]


@dataclass
class AgentTickResult:
    now_ts: float
    decision: Union[AgentDecision, ParseFailure]
    verdict: SafetyVerdict
    receipts: List[DeliveryReceipt] = field(default_factory=list)
    notifications: List[Dict[str, Any]] = field(default_factory=list)
    fallback_used: bool = False
    wall_latency_ms: float = 0.0


class AgentLoop:
    def __init__(
        self,
        patient_ref: str,
        arbiter: Optional[IntentArbiter] = None,
        backend: Backend = "rule",
        whitelist: Optional[Whitelist] = None,
        thresholds: Optional[AgentThresholds] = None,
        bindings: Optional[DeviceBindings] = None,
        resting_hr: float = 70.0,
        style: PromptStyle = PromptStyle.COT,
        demos: Optional[Sequence[Tuple[Dict, Dict]]] = None,
    ):
        self.patient_ref = patient_ref
        self.arbiter = arbiter
        self.backend = backend
        self.whitelist = whitelist or default_whitelist()
        self.thresholds = thresholds or AgentThresholds()
        self.bindings = bindings or DeviceBindings()
        self.resting_hr = resting_hr
        self.style = style
        self.demos = list(demos) if demos else None
        self.notification_log: List[Dict[str, Any]] = []
        self.audit_log: List[Dict[str, Any]] = []
        self._in_flight = threading.Lock()  # one decision at a time per patient

    # -- decision sources ----------------------------------------------------
    def _rule_decision(self, context: ContextWindow, trigger: Optional[FallTrigger]) -> AgentDecision:
        return decide_rule_based(
            context,
            trigger=trigger,
            thresholds=self.thresholds,
            bindings=self.bindings,
            resting_hr=self.resting_hr,
        )

    def _raw_response(self, prompt: str, context: ContextWindow, trigger: Optional[FallTrigger]) -> Tuple[str, bool]:
        """(raw decision text, fallback_used)."""
        if self.backend == "rule":
            return decision_to_json(self._rule_decision(context, trigger)), False
        if isinstance(self.backend, EndpointConfig):
            try:
                return decide_llm(prompt, self.backend), False
            except BackendUnavailable:
                return decision_to_json(self._rule_decision(context, trigger)), True
        if callable(self.backend):
            return self.backend(prompt), False
        raise TypeError(f"unknown backend {self.backend!r}")

    # -- the tick --------------------------------------------------------------
    def tick(self, records: Sequence, now_ts: float, trigger: Optional[FallTrigger] = None) -> AgentTickResult:
        with self._in_flight:
            t0 = time.monotonic()
            context = build_context(records, now_ts, self.patient_ref)
            prompt = render_prompt(context, self.style, self.demos)
            raw, fallback = self._raw_response(prompt, context, trigger)
            decision = parse_decision(raw)
            verdict = validate(decision, self.whitelist)
            receipts: List[DeliveryReceipt] = []
            notifications: List[Dict[str, Any]] = []
            if verdict.passed:
                receipts, notifications = self.dispatch(decision, now_ts, context)
            wall_ms = (time.monotonic() - t0) * 1000.0
            self.audit_log.append(
                {
                    "now_ts": now_ts,
                    "prompt_sha256": hashlib.sha256(prompt.encode("utf-8")).hexdigest(),
                    "raw_response": raw,
                    "verdict": verdict.status.value,
                    "verdict_reason": verdict.reason,
                    "fallback": fallback,
                    "dispatched_commands": sum(1 for r in receipts if r.success),
                    "notifications": len(notifications),
                    "trigger": None if trigger is None else {"kind": "fall", "responded": trigger.responded},
                }
            )
            return AgentTickResult(
                now_ts=now_ts,
                decision=decision,
                verdict=verdict,
                receipts=receipts,
                notifications=notifications,
                fallback_used=fallback,
                wall_latency_ms=wall_ms,
            )

    def dispatch(self, decision: AgentDecision, now_ts: float, context: Optional[ContextWindow] = None):
        """Route a Pass-ed decision: device commands via guard+client, the rest to the notification log."""
        receipts: List[DeliveryReceipt] = []
        notifications: List[Dict[str, Any]] = []
        for iv in decision.interventions:
            if iv.kind == "device_command":
                if self.arbiter is None:
                    continue
                intent = Intent(
                    target_device=int(iv.device),
                    action=iv.action,
                    params=dict(iv.params or {}),
                    source="agent",
                    issued_ts=now_ts,
                )
                receipts.append(self.arbiter.issue(intent))
            elif iv.kind in ("reminder", "pause_training", "caregiver_alert"):
                entry: Dict[str, Any] = {"ts": now_ts, "kind": iv.kind, "text": iv.text or iv.kind}
                if iv.kind == "caregiver_alert":
                    entry["channel"] = (iv.params or {}).get("channel", self.whitelist.alert_channels[0])
                    if context is not None:
                        entry["context_snapshot"] = [m.to_dict() for m in context.minutes]
                notifications.append(entry)
        self.notification_log.extend(notifications)
        return receipts, notifications

    # -- fall path ---------------------------------------------------------------
    def on_fall(self, records: Sequence, ts_ms: float) -> AgentTickResult:
        """Immediate trigger, bypassing the minute cadence."""
        return self.tick(records, ts_ms, trigger=FallTrigger(ts_ms=ts_ms))

    def fall_followup(self, records: Sequence, ts_ms: float, responded: bool) -> AgentTickResult:
        return self.tick(records, ts_ms, trigger=FallTrigger(ts_ms=ts_ms, responded=responded))

    def write_audit_log(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for entry in self.audit_log:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")

    def write_notification_log(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for entry in self.notification_log:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
