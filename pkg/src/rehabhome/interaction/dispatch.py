"""Intent dispatch: per-device serialization, guard, retry, latency metering."""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

from ..devices.client import DeviceError, MiioClient, Unreachable
from ..devices.guard import CommandRecord, GuardPolicy, guard
from ..records import ActivityState
from .voice import Intent


@dataclass
class DeliveryReceipt:
    intent: Intent
    success: bool
    ack_ts: float = 0.0
    latency_ms: float = 0.0
    retries: int = 0
    guard_denied: bool = False
    deny_reason: str = ""
    error: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "device": self.intent.target_device,
            "action": self.intent.action,
            "params": self.intent.params,
            "source": self.intent.source,
            "issued_ts": self.intent.issued_ts,
            "success": self.success,
            "latency_ms": round(self.latency_ms, 3),
            "retries": self.retries,
            "guard_denied": self.guard_denied,
            "deny_reason": self.deny_reason,
            "error": self.error,
        }


class IntentArbiter:
    """Serializes command dispatch per device and applies the fallback guard."""

    def __init__(self, clients: Dict[int, MiioClient], policy: Optional[GuardPolicy] = None):
        self.clients = clients
        self.policy = policy or GuardPolicy()
        self.history: List[CommandRecord] = []
        self.receipts: List[DeliveryReceipt] = []
        self._device_locks: Dict[int, threading.Lock] = {d: threading.Lock() for d in clients}
        self._history_lock = threading.Lock()

    def _params_list(self, intent: Intent) -> List[Any]:
        client = self.clients[intent.target_device]
        schema = client.descriptor.capabilities
        if intent.action not in schema:
            raise DeviceError(-2, f"action {intent.action!r} outside capability schema")
        param_keys, _ = schema[intent.action]
        try:
            return [intent.params[k] for k in param_keys]
        except KeyError as exc:
            raise DeviceError(-3, f"missing parameter {exc}")

    def issue(self, intent: Intent) -> DeliveryReceipt:
        """Dispatch with one automatic retry on timeout; wall-clock latency recorded."""
        if intent.target_device not in self.clients:
            receipt = DeliveryReceipt(intent, success=False, error="unknown device")
            self.receipts.append(receipt)
            return receipt
        with self._history_lock:
            decision = guard(intent.issued_ts, intent.target_device, intent.action, intent.params, self.history, self.policy)
            if decision.allowed:
                self.history.append(CommandRecord(intent.issued_ts, intent.target_device, intent.action, dict(intent.params)))
        if not decision.allowed:
            receipt = DeliveryReceipt(intent, success=False, guard_denied=True, deny_reason=decision.reason.value)
            self.receipts.append(receipt)
            return receipt

        client = self.clients[intent.target_device]
        lock = self._device_locks[intent.target_device]
        t0 = time.monotonic()
        retries_before = client.retry_count
        try:
            with lock:
                params = self._params_list(intent)
                client.send_command(intent.action, params)
            latency_ms = (time.monotonic() - t0) * 1000.0
            receipt = DeliveryReceipt(
                intent,
                success=True,
                ack_ts=intent.issued_ts + latency_ms,
                latency_ms=latency_ms,
                retries=client.retry_count - retries_before,
            )
        except (Unreachable, DeviceError) as exc:
            latency_ms = (time.monotonic() - t0) * 1000.0
            receipt = DeliveryReceipt(
                intent,
                success=False,
                latency_ms=latency_ms,
                retries=client.retry_count - retries_before,
                error=str(exc),
            )
        self.receipts.append(receipt)
        return receipt

    def write_log(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for receipt in self.receipts:
                fh.write(json.dumps(receipt.to_dict(), sort_keys=True) + "\n")


class ActionStateRouter:
    """Routes activity-state transitions; `falling` triggers the agent immediately."""

    def __init__(self, on_fall: Optional[Callable[[float], None]] = None):
        self.states: List[Dict[str, Any]] = []
        self.on_fall = on_fall

    def on_state(self, ts_ms: float, state: ActivityState, transition: bool = True) -> None:
        self.states.append({"ts_ms": ts_ms, "state": state.value, "transition": transition})
        if transition and state is ActivityState.FALLING and self.on_fall is not None:
            self.on_fall(ts_ms)
