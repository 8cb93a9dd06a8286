"""Rule-based fallback guard between intents and devices.

Denies duplicate triggers (same device+action+params inside the debounce
window), conflicting commands (opposing parameter values or configured
action pairs inside the debounce window), and per-device rate-limit
violations.  Pure function of (intent, history, policy).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple


class DenyReason(Enum):
    DUPLICATE = "duplicate"
    CONFLICT = "conflict"
    RATE_LIMIT = "rate_limit"


@dataclass
class GuardPolicy:
    debounce_ms: float = 2000.0
    max_commands_per_minute: int = 10
    # param key -> set of mutually conflicting values
    conflicting_params: Dict[str, Tuple[Any, ...]] = field(default_factory=lambda: {"power": ("on", "off")})
    conflicting_action_pairs: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        if self.debounce_ms < 0:
            raise ValueError("debounce must be >= 0")


@dataclass
class CommandRecord:
    ts_ms: float
    device_id: int
    action: str
    params: Dict[str, Any]


@dataclass
class GuardDecision:
    allowed: bool
    reason: Optional[DenyReason] = None
    detail: str = ""


def _params_conflict(a: Dict[str, Any], b: Dict[str, Any], policy: GuardPolicy) -> bool:
    for key, values in policy.conflicting_params.items():
        if key in a and key in b and a[key] != b[key] and a[key] in values and b[key] in values:
            return True
    return False


def guard(
    ts_ms: float,
    device_id: int,
    action: str,
    params: Dict[str, Any],
    history: Sequence[CommandRecord],
    policy: Optional[GuardPolicy] = None,
) -> GuardDecision:
    policy = policy or GuardPolicy()
    recent = [r for r in history if r.device_id == device_id and 0 <= ts_ms - r.ts_ms]

    for record in recent:
        if ts_ms - record.ts_ms > policy.debounce_ms:
            continue
        if record.action == action and record.params == params:
            return GuardDecision(False, DenyReason.DUPLICATE, f"same command {action} within debounce")
        if record.action == action and _params_conflict(record.params, params, policy):
            return GuardDecision(False, DenyReason.CONFLICT, f"conflicting {action} parameters within debounce")
        pair = (record.action, action)
        if pair in policy.conflicting_action_pairs or pair[::-1] in policy.conflicting_action_pairs:
            return GuardDecision(False, DenyReason.CONFLICT, f"conflicting actions {pair} within debounce")

    in_minute = [r for r in recent if ts_ms - r.ts_ms <= 60_000.0]
    if len(in_minute) >= policy.max_commands_per_minute:
        return GuardDecision(False, DenyReason.RATE_LIMIT, f"{len(in_minute)} commands in the last minute")
    return GuardDecision(True)
