"""Prompt rendering: canonical JSON with a fixed schema.

The prompt is a single JSON document (sorted keys, no whitespace variance)
so identical inputs produce byte-identical prompts; the required output
schema rides along inside the prompt for self-describing requests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .context import ContextWindow

SCHEMA_VERSION = 1

REQUIRED_OUTPUT_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "fields": {
        "interventions": {
            "required": True,
            "type": "list",
            "item_fields": {
                "kind": {"required": True, "enum": ["reminder", "device_command", "caregiver_alert", "pause_training", "none"]},
                "text": {"required": False, "type": "string"},
                "device": {"required": False, "type": "string"},
                "action": {"required": False, "type": "string"},
                "params": {"required": False, "type": "object"},
            },
        },
        "rationale": {"required": False, "type": "string"},
    },
    "unknown_fields": "reject",
}


class PromptStyle(Enum):
    BASIC = "basic"
    COT = "cot"
    COT_WITH_DEMOS = "cot_with_demos"


_DIRECTIVES = {
    PromptStyle.BASIC: [
        "Decide which interventions, if any, the assistance agent should take now.",
        "Respond with a single JSON object matching required_output_schema exactly.",
    ],
    PromptStyle.COT: [
        "Reason step by step about the physiological trend, ambient conditions, and activity before deciding.",
        "After reasoning, respond with a single JSON object matching required_output_schema exactly.",
    ],
}
_DIRECTIVES[PromptStyle.COT_WITH_DEMOS] = _DIRECTIVES[PromptStyle.COT] + [
    "Follow the decision pattern shown in the demos for recurring situations.",
]


def render_prompt(
    context: ContextWindow,
    style: PromptStyle = PromptStyle.BASIC,
    demos: Optional[Sequence[Tuple[Dict[str, Any], Dict[str, Any]]]] = None,
) -> str:
    """Canonical JSON prompt; demos are (context sketch, expected decision) pairs."""
    if style is PromptStyle.COT_WITH_DEMOS:
        if not demos:
            raise ValueError("cot_with_demos style requires at least one demo")
    elif demos:
        raise ValueError(f"demos are only allowed with cot_with_demos, not {style.value}")

    payload: Dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "patient": context.patient_ref,
        "now_ts": context.now_ts,
        "clock_s": context.clock_s,
        "window": [m.to_dict() for m in context.minutes],
        "style": {"name": style.value, "directives": _DIRECTIVES[style]},
        "required_output_schema": REQUIRED_OUTPUT_SCHEMA,
    }
    if style is PromptStyle.COT_WITH_DEMOS:
        payload["demos"] = [{"context": sketch, "decision": decision} for sketch, decision in demos]
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
