from .context import ContextWindow, MinuteSummary, build_context
from .prompts import PromptStyle, render_prompt
from .policy import AgentThresholds, DeviceBindings, FallTrigger, decide_rule_based
from .safety import (
    AgentDecision,
    Intervention,
    ParseFailure,
    SafetyVerdict,
    VerdictStatus,
    Whitelist,
    decision_to_json,
    default_whitelist,
    parse_decision,
    safety_corpus_eval,
    validate,
)
from .llm import BackendUnavailable, EndpointConfig, StubBackend, build_chat_request, decide_llm
from .loop import AgentLoop, AgentTickResult

__all__ = [
    "ContextWindow",
    "MinuteSummary",
    "build_context",
    "PromptStyle",
    "render_prompt",
    "AgentThresholds",
    "DeviceBindings",
    "FallTrigger",
    "decide_rule_based",
    "AgentDecision",
    "Intervention",
    "ParseFailure",
    "SafetyVerdict",
    "VerdictStatus",
    "Whitelist",
    "decision_to_json",
    "default_whitelist",
    "parse_decision",
    "safety_corpus_eval",
    "validate",
    "BackendUnavailable",
    "EndpointConfig",
    "StubBackend",
    "build_chat_request",
    "decide_llm",
    "AgentLoop",
    "AgentTickResult",
]
