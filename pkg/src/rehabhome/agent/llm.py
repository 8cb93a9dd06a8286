"""Optional chat-completions backend.

The decision loop works offline with the rule-based policy; when an
endpoint is configured, prompts go out as chat requests with temperature
0.7 and any transport failure degrades to the rule-based fallback (logged
by the caller).  The API key is read from an environment variable, never
from config files.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Any, Dict, Optional

import requests

SYSTEM_DIRECTIVE = (
    "You are a home rehabilitation assistance agent. Read the JSON context and reply "
    "with exactly one JSON object matching required_output_schema."
)


class BackendUnavailable(ConnectionError):
    pass


@dataclass
class EndpointConfig:
    url: str
    model: str
    api_key_env: str = "AUTOCARE_API_KEY"
    temperature: float = 0.7
    timeout_s: float = 10.0


def build_chat_request(prompt_json: str, config: EndpointConfig) -> Dict[str, Any]:
    return {
        "model": config.model,
        "temperature": config.temperature,
        "messages": [
            {"role": "system", "content": SYSTEM_DIRECTIVE},
            {"role": "user", "content": prompt_json},
        ],
    }


def decide_llm(prompt_json: str, config: EndpointConfig) -> str:
    """POST the prompt; returns the assistant text or raises BackendUnavailable."""
    headers = {"Content-Type": "application/json"}
    key = os.environ.get(config.api_key_env, "")
    if key:
        headers["Authorization"] = f"Bearer {key}"
    try:
        response = requests.post(config.url, json=build_chat_request(prompt_json, config),
                                 headers=headers, timeout=config.timeout_s)
        response.raise_for_status()
        body = response.json()
        return body["choices"][0]["message"]["content"]
    except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
        raise BackendUnavailable(f"chat endpoint failed: {exc}")


class StubBackend:
    """Offline stand-in returning a fixed raw response (tests, replay)."""

    def __init__(self, response: str):
        self.response = response
        self.prompts: list = []

    def __call__(self, prompt_json: str) -> str:
        self.prompts.append(prompt_json)
        return self.response
