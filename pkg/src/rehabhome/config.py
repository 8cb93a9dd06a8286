"""Run configuration: one YAML file drives every CLI command.

`bundled:<name>` paths resolve into the package data directory, so demo
runs work from a clean checkout.  Secrets (the chat endpoint key) come from
the environment, never from the file.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from .agent.llm import EndpointConfig
from .agent.policy import AgentThresholds
from .agent.prompts import PromptStyle
from .model.network import ModelConfig

LEVEL_KEYS = ("mild", "moderate", "severe")


def resolve_path(spec: str) -> Path:
    if spec.startswith("bundled:"):
        root = importlib.resources.files("rehabhome").joinpath("data")
        return Path(str(root.joinpath(spec[len("bundled:"):])))
    return Path(spec)


@dataclass
class AgentConfig:
    backend: str = "rule"  # "rule" or "llm"
    style: PromptStyle = PromptStyle.COT
    thresholds: AgentThresholds = field(default_factory=AgentThresholds)
    endpoint: Optional[EndpointConfig] = None
    fall_response_window_s: float = 30.0


@dataclass
class RunConfig:
    seed: int = 42
    out_dir: Path = Path("runs/demo")
    registry_path: Path = field(default_factory=lambda: resolve_path("bundled:registry.yaml"))
    scenario_paths: List[Path] = field(default_factory=list)
    cohort: Dict[str, int] = field(default_factory=lambda: {"mild": 7, "moderate": 7, "severe": 6})
    walk_seconds_per_patient: float = 110.0
    log_pressure_frames: bool = False
    classifier: ModelConfig = field(default_factory=ModelConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    safety_corpus: Path = field(default_factory=lambda: resolve_path("bundled:safety_corpus"))

    def scenario_scripts(self):
        from .sim.scenario import load_scenario

        return [load_scenario(p) for p in self.scenario_paths]


def default_scenarios() -> List[Path]:
    return [
        resolve_path("bundled:scenarios/exertion.yaml"),
        resolve_path("bundled:scenarios/fall_unresponsive.yaml"),
        resolve_path("bundled:scenarios/evening_light.yaml"),
    ]


def load_config(path: Optional[str] = None, seed: Optional[int] = None, out: Optional[str] = None) -> RunConfig:
    raw: Dict[str, Any] = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}

    config = RunConfig()
    if "seed" in raw:
        config.seed = int(raw["seed"])
    if "out_dir" in raw:
        config.out_dir = Path(raw["out_dir"])
    if "registry" in raw:
        config.registry_path = resolve_path(str(raw["registry"]))
    if "scenarios" in raw:
        config.scenario_paths = [resolve_path(str(p)) for p in raw["scenarios"]]
    else:
        config.scenario_paths = default_scenarios()
    if "cohort" in raw:
        cohort = raw["cohort"]
        if not isinstance(cohort, dict) or set(cohort) - set(LEVEL_KEYS):
            raise ValueError(f"cohort must map {LEVEL_KEYS} to counts")
        config.cohort = {k: int(cohort.get(k, 0)) for k in LEVEL_KEYS}
    if "walk_seconds_per_patient" in raw:
        config.walk_seconds_per_patient = float(raw["walk_seconds_per_patient"])
    if "log_pressure_frames" in raw:
        config.log_pressure_frames = bool(raw["log_pressure_frames"])
    if "classifier" in raw:
        fields = dict(raw["classifier"])
        config.classifier = ModelConfig(**fields)
    if "agent" in raw:
        a = raw["agent"]
        agent = AgentConfig()
        agent.backend = str(a.get("backend", "rule"))
        if "style" in a:
            agent.style = PromptStyle(a["style"])
        if "thresholds" in a:
            agent.thresholds = AgentThresholds(**a["thresholds"])
        if "fall_response_window_s" in a:
            agent.fall_response_window_s = float(a["fall_response_window_s"])
        if "endpoint" in a and a["endpoint"]:
            e = a["endpoint"]
            agent.endpoint = EndpointConfig(
                url=str(e["url"]),
                model=str(e.get("model", "")),
                api_key_env=str(e.get("api_key_env", "AUTOCARE_API_KEY")),
                timeout_s=float(e.get("timeout_s", 10.0)),
            )
        config.agent = agent
    if "safety_corpus" in raw:
        config.safety_corpus = resolve_path(str(raw["safety_corpus"]))

    if seed is not None:
        config.seed = seed
        config.classifier.seed = seed
    else:
        config.classifier.seed = config.seed
    if out is not None:
        config.out_dir = Path(out)

    if not config.registry_path.exists():
        raise FileNotFoundError(f"registry file not found: {config.registry_path}")
    for p in config.scenario_paths:
        if not p.exists():
            raise FileNotFoundError(f"scenario file not found: {p}")
    return config
