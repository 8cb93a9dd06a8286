from .cohort import ImpairmentLevel, PatientProfile, GaitParams, level_from_fma, default_gait_params, make_cohort
from .gait_gen import generate_walk
from .scenario import ScenarioScript, ScenarioParseError, load_scenario, parse_scenario
from .runner import run_scenario, ScenarioRun

__all__ = [
    "ImpairmentLevel",
    "PatientProfile",
    "GaitParams",
    "level_from_fma",
    "default_gait_params",
    "make_cohort",
    "generate_walk",
    "ScenarioScript",
    "ScenarioParseError",
    "load_scenario",
    "parse_scenario",
    "run_scenario",
    "ScenarioRun",
]
