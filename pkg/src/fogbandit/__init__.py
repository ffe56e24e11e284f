"""Latency-driven peer task offloading in fog networks, learned as an
adversarial bandit under delayed, out-of-order loss feedback."""

from .config import ScenarioConfig, load_scenario, scenario_from_dict, scenario_to_dict
from .harness import (MatrixGameConfig, monte_carlo, run_matrix_game,
                      run_multi_agent, run_scenario, run_single_agent)
from .policies import make_policy, theorem1_params
from .presets import load_preset, preset_names

__all__ = [
    "MatrixGameConfig",
    "ScenarioConfig",
    "load_preset",
    "load_scenario",
    "make_policy",
    "monte_carlo",
    "preset_names",
    "run_matrix_game",
    "run_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "theorem1_params",
]

__version__ = "0.1.0"
