"""Bundled experiment scenarios at desk scale.

Arm indices are 0-based: the best service FN of the stationary setup
("FN 1" in 1-based speak) is arm 0.
"""

from __future__ import annotations

from typing import Any

from .config import ScenarioConfig, scenario_from_dict

_PRESETS: dict[str, dict[str, Any]] = {
    # K=6 service FNs, background arrivals 5.0..7.5, stationary; arm 0 is best.
    "single_stationary": {
        "name": "single_stationary",
        "service_fns": 6,
        "task_fns": 1,
        "horizon": 30000,
        "runs": 100,
        "master_seed": 20240501,
        "arrival": {"kind": "linear", "base": 4.5, "step": 0.5},
        "policy": {"kind": "deb"},
    },
    # same network, but arm 0's arrival rate jumps to 7 at T/2: arm 1 takes over.
    "single_dynamic": {
        "name": "single_dynamic",
        "service_fns": 6,
        "task_fns": 1,
        "horizon": 30000,
        "runs": 100,
        "master_seed": 20240502,
        "arrival": {"kind": "linear", "base": 4.5, "step": 0.5},
        "switch": {"at_fraction": 0.5, "overrides": {"0": 7.0}},
        "policy": {"kind": "deb"},
    },
    # four task FNs share ten service FNs under the weak-collision model.
    "multi_agent_v4k10": {
        "name": "multi_agent_v4k10",
        "service_fns": 10,
        "task_fns": 4,
        "horizon": 30000,
        "runs": 50,
        "master_seed": 20240503,
        "arrival": {"kind": "linear", "base": 4.0, "step": 0.4},
        "collision_model": "random_order",
        "policy": {"kind": "deb"},
    },
    # two task FNs, winner-takes-all, two equally good service FNs to split.
    "ne_two_agent": {
        "name": "ne_two_agent",
        "service_fns": 6,
        "task_fns": 2,
        "horizon": 30000,
        "runs": 50,
        "master_seed": 20240504,
        "arrival": {"kind": "explicit", "rates": [4.0, 4.0, 5.0, 6.0, 7.0, 8.0]},
        "collision_model": "winner_takes_all",
        "policy": {"kind": "deb"},
    },
}

for _k in (20, 100, 500, 1000):
    _PRESETS[f"scalability_k{_k}"] = {
        "name": f"scalability_k{_k}",
        "service_fns": _k,
        "task_fns": 1,
        "horizon": 30000,
        "runs": 10,
        "master_seed": 20240505 + _k,
        "arrival": {"kind": "uniform_rest", "first": 5.0, "low": 6.0, "high": 10.0},
        "policy": {"kind": "deb"},
    }


def preset_names() -> list[str]:
    return sorted(_PRESETS)


def load_preset(name: str) -> ScenarioConfig:
    from .config import ScenarioNotFoundError

    if name not in _PRESETS:
        raise ScenarioNotFoundError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return scenario_from_dict(_PRESETS[name])
