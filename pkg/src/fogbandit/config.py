"""Scenario configuration: dataclasses, validation, JSON round-trip.

All FN indices are 0-based; the literature's "FN 1" is arm 0 here.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


class ScenarioError(Exception):
    """Base class for scenario configuration problems."""


class ScenarioNotFoundError(ScenarioError):
    """Scenario file or preset name does not exist."""


class ScenarioSchemaError(ScenarioError):
    """Unknown or missing key in a scenario document."""


class ScenarioValueError(ScenarioError):
    """A field value violates an invariant; message names the key."""


@dataclass(frozen=True)
class ChannelConfig:
    """Link-budget knobs for the wireless hop between task FN and service FNs.

    Path loss is the dB-domain log-distance model
    ``PL(d) = pathloss_ref_db + 10 * pathloss_exponent * log10(d / pathloss_ref_km)``
    (an urban-macro parameterization). ``task_bits`` converts the Shannon
    rate in bit/s into normalized task-units per slot.
    """

    radius_km: float = 2.0
    bandwidth_hz: float = 1.0e7
    tx_power_w: float = 0.2
    noise_psd_w_per_hz: float = 10.0 ** (-17.4) / 1000.0  # -174 dBm/Hz
    fading_gain: float = 1.0
    pathloss_ref_db: float = 128.1
    pathloss_exponent: float = 3.76
    pathloss_ref_km: float = 1.0
    min_distance_km: float = 0.05
    task_bits: float = 2.0e5
    slot_seconds: float = 1.0

    def validate(self) -> None:
        for key in ("radius_km", "bandwidth_hz", "tx_power_w", "noise_psd_w_per_hz",
                    "fading_gain", "pathloss_ref_km", "min_distance_km",
                    "task_bits", "slot_seconds"):
            if getattr(self, key) <= 0:
                raise ScenarioValueError(f"channel.{key} must be > 0")


@dataclass(frozen=True)
class TaskConfig:
    size: float = 1.0            # b, normalized task units
    compute_factor: float = 1.0  # k, work per unit of task size

    def validate(self) -> None:
        if self.size <= 0:
            raise ScenarioValueError("task.size must be > 0")
        if self.compute_factor <= 0:
            raise ScenarioValueError("task.compute_factor must be > 0")


@dataclass(frozen=True)
class ArrivalConfig:
    """Background arrival rates of the service FNs.

    kind = "linear":       rate[j] = base + step * (j + 1)
    kind = "explicit":     rate[j] = rates[j]
    kind = "uniform_rest": rate[0] = first, rate[j>0] ~ U[low, high) per run
    """

    kind: str = "linear"
    base: float = 4.5
    step: float = 0.5
    rates: tuple[float, ...] = ()
    first: float = 5.0
    low: float = 6.0
    high: float = 10.0

    def validate(self, n_arms: int) -> None:
        if self.kind not in ("linear", "explicit", "uniform_rest"):
            raise ScenarioValueError("arrival.kind must be linear|explicit|uniform_rest")
        if self.kind == "explicit":
            if len(self.rates) != n_arms:
                raise ScenarioValueError(
                    f"arrival.rates must have length {n_arms}, got {len(self.rates)}")
            if any(r < 0 for r in self.rates):
                raise ScenarioValueError("arrival.rates must be non-negative")
        if self.kind == "linear" and self.base + self.step < 0:
            raise ScenarioValueError("arrival.base/step give a negative rate")
        if self.kind == "uniform_rest" and not (0 <= self.low <= self.high):
            raise ScenarioValueError("arrival.low/high must satisfy 0 <= low <= high")


@dataclass(frozen=True)
class SwitchConfig:
    """Mid-run arrival-rate change (dynamic scenarios)."""

    at_fraction: float = 0.5
    overrides: tuple[tuple[int, float], ...] = ()

    def validate(self, n_arms: int) -> None:
        if not 0.0 < self.at_fraction < 1.0:
            raise ScenarioValueError("switch.at_fraction must be in (0,1)")
        for arm, rate in self.overrides:
            if not 0 <= arm < n_arms:
                raise ScenarioValueError(f"switch override arm {arm} out of range")
            if rate < 0:
                raise ScenarioValueError("switch override rate must be non-negative")


@dataclass(frozen=True)
class ServiceRateConfig:
    """How service capacity is perturbed.

    mode = "per_slot": every slot each FN's service rate is a Poisson draw
    whose mean comes from Normal(mean, std); the long-run rate is `mean` for
    every FN (temporal perturbation). mode = "per_run": rates are drawn once
    per run from Normal(mean, std), one shared draw unless shared=false.
    All draws clamp below at `floor`.
    """

    mode: str = "per_slot"
    mean: float = 6.0
    std: float = 1.0
    floor: float = 0.5
    shared: bool = True

    def validate(self) -> None:
        if self.mode not in ("per_slot", "per_run"):
            raise ScenarioValueError("service.mode must be per_slot|per_run")
        if self.mean <= 0:
            raise ScenarioValueError("service.mean must be > 0")
        if self.std < 0:
            raise ScenarioValueError("service.std must be >= 0")
        if self.floor <= 0:
            raise ScenarioValueError("service.floor must be > 0")


@dataclass(frozen=True)
class LossConfig:
    t_max: float = 5.0  # maximal tolerable latency; losses clamp to 1 at/above it

    def validate(self) -> None:
        if self.t_max <= 0:
            raise ScenarioValueError("loss.t_max must be > 0")


@dataclass(frozen=True)
class DelayConfig:
    """Feedback-delay cutoff and re-offloading behavior.

    retry_mode "replace": a due re-offload consumes the task FN's dispatch
    budget for that slot (one dispatch per agent per slot). "additive": the
    re-offload ships on top of the slot's fresh task.
    """

    d_max: int = 3       # feedback later than this is a failure with loss 1
    retry_cap: int = 1   # re-dispatches allowed per original task
    retry_mode: str = "replace"

    def validate(self) -> None:
        if self.d_max < 1:
            raise ScenarioValueError("delay.d_max must be >= 1")
        if self.retry_cap < 0:
            raise ScenarioValueError("delay.retry_cap must be >= 0")
        if self.retry_mode not in ("replace", "additive"):
            raise ScenarioValueError("delay.retry_mode must be replace|additive")


POLICY_KINDS = ("deb", "exp3", "exp3ix", "qpmd", "sdb", "ducb", "blot", "fixed")


@dataclass(frozen=True)
class PolicyConfig:
    """Policy selection plus learning-rate inputs.

    eta/beta override the closed-form rule; delay_budget defaults to
    d_max * horizon / 2 when unset. `options` carries baseline-specific
    constants (documented per policy).
    """

    kind: str = "deb"
    confidence: float = 0.05          # delta in the parameter rule
    delay_budget: float | None = None  # estimate of total feedback delay
    eta: float | None = None
    beta: float | None = None
    options: dict[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ScenarioValueError(
                f"policy.kind {self.kind!r} unknown; valid kinds: {', '.join(POLICY_KINDS)}")
        if not 0.0 < self.confidence < 1.0:
            raise ScenarioValueError("policy.confidence must be in (0,1)")
        if self.delay_budget is not None and self.delay_budget < 0:
            raise ScenarioValueError("policy.delay_budget must be >= 0")
        if self.eta is not None and self.eta <= 0:
            raise ScenarioValueError("policy.eta must be > 0")
        if self.beta is not None and self.beta < 0:
            raise ScenarioValueError("policy.beta must be >= 0")


COLLISION_MODELS = ("winner_takes_all", "random_order")


@dataclass(frozen=True)
class MetricsConfig:
    latency_window: int = 500
    timeseries_stride: int = 0  # 0 = auto (about 1000 rows per run)

    def validate(self) -> None:
        if self.latency_window < 1:
            raise ScenarioValueError("metrics.latency_window must be >= 1")
        if self.timeseries_stride < 0:
            raise ScenarioValueError("metrics.timeseries_stride must be >= 0")


@dataclass(frozen=True)
class ScenarioConfig:
    """Full declarative description of one experiment."""

    name: str = "scenario"
    service_fns: int = 6      # K
    task_fns: int = 1         # V
    horizon: int = 30000      # T slots
    runs: int = 100
    master_seed: int = 20240501
    arrival: ArrivalConfig = ArrivalConfig()
    switch: SwitchConfig | None = None
    service: ServiceRateConfig = ServiceRateConfig()
    loss: LossConfig = LossConfig()
    delay: DelayConfig = DelayConfig()
    policy: PolicyConfig = PolicyConfig()
    collision_model: str | None = None
    channel: ChannelConfig = ChannelConfig()
    task: TaskConfig = TaskConfig()
    metrics: MetricsConfig = MetricsConfig()

    def validate(self) -> "ScenarioConfig":
        if self.service_fns < 1:
            raise ScenarioValueError("service_fns (K) must be >= 1")
        if self.task_fns < 1:
            raise ScenarioValueError("task_fns (V) must be >= 1")
        if self.horizon < 10:
            raise ScenarioValueError("horizon (T) must be >= 10")
        if self.runs < 1:
            raise ScenarioValueError("runs must be >= 1")
        if self.task_fns >= 2:
            if self.collision_model not in COLLISION_MODELS:
                raise ScenarioValueError(
                    "collision_model must be winner_takes_all|random_order when task_fns >= 2")
        elif self.collision_model not in (None,) + COLLISION_MODELS:
            raise ScenarioValueError("collision_model must be null, winner_takes_all or random_order")
        self.arrival.validate(self.service_fns)
        if self.switch is not None:
            self.switch.validate(self.service_fns)
        self.service.validate()
        self.loss.validate()
        self.delay.validate()
        self.policy.validate()
        self.channel.validate()
        self.task.validate()
        self.metrics.validate()
        return self

    @property
    def stride(self) -> int:
        if self.metrics.timeseries_stride:
            return self.metrics.timeseries_stride
        return max(1, self.horizon // 1000)


# --- JSON (de)serialization -------------------------------------------------

_SECTION_TYPES = {
    "arrival": ArrivalConfig,
    "switch": SwitchConfig,
    "service": ServiceRateConfig,
    "loss": LossConfig,
    "delay": DelayConfig,
    "policy": PolicyConfig,
    "channel": ChannelConfig,
    "task": TaskConfig,
    "metrics": MetricsConfig,
}


def _build_section(cls: type, payload: Any, path: str) -> Any:
    if not isinstance(payload, dict):
        raise ScenarioSchemaError(f"{path} must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(payload) - names
    if unknown:
        raise ScenarioSchemaError(f"unknown key {path}.{sorted(unknown)[0]}")
    kwargs = dict(payload)
    if cls is ArrivalConfig and "rates" in kwargs:
        kwargs["rates"] = tuple(float(r) for r in kwargs["rates"])
    if cls is SwitchConfig and "overrides" in kwargs:
        if isinstance(kwargs["overrides"], dict):
            items = kwargs["overrides"].items()
        else:
            items = kwargs["overrides"]
        kwargs["overrides"] = tuple(sorted((int(a), float(r)) for a, r in items))
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ScenarioSchemaError(f"bad section {path}: {exc}") from exc


def scenario_from_dict(doc: dict[str, Any]) -> ScenarioConfig:
    """Build and validate a ScenarioConfig from a plain dict; rejects unknown keys."""
    if not isinstance(doc, dict):
        raise ScenarioSchemaError("scenario document must be an object")
    names = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = set(doc) - names
    if unknown:
        raise ScenarioSchemaError(f"unknown key {sorted(unknown)[0]}")
    kwargs: dict[str, Any] = {}
    for key, value in doc.items():
        if key in _SECTION_TYPES:
            if key == "switch" and value is None:
                kwargs[key] = None
            else:
                kwargs[key] = _build_section(_SECTION_TYPES[key], value, key)
        else:
            kwargs[key] = value
    try:
        cfg = ScenarioConfig(**kwargs)
    except TypeError as exc:
        raise ScenarioSchemaError(str(exc)) from exc
    return cfg.validate()


def scenario_to_dict(cfg: ScenarioConfig) -> dict[str, Any]:
    doc = dataclasses.asdict(cfg)
    if doc["switch"] is not None:
        doc["switch"]["overrides"] = [[a, r] for a, r in cfg.switch.overrides]
    doc["arrival"]["rates"] = list(cfg.arrival.rates)
    return doc


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Parse a scenario JSON file into a validated config."""
    path = Path(path)
    if not path.is_file():
        raise ScenarioNotFoundError(f"scenario file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioSchemaError(f"{path} is not valid JSON: {exc}") from exc
    return scenario_from_dict(doc)


def save_scenario(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(cfg), indent=2, sort_keys=True) + "\n")
