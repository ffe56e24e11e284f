"""Fog-network environment: wireless links, service-FN queues, latency/loss pipeline.

The task FN sits at the disk center; service FNs are scattered uniformly in
the disk. Each service FN runs a continuous-time M/M/1 queue (Poisson
background arrivals, exponential service). Offloaded tasks ride the Shannon
link, join the queue, and their realized sojourn plus dispatch time is the
total latency that becomes a normalized loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ChannelConfig, LossConfig, ScenarioConfig, ScenarioValueError


@dataclass(frozen=True)
class TaskSpec:
    """One offloadable task: size b (task units) and work factor k."""

    size: float = 1.0
    compute_factor: float = 1.0

    def __post_init__(self) -> None:
        if self.size <= 0 or self.compute_factor <= 0:
            raise ScenarioValueError("task size and compute_factor must be > 0")

    @property
    def work(self) -> float:
        return self.compute_factor * self.size


@dataclass(frozen=True)
class ChannelParams:
    """Resolved link budget plus node geometry for one topology draw."""

    config: ChannelConfig
    positions_km: tuple[tuple[float, float], ...]  # service FNs; task FN at origin

    def __post_init__(self) -> None:
        r = self.config.radius_km * (1 + 1e-9)
        for x, y in self.positions_km:
            if math.hypot(x, y) > r:
                raise ScenarioValueError("service FN position outside the deployment disk")

    def distance_km(self, arm: int) -> float:
        x, y = self.positions_km[arm]
        return max(math.hypot(x, y), self.config.min_distance_km)

    def pathloss_gain(self, distance_km: float) -> float:
        c = self.config
        d = max(distance_km, c.min_distance_km)
        pl_db = c.pathloss_ref_db + 10.0 * c.pathloss_exponent * math.log10(d / c.pathloss_ref_km)
        return 10.0 ** (-pl_db / 10.0)

    def snr(self, arm: int) -> float:
        c = self.config
        g = self.pathloss_gain(self.distance_km(arm))
        noise_w = c.noise_psd_w_per_hz * c.bandwidth_hz
        return g * c.fading_gain * c.tx_power_w / noise_w


def shannon_rate(bandwidth: float, snr: float) -> float:
    """Link rate B*log2(1+SNR); units follow the bandwidth units."""
    return bandwidth * math.log2(1.0 + snr)


def transmission_rate(params: ChannelParams, arm: int) -> float:
    """Average link rate, in task units per slot, from task FN to service FN `arm`."""
    c = params.config
    bits_per_slot = shannon_rate(c.bandwidth_hz, params.snr(arm)) * c.slot_seconds
    return bits_per_slot / c.task_bits


def dispatch_latency(task: TaskSpec, rate: float) -> float:
    """Slots spent shipping the task over the link."""
    if rate <= 0:
        raise ScenarioValueError("transmission rate must be > 0")
    return task.size / rate


def computation_latency_estimate(queue_len: int, task: TaskSpec, service_rate: float) -> float:
    """Expected compute latency (Q + k*b)/mu given the queue seen at arrival.

    This is an estimate: the realized sojourn comes out of the event
    simulation and is only known once the task finishes.
    """
    if service_rate <= 0:
        raise ScenarioValueError("service rate must be > 0")
    return (queue_len + task.work) / service_rate


def normalize_loss(total_latency: float, cfg: LossConfig) -> float:
    """Latency mapped to [0,1]: O/t_max below the cap, exactly 1 at or above it."""
    if total_latency < cfg.t_max:
        return total_latency / cfg.t_max
    return 1.0


@dataclass(frozen=True)
class LatencyBreakdown:
    dispatch: float
    compute: float
    total: float

    @classmethod
    def of(cls, dispatch: float, compute: float) -> "LatencyBreakdown":
        if dispatch < 0 or compute < 0:
            raise ScenarioValueError("latency components must be non-negative")
        return cls(dispatch, compute, dispatch + compute)


class ServiceNode:
    """One service FN: continuous-time M/M/1 queue advanced by uniformization.

    Events happen at rate lam+mu; each is an arrival w.p. lam/(lam+mu) or a
    potential departure (no-op on an empty queue) otherwise, which is the
    standard uniformized construction of the same Markov chain.
    """

    __slots__ = ("node_id", "arrival_rate", "service_rate", "queue_len", "event_clock")

    def __init__(self, node_id: int, arrival_rate: float, service_rate: float,
                 queue_len: int = 0, event_clock: float = 0.0) -> None:
        if arrival_rate < 0:
            raise ScenarioValueError("arrival_rate must be >= 0")
        if service_rate <= 0:
            raise ScenarioValueError("service_rate must be > 0")
        if queue_len < 0:
            raise ScenarioValueError("queue_len must be >= 0")
        self.node_id = node_id
        self.arrival_rate = arrival_rate
        self.service_rate = service_rate
        self.queue_len = queue_len
        self.event_clock = event_clock

    def advance(self, until: float, rng: np.random.Generator) -> None:
        """Run background arrivals/services up to `until`."""
        if until < self.event_clock:
            raise RuntimeError(
                f"time regression on node {self.node_id}: {until} < {self.event_clock}")
        dt = until - self.event_clock
        if dt > 0.0:
            self._step_events(dt, rng)
        self.event_clock = until

    def _step_events(self, dt: float, rng: np.random.Generator) -> None:
        n = int(rng.poisson((self.arrival_rate + self.service_rate) * dt))
        if n:
            self.apply_events(rng.random(n))

    def apply_events(self, uniforms) -> None:
        """Apply pre-drawn uniformized events (clock untouched; caller owns it)."""
        p_arrival = self.arrival_rate / (self.arrival_rate + self.service_rate)
        q = self.queue_len
        for u in uniforms:
            if u < p_arrival:
                q += 1
            elif q > 0:
                q -= 1
        self.queue_len = q

    def execute_offload(self, task: TaskSpec, arrival_time: float,
                        rng: np.random.Generator) -> float:
        """Enqueue the task at `arrival_time`; return its realized sojourn.

        Sojourn = service of the jobs already in system (Gamma(Q, 1/mu) by
        memorylessness) plus the task's own exponential work of mean k*b/mu.
        Arrivals behind the task never delay it (FIFO, single server).
        """
        if abs(arrival_time - self.event_clock) > 1e-9:
            raise RuntimeError("node must be advanced to the task arrival time")
        mu = self.service_rate
        wait = rng.standard_gamma(self.queue_len) / mu if self.queue_len else 0.0
        own = rng.exponential(task.work / mu)
        self.queue_len += 1
        return wait + own

    def state_tuple(self) -> tuple:
        return (self.node_id, self.arrival_rate, self.service_rate,
                self.queue_len, self.event_clock)


def enqueue_batch(node: ServiceNode, tasks: list[TaskSpec], arrival_time: float,
                  rng: np.random.Generator) -> list[float]:
    """FIFO-insert several tasks arriving together; sojourns share the sample path.

    Each later task waits for everything the earlier one waited for plus the
    earlier task's own service, so sojourns are strictly increasing along the
    insertion order.
    """
    if abs(arrival_time - node.event_clock) > 1e-9:
        raise RuntimeError("node must be advanced to the batch arrival time")
    mu = node.service_rate
    ahead = rng.standard_gamma(node.queue_len) / mu if node.queue_len else 0.0
    sojourns = []
    cum = ahead
    for task in tasks:
        cum += rng.exponential(task.work / mu)
        sojourns.append(cum)
    node.queue_len += len(tasks)
    return sojourns


# --- topology ----------------------------------------------------------------


@dataclass
class Topology:
    """Per-run network draw: geometry, link rates, and live queue nodes."""

    channel: ChannelParams
    nodes: list[ServiceNode]
    rates: np.ndarray             # task units per slot, per arm
    dispatch_latencies: np.ndarray  # slots, per arm (task of configured size)

    @property
    def n_arms(self) -> int:
        return len(self.nodes)


def draw_arrival_rates(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    a = cfg.arrival
    k = cfg.service_fns
    if a.kind == "linear":
        rates = a.base + a.step * np.arange(1, k + 1, dtype=float)
    elif a.kind == "explicit":
        rates = np.asarray(a.rates, dtype=float)
    else:  # uniform_rest
        rates = np.empty(k, dtype=float)
        rates[0] = a.first
        if k > 1:
            rates[1:] = rng.uniform(a.low, a.high, size=k - 1)
    if np.any(rates < 0):
        raise ScenarioValueError("arrival rates must be non-negative")
    return rates


def draw_service_rates(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """Initial service rates; per-slot perturbation (if any) happens in the run loop.

    In per_slot mode the nominal rate is the configured mean, which is also
    what the compute-latency estimator divides by.
    """
    s = cfg.service
    if s.mode == "per_slot":
        return np.full(cfg.service_fns, s.mean, dtype=float)
    if s.shared:
        mu = max(rng.normal(s.mean, s.std), s.floor)
        return np.full(cfg.service_fns, mu, dtype=float)
    mus = rng.normal(s.mean, s.std, size=cfg.service_fns)
    return np.maximum(mus, s.floor)


def build_topology(cfg: ScenarioConfig, rng: np.random.Generator) -> Topology:
    """Place service FNs uniformly in the disk and draw per-run rates.

    Draw order (positions, arrival rates, service rates) is fixed so a seed
    pins the topology field-for-field.
    """
    if cfg.service_fns < 1:
        raise ScenarioValueError("service_fns (K) must be >= 1")
    if cfg.channel.radius_km <= 0:
        raise ScenarioValueError("channel.radius_km must be > 0")
    k = cfg.service_fns
    radius = cfg.channel.radius_km
    # uniform in the disk: sqrt-radius trick
    r = radius * np.sqrt(rng.random(k))
    theta = rng.random(k) * 2.0 * math.pi
    positions = tuple((float(ri * math.cos(ti)), float(ri * math.sin(ti)))
                      for ri, ti in zip(r, theta))
    channel = ChannelParams(cfg.channel, positions)
    arrivals = draw_arrival_rates(cfg, rng)
    services = draw_service_rates(cfg, rng)
    nodes = [ServiceNode(j, float(arrivals[j]), float(services[j])) for j in range(k)]
    task = TaskSpec(cfg.task.size, cfg.task.compute_factor)
    rates = np.array([transmission_rate(channel, j) for j in range(k)], dtype=float)
    dispatches = np.array([dispatch_latency(task, float(rates[j])) for j in range(k)])
    return Topology(channel, nodes, rates, dispatches)


def counterfactual_losses(topology: Topology, task: TaskSpec, loss_cfg: LossConfig,
                          out: np.ndarray | None = None) -> np.ndarray:
    """Loss every arm would report from its current state; mutates nothing.

    Uses the dispatch latency plus the compute-latency estimate, clamped the
    same way realized losses are. Regret accounting only; never shown to a
    policy.
    """
    k = topology.n_arms
    if out is None:
        out = np.empty(k, dtype=float)
    for j, node in enumerate(topology.nodes):
        out[j] = (node.queue_len + task.work) / node.service_rate
    out += topology.dispatch_latencies
    np.divide(out, loss_cfg.t_max, out=out)
    np.minimum(out, 1.0, out=out)
    return out
