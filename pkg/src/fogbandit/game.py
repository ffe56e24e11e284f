"""Multi-agent layer: collision resolution and equilibrium diagnostics.

Collisions happen when several task FNs pick the same service FN in a slot.
Either exactly one uniformly-chosen winner is processed and the rest eat the
maximal loss, or everyone is queued in a uniformly random order. The
diagnostics (ergodic averages, bilinear game values, epsilon-NE gaps, joint
selection frequencies) quantify how close self-play gets to equilibrium.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import COLLISION_MODELS, ScenarioValueError
from .env import ServiceNode, TaskSpec, Topology, enqueue_batch


@dataclass(frozen=True)
class Outcome:
    """What one dispatched task experienced after collision resolution."""

    agent: int
    arm: int
    processed: bool
    total_latency: float  # dispatch + sojourn when processed, inf otherwise


class DirectExecutor:
    """Drives ServiceNode dynamics straight off the run's random stream."""

    def __init__(self, topology: Topology, rng: np.random.Generator) -> None:
        self.topology = topology
        self.rng = rng

    def advance_to(self, arm: int, until: float) -> None:
        self.topology.nodes[arm].advance(until, self.rng)

    def insert_batch(self, arm: int, tasks: list[TaskSpec]) -> list[float]:
        node = self.topology.nodes[arm]
        return enqueue_batch(node, tasks, node.event_clock, self.rng)


def resolve_collisions(dispatches: Sequence[tuple[int, int]], model: str | None,
                       topology: Topology, task: TaskSpec, slot_time: float,
                       rng: np.random.Generator, executor=None) -> list[Outcome]:
    """Execute one slot's dispatches, resolving same-arm contention.

    `dispatches` is an ordered list of (agent, arm). Groups touching a single
    agent are plain FIFO; groups spanning several agents follow `model`.
    Nodes are visited in ascending arm order so the random stream is
    reproducible. `executor` abstracts queue mechanics so the harness can
    plug in its batched engine.
    """
    if model is not None and model not in COLLISION_MODELS:
        raise ScenarioValueError(f"unknown collision model {model!r}")
    if executor is None:
        executor = DirectExecutor(topology, rng)
    groups: dict[int, list[int]] = {}
    for idx, (_, arm) in enumerate(dispatches):
        groups.setdefault(arm, []).append(idx)
    outcomes: list[Outcome | None] = [None] * len(dispatches)
    for arm in sorted(groups):
        idxs = groups[arm]
        dispatch = float(topology.dispatch_latencies[arm])
        executor.advance_to(arm, slot_time + dispatch)
        agents = {dispatches[i][0] for i in idxs}
        contested = len(agents) > 1 and model is not None
        if contested and model == "winner_takes_all":
            winner = idxs[int(rng.integers(len(idxs)))]
            sojourn = executor.insert_batch(arm, [task])[0]
            for i in idxs:
                if i == winner:
                    outcomes[i] = Outcome(dispatches[i][0], arm, True, dispatch + sojourn)
                else:
                    outcomes[i] = Outcome(dispatches[i][0], arm, False, float("inf"))
        else:
            order = list(idxs)
            if contested:  # random_order
                order = [idxs[j] for j in rng.permutation(len(idxs))]
            sojourns = executor.insert_batch(arm, [task] * len(order))
            for i, sj in zip(order, sojourns):
                outcomes[i] = Outcome(dispatches[i][0], arm, True, dispatch + sj)
    return outcomes  # type: ignore[return-value]


# --- equilibrium diagnostics --------------------------------------------------


@dataclass(frozen=True)
class GameMatrix:
    """Zero-sum cost matrix: row player pays U(i,j), column player gains it."""

    values: np.ndarray

    def __post_init__(self) -> None:
        u = np.asarray(self.values, dtype=float)
        if u.ndim != 2:
            raise ScenarioValueError("game matrix must be 2-d")
        if np.any(u < 0.0) or np.any(u > 1.0):
            raise ScenarioValueError("game matrix entries must lie in [0,1]")
        object.__setattr__(self, "values", u)


@dataclass(frozen=True)
class JointStrategy:
    row: np.ndarray
    col: np.ndarray
    horizon: int


def ergodic_average(history: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    """Coordinate-wise mean of a sequence of simplex points."""
    arr = np.asarray(history, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.size == 0:
        raise ScenarioValueError("ergodic average of an empty history")
    return arr.mean(axis=0)


def bilinear_value(u: np.ndarray, p: np.ndarray, q: np.ndarray) -> float:
    """sum_ij p_i q_j U(i,j)."""
    u = np.asarray(u, dtype=float)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if u.shape != (p.shape[0], q.shape[0]):
        raise ScenarioValueError("dimension mismatch between matrix and strategies")
    return float(p @ u @ q)


def epsilon_ne_gap(u: np.ndarray, p: np.ndarray, q: np.ndarray) -> tuple[float, float]:
    """Unilateral improvement room at (p, q): (row gap, column gap).

    Bilinearity makes pure deviations sufficient, so the minimizing row mix
    is the best pure row against q and symmetrically for columns. Both gaps
    are non-negative; the profile is an epsilon-NE iff both are <= epsilon.
    """
    u = np.asarray(u, dtype=float)
    value = bilinear_value(u, p, q)
    row_gap = value - float(np.min(u @ np.asarray(q, dtype=float)))
    col_gap = float(np.max(np.asarray(p, dtype=float) @ u)) - value
    return row_gap, col_gap


def joint_frequency(arms_row: np.ndarray, arms_col: np.ndarray, n_arms: int,
                    window: tuple[int, int] | None = None) -> np.ndarray:
    """Empirical joint distribution of two agents' selections over a window.

    `window` is a half-open (start, stop) index range into the aligned
    histories; entries sum to 1.
    """
    a = np.asarray(arms_row)
    b = np.asarray(arms_col)
    if a.shape != b.shape:
        raise ScenarioValueError("selection histories are not aligned")
    if window is not None:
        start, stop = window
        if start < 0 or stop > a.shape[0] or start >= stop:
            raise ScenarioValueError("window outside the selection history")
        a = a[start:stop]
        b = b[start:stop]
    if a.size == 0:
        raise ScenarioValueError("empty selection window")
    counts = np.zeros((n_arms, n_arms), dtype=float)
    np.add.at(counts, (a, b), 1.0)
    return counts / a.size
