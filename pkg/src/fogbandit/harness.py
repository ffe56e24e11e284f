"""Run orchestration: the per-slot loop, regret accounting, Monte-Carlo fan-out.

One run owns everything mutable. A slot goes: advance queues to the slot
boundary, snapshot counterfactual losses, let every agent dispatch (fresh
task plus any due re-offloads), resolve collisions, event-simulate the
outcomes, schedule their feedback, then collect and ingest whatever became
observable this slot. Regret compares the counterfactual loss of what was
played against the best fixed arm in hindsight, per phase when the scenario
switches arrival rates mid-run.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .config import DelayConfig, ScenarioConfig, ScenarioValueError, ServiceRateConfig
from .delay import DelayBuffer, FeedbackRecord, FeedbackSet, failure_feedback, schedule_feedback
from .env import TaskSpec, Topology, build_topology, enqueue_batch
from .game import GameMatrix, epsilon_ne_gap, joint_frequency, resolve_collisions
from .policies import DebPolicy, make_policy, theorem1_params

CF_STORE_LIMIT = 2_000_000  # store the per-slot counterfactual matrix up to this K*T


def run_rng(master_seed: int, run_index: int) -> np.random.Generator:
    """Independent, order-insensitive stream for one Monte-Carlo run."""
    return np.random.default_rng(np.random.SeedSequence([master_seed, run_index]))


@dataclass
class RunMetrics:
    """Everything one run produced, at full per-slot resolution."""

    run_index: int
    arms: np.ndarray              # (T, V) fresh decision per agent
    realized_loss: np.ndarray     # (T, V) delivered loss of the fresh dispatch
    cum_regret: np.ndarray        # (T, V) per-agent regret stream
    window_latency: np.ndarray    # (T, V) trailing-window mean latency (slots)
    counterfactuals: np.ndarray | None  # (T, K) when K*T is small enough
    selection_counts: np.ndarray  # (V, K) all decisions, retries included
    final_third_counts: np.ndarray  # (V, K)
    retries: list[tuple[int, int, int, float]]  # (slot, agent, arm, loss)
    decisions: int
    total_delay: int
    delivered: int
    outstanding: int
    hindsight_best: list[int]     # per phase
    comparator: str
    joint_windows: dict[str, np.ndarray] = field(default_factory=dict)
    window_bounds: dict[str, tuple[int, int]] = field(default_factory=dict)

    @property
    def summed_regret(self) -> np.ndarray:
        return self.cum_regret.sum(axis=1)


def _switch_slot(cfg: ScenarioConfig) -> int | None:
    if cfg.switch is None:
        return None
    return int(math.floor(cfg.horizon * cfg.switch.at_fraction)) + 1


COUNT_PREDRAW_LIMIT = 4_000_000  # pre-draw the (T, K) event-count matrix up to this size


class QueueEngine:
    """Batched driver for the per-slot queue dynamics of one run.

    Service rates, event counts and uniforms for whole slots are pre-drawn
    in bulk where memory allows, so the slot loop spends its time in plain
    float walks instead of per-call RNG overhead. In per_slot service mode
    each node's rate is refreshed at every slot boundary with a Poisson draw
    around a Gaussian mean. Satisfies the executor protocol of
    `resolve_collisions`.
    """

    _BLOCK = 1 << 16

    def __init__(self, topo: Topology, rng: np.random.Generator, horizon: int,
                 switch_slot: int | None, overrides: tuple[tuple[int, float], ...],
                 service: ServiceRateConfig) -> None:
        self.topo = topo
        self.nodes = topo.nodes
        self.rng = rng
        self.q = [0] * topo.n_arms  # authoritative queue lengths; nodes sync lazily
        self.clocks = [0.0] * topo.n_arms
        self.per_slot = service.mode == "per_slot"
        self.service = service
        n_arms = topo.n_arms
        arrivals = np.array([n.arrival_rate for n in self.nodes])
        predraw = horizon * n_arms <= COUNT_PREDRAW_LIMIT
        self._mu: np.ndarray | None = None
        self._counts: np.ndarray | None = None
        if self.per_slot and predraw:
            means = np.maximum(rng.normal(service.mean, service.std, size=(horizon, n_arms)), 0.0)
            self._mu = np.maximum(rng.poisson(means).astype(float), service.floor)
            lam = self._mu.copy()
            if switch_slot is None:
                lam += arrivals
            else:
                post = arrivals.copy()
                for arm, new_rate in overrides:
                    post[arm] = new_rate
                lam[:switch_slot - 1] += arrivals
                lam[switch_slot - 1:] += post
            self._counts = rng.poisson(lam)
        elif not self.per_slot and predraw:
            rates = arrivals + np.array([n.service_rate for n in self.nodes])
            if switch_slot is None:
                self._counts = rng.poisson(rates, size=(horizon, n_arms))
            else:
                post = rates.copy()
                for arm, new_rate in overrides:
                    post[arm] = new_rate + self.nodes[arm].service_rate
                head = rng.poisson(rates, size=(switch_slot - 1, n_arms))
                tail = rng.poisson(post, size=(horizon - switch_slot + 1, n_arms))
                self._counts = np.vstack([head, tail])
        self._rates = (arrivals + np.array([n.service_rate for n in self.nodes])).tolist()
        self._ubuf: list[float] = []
        self._upos = 0

        self._arr = arrivals.tolist()
        self._mu_rows = self._mu.tolist() if self._mu is not None else None
        self._count_rows = self._counts.tolist() if self._counts is not None else None
        # When a queue holds at least as many jobs as the slot has events, the
        # empty-queue reflection cannot bind and the net move is governed by a
        # Binomial(count, lam/(lam+mu)) arrival split, pre-drawable in bulk.
        self._net_rows = None
        if self._counts is not None:
            post = arrivals.copy()
            for arm, new_rate in overrides:
                post[arm] = new_rate
            arr_m = np.empty(self._counts.shape, dtype=float)
            if switch_slot is None:
                arr_m[:] = arrivals
            else:
                arr_m[:switch_slot - 1] = arrivals
                arr_m[switch_slot - 1:] = post
            if self.per_slot:
                mu_m = self._mu
            else:
                mu_m = np.array([n.service_rate for n in self.nodes])[None, :]
            arrivals_split = rng.binomial(self._counts, arr_m / (arr_m + mu_m))
            self._net_rows = (2 * arrivals_split - self._counts).tolist()

    def take_uniforms(self, n: int) -> list[float]:
        if self._upos + n > len(self._ubuf):
            self._ubuf = self.rng.random(max(self._BLOCK, n)).tolist()
            self._upos = 0
        out = self._ubuf[self._upos:self._upos + n]
        self._upos += n
        return out

    def _poisson(self, lam: float) -> int:
        """Event count over a fractional interval; sequential inversion for small
        rates (one buffered uniform), generator fallback otherwise."""
        if lam <= 0.0:
            return 0
        if lam > 12.0:
            return int(self.rng.poisson(lam))
        if self._upos >= len(self._ubuf):
            self._ubuf = self.rng.random(self._BLOCK).tolist()
            self._upos = 0
        u = self._ubuf[self._upos]
        self._upos += 1
        p = math.exp(-lam)
        cum = p
        k = 0
        while u > cum:
            k += 1
            p *= lam / k
            cum += p
            if k > 200:  # numerically exhausted tail
                break
        return k

    def apply_switch(self, overrides: tuple[tuple[int, float], ...]) -> None:
        for arm, new_rate in overrides:
            node = self.nodes[arm]
            node.arrival_rate = new_rate
            self._arr[arm] = new_rate
            self._rates[arm] = new_rate + node.service_rate

    def _slot_service_rates(self, t: int) -> None:
        """Refresh every node's service rate for slot interval t."""
        if self._mu_rows is not None:
            row = self._mu_rows[t - 1]
        else:
            means = np.maximum(self.rng.normal(self.service.mean, self.service.std,
                                               size=len(self.nodes)), 0.0)
            row = np.maximum(self.rng.poisson(means).astype(float), self.service.floor).tolist()
        rates = self._rates
        arr = self._arr
        for j, node in enumerate(self.nodes):
            node.service_rate = row[j]
            rates[j] = arr[j] + row[j]

    def advance_all(self, t: int) -> None:
        """Bring every node to the slot boundary `t` (skipping already-past ones)."""
        if self.per_slot:
            self._slot_service_rates(t)
        ts = float(t)
        tprev = ts - 1.0
        clocks = self.clocks
        q = self.q
        arr = self._arr
        rates = self._rates
        n_arms = len(q)
        if self._count_rows is not None:
            row = self._count_rows[t - 1]
            nrow = self._net_rows[t - 1]
            for j in range(n_arms):
                ck = clocks[j]
                if ck >= ts:
                    continue
                if ck == tprev:
                    c = row[j]
                    if c:
                        qj = q[j]
                        if qj >= c:  # reflection cannot bind: one binomial split
                            q[j] = qj + nrow[j]
                        else:
                            p_arrival = arr[j] / rates[j]
                            for u in self.take_uniforms(c):
                                if u < p_arrival:
                                    qj += 1
                                elif qj > 0:
                                    qj -= 1
                            q[j] = qj
                else:
                    c = self._poisson(rates[j] * (ts - ck))
                    if c:
                        qj = q[j]
                        p_arrival = arr[j] / rates[j]
                        for u in self.take_uniforms(c):
                            if u < p_arrival:
                                qj += 1
                            elif qj > 0:
                                qj -= 1
                        q[j] = qj
                clocks[j] = ts
        else:
            for j in range(n_arms):
                ck = clocks[j]
                if ck >= ts:
                    continue
                c = self._poisson(rates[j] * (ts - ck))
                if c:
                    qj = q[j]
                    p_arrival = arr[j] / rates[j]
                    for u in self.take_uniforms(c):
                        if u < p_arrival:
                            qj += 1
                        elif qj > 0:
                            qj -= 1
                    q[j] = qj
                clocks[j] = ts

    def advance_to(self, arm: int, until: float) -> None:
        c0 = self.clocks[arm]
        if until <= c0:
            return
        c = self._poisson(self._rates[arm] * (until - c0))
        if c:
            q = self.q
            qj = q[arm]
            p_arrival = self._arr[arm] / self._rates[arm]
            for u in self.take_uniforms(c):
                if u < p_arrival:
                    qj += 1
                elif qj > 0:
                    qj -= 1
            q[arm] = qj
        self.clocks[arm] = until

    def insert_batch(self, arm: int, tasks: list[TaskSpec]) -> list[float]:
        node = self.nodes[arm]
        node.queue_len = self.q[arm]
        node.event_clock = self.clocks[arm]
        sojourns = enqueue_batch(node, tasks, node.event_clock, self.rng)
        self.q[arm] = node.queue_len
        return sojourns


def _execute_plain(engine: QueueEngine, dispatches: list[tuple[int, int]],
                   disp_lat: list[float], task: TaskSpec, slot_time: float) -> list[float]:
    """Uncontested execution: FIFO in dispatch order, same-arm dispatches batched."""
    if len(dispatches) == 1:
        arm = dispatches[0][1]
        d = disp_lat[arm]
        engine.advance_to(arm, slot_time + d)
        return [d + engine.insert_batch(arm, [task])[0]]
    groups: dict[int, list[int]] = {}
    for i, (_, arm) in enumerate(dispatches):
        groups.setdefault(arm, []).append(i)
    out = [0.0] * len(dispatches)
    for arm in sorted(groups):
        idxs = groups[arm]
        d = disp_lat[arm]
        engine.advance_to(arm, slot_time + d)
        for i, sojourn in zip(idxs, engine.insert_batch(arm, [task] * len(idxs))):
            out[i] = d + sojourn
    return out


def run_scenario(cfg: ScenarioConfig, run_index: int,
                 policy_kind: str | None = None) -> RunMetrics:
    """Execute one seeded run of the scenario (any number of agents)."""
    cfg.validate()
    rng = run_rng(cfg.master_seed, run_index)
    topo = build_topology(cfg, rng)
    task = TaskSpec(cfg.task.size, cfg.task.compute_factor)
    t_max = cfg.loss.t_max
    horizon = cfg.horizon
    n_arms = cfg.service_fns
    n_agents = cfg.task_fns
    work = task.work

    policy_cfg = cfg.policy if policy_kind is None else \
        dataclasses.replace(cfg.policy, kind=policy_kind)
    policies = [make_policy(n_arms, policy_cfg, horizon, cfg.delay) for _ in range(n_agents)]
    buffers = [DelayBuffer(cfg.delay) for _ in range(n_agents)]
    delayed = policies[0].delayed

    arms_l = [[0] * horizon for _ in range(n_agents)]
    realized_l = [[0.0] * horizon for _ in range(n_agents)]
    regret_l = [[0.0] * horizon for _ in range(n_agents)]
    lat_sum_l = [[0.0] * horizon for _ in range(n_agents)]
    lat_cnt_l = [[0] * horizon for _ in range(n_agents)]
    store_cf = horizon * n_arms <= CF_STORE_LIMIT
    cf_store = np.zeros((horizon, n_arms), dtype=float) if store_cf else None
    selections_l = [[0] * n_arms for _ in range(n_agents)]
    final_third_l = [[0] * n_arms for _ in range(n_agents)]
    retries_log: list[tuple[int, int, int, float]] = []

    switch_slot = _switch_slot(cfg)
    overrides = cfg.switch.overrides if cfg.switch is not None else ()
    engine = QueueEngine(topo, rng, horizon, switch_slot, overrides, cfg.service)

    # counterfactual loss is affine in the queue length until it clamps;
    # the divisor is the nominal (mean) service rate drawn at build time
    inv_mu = 1.0 / np.array([n.service_rate for n in topo.nodes])
    cf_slope = (inv_mu / t_max).tolist()
    cf_base = ((work * inv_mu + topo.dispatch_latencies) / t_max).tolist()

    cf = [0.0] * n_arms
    cum_cf = [0.0] * n_arms
    cum_chosen = [0.0] * n_agents
    phase_offset = 0.0
    hindsight: list[int] = []

    final_third_start = horizon - horizon // 3 + 1
    next_task_id = 0
    retry_queues: list[list[FeedbackRecord]] = [[] for _ in range(n_agents)]
    retry_replaces = cfg.delay.retry_mode == "replace"
    decisions = 0
    total_delay = 0
    delivered = 0
    d_max = cfg.delay.d_max
    single_plain = n_agents == 1 and cfg.collision_model is None
    disp_lat = topo.dispatch_latencies.tolist()
    agent_range = range(n_agents)
    arm_range = range(n_arms)
    eng_q = engine.q

    for t in range(1, horizon + 1):
        if switch_slot is not None and t == switch_slot:
            hindsight.append(min(arm_range, key=cum_cf.__getitem__))
            phase_offset += min(cum_cf)
            cum_cf = [0.0] * n_arms
            engine.apply_switch(overrides)

        engine.advance_all(t)

        # counterfactual loss of every arm from the untouched queue state
        for j in arm_range:
            x = eng_q[j] * cf_slope[j] + cf_base[j]
            cf[j] = x if x < 1.0 else 1.0
            cum_cf[j] += cf[j]
        if store_cf:
            cf_store[t - 1] = cf

        # dispatch: one decision per agent (a due re-offload replaces the
        # slot's fresh task in replace mode, rides along in additive mode)
        dispatches: list[tuple[int, int]] = []
        dispatch_meta: list[tuple[int, int, bool]] = []  # (task_id, retries, fresh)
        extra: list[tuple[int, FeedbackRecord]] = []
        for v in agent_range:
            pol = policies[v]
            queue = retry_queues[v]
            n_retries = 0
            if queue and retry_replaces:
                n_retries = queue.pop(0).retries
                fresh = False
            else:
                fresh = True
                if queue:
                    extra.extend((v, r) for r in queue)
                    queue.clear()
            arm = pol.select(rng)
            tid = next_task_id
            next_task_id += 1
            pol.note_dispatch(tid, arm)
            dispatches.append((v, arm))
            dispatch_meta.append((tid, n_retries, fresh))
            arms_l[v][t - 1] = arm
            cum_chosen[v] += cf[arm]
        for v, rec in extra:
            pol = policies[v]
            arm = pol.select(rng)
            tid = next_task_id
            next_task_id += 1
            pol.note_dispatch(tid, arm)
            dispatches.append((v, arm))
            dispatch_meta.append((tid, rec.retries, False))

        if single_plain:
            latencies = _execute_plain(engine, dispatches, disp_lat, task, float(t))
        else:
            outcomes = resolve_collisions(dispatches, cfg.collision_model, topo, task,
                                          float(t), rng, executor=engine)
            latencies = [o.total_latency if o.processed else None for o in outcomes]

        in_final_third = t >= final_third_start
        for (v, arm), (tid, n_retries, fresh), lat in zip(dispatches, dispatch_meta, latencies):
            if lat is not None:
                rec = schedule_feedback(tid, t, arm, lat, cfg.loss, cfg.delay,
                                        retries=n_retries)
            else:
                rec = failure_feedback(tid, t, arm, cfg.delay, retries=n_retries)
            total_delay += rec.delay if rec.delay < d_max else d_max
            decisions += 1
            selections_l[v][arm] += 1
            if in_final_third:
                final_third_l[v][arm] += 1
            lat_sum_l[v][t - 1] += rec.loss * t_max
            lat_cnt_l[v][t - 1] += 1
            if fresh:
                realized_l[v][t - 1] = rec.loss
            else:
                retries_log.append((t, v, arm, rec.loss))
                if retry_replaces:
                    realized_l[v][t - 1] = rec.loss
            if delayed:
                buffers[v].add(rec)
            else:
                policies[v].ingest(FeedbackSet(t, (rec,)), rng)
                delivered += 1

        # collect what became observable this slot; update strategies
        if delayed:
            for v in agent_range:
                fs = buffers[v].collect(t)
                delivered += len(fs)
                policies[v].ingest(fs, rng)
                if fs.records:
                    retry_queues[v].extend(buffers[v].reoffload_due(t))

        best_now = phase_offset + min(cum_cf)
        ti = t - 1
        for v in agent_range:
            regret_l[v][ti] = cum_chosen[v] - best_now

    hindsight.append(min(arm_range, key=cum_cf.__getitem__))
    outstanding = sum(b.outstanding for b in buffers)

    lat_sum = np.array(lat_sum_l, dtype=float).T
    lat_cnt = np.array(lat_cnt_l, dtype=np.int64).T
    window_lat = _window_series(lat_sum, lat_cnt, cfg.metrics.latency_window)
    metrics = RunMetrics(
        run_index=run_index,
        arms=np.array(arms_l, dtype=np.int32).T,
        realized_loss=np.array(realized_l, dtype=float).T,
        cum_regret=np.array(regret_l, dtype=float).T,
        window_latency=window_lat,
        counterfactuals=cf_store,
        selection_counts=np.array(selections_l, dtype=np.int64),
        final_third_counts=np.array(final_third_l, dtype=np.int64),
        retries=retries_log,
        decisions=decisions,
        total_delay=total_delay,
        delivered=delivered,
        outstanding=outstanding,
        hindsight_best=hindsight,
        comparator="piecewise_per_phase" if switch_slot is not None else "best_fixed_arm",
    )
    if n_agents >= 2:
        _fill_joint_windows(metrics, horizon, n_arms)
    return metrics


def _window_series(lat_sum: np.ndarray, lat_cnt: np.ndarray, window: int) -> np.ndarray:
    csum = np.cumsum(lat_sum, axis=0)
    ccnt = np.cumsum(lat_cnt, axis=0, dtype=float)
    shifted_sum = np.zeros_like(csum)
    shifted_cnt = np.zeros_like(ccnt)
    if csum.shape[0] > window:
        shifted_sum[window:] = csum[:-window]
        shifted_cnt[window:] = ccnt[:-window]
    denom = np.maximum(ccnt - shifted_cnt, 1.0)
    return ((csum - shifted_sum) / denom).astype(np.float32)


def thirds_windows(horizon: int) -> dict[str, tuple[int, int]]:
    third = horizon // 3
    return {
        "first_third": (0, third),
        "middle_third": (third, 2 * third),
        "final_third": (2 * third, horizon),
        "full": (0, horizon),
    }


def _fill_joint_windows(metrics: RunMetrics, horizon: int, n_arms: int) -> None:
    a = metrics.arms[:, 0]
    b = metrics.arms[:, 1]
    for label, bounds in thirds_windows(horizon).items():
        metrics.joint_windows[label] = joint_frequency(a, b, n_arms, bounds)
        metrics.window_bounds[label] = bounds


# --- compact per-run summaries for aggregation --------------------------------


@dataclass
class RunSummary:
    """What a Monte-Carlo worker ships back: strided series plus aggregates."""

    run_index: int
    slots: np.ndarray            # strided slot grid, 1-based, ends at T
    arms: np.ndarray             # (n, V)
    loss: np.ndarray             # (n, V)
    cum_regret: np.ndarray       # (n, V)
    window_latency: np.ndarray   # (n, V)
    selection_counts: np.ndarray
    final_third_counts: np.ndarray
    modal_final_third: np.ndarray       # (V,)
    modal_final_quarter: np.ndarray     # (V,) fresh decisions only
    regret_checkpoints: dict[int, float]  # summed over agents
    final_regret: float
    final_window_latency: np.ndarray    # (V,)
    mean_loss: np.ndarray               # (V,)
    decisions: int
    n_retries: int
    total_delay: int
    hindsight_best: list[int]
    comparator: str
    joint_windows: dict[str, np.ndarray]
    window_bounds: dict[str, tuple[int, int]]


def _modal_tail(arms: np.ndarray, tail: int) -> np.ndarray:
    window = arms[-max(tail, 1):]
    out = []
    for v in range(arms.shape[1]):
        vals, counts = np.unique(window[:, v], return_counts=True)
        out.append(int(vals[np.argmax(counts)]))
    return np.array(out, dtype=np.int64)


def checkpoint_slots(horizon: int) -> list[int]:
    marks = {max(1, horizon // 10), max(1, horizon // 3), max(1, horizon // 2),
             max(1, (2 * horizon) // 3), horizon}
    return sorted(marks)


def strided_slots(horizon: int, stride: int) -> np.ndarray:
    slots = list(range(stride, horizon + 1, stride))
    if not slots or slots[-1] != horizon:
        slots.append(horizon)
    for mark in checkpoint_slots(horizon):
        if mark not in slots:
            slots.append(mark)
    return np.array(sorted(set(slots)), dtype=np.int64)


def compact(metrics: RunMetrics, cfg: ScenarioConfig) -> RunSummary:
    grid = strided_slots(cfg.horizon, cfg.stride)
    idx = grid - 1
    summed = metrics.summed_regret
    return RunSummary(
        run_index=metrics.run_index,
        slots=grid,
        arms=metrics.arms[idx],
        loss=metrics.realized_loss[idx],
        cum_regret=metrics.cum_regret[idx],
        window_latency=metrics.window_latency[idx],
        selection_counts=metrics.selection_counts,
        final_third_counts=metrics.final_third_counts,
        modal_final_third=np.argmax(metrics.final_third_counts, axis=1),
        modal_final_quarter=_modal_tail(metrics.arms, cfg.horizon // 4),
        regret_checkpoints={s: float(summed[s - 1]) for s in checkpoint_slots(cfg.horizon)},
        final_regret=float(summed[-1]),
        final_window_latency=metrics.window_latency[-1].astype(float),
        mean_loss=metrics.realized_loss.mean(axis=0),
        decisions=metrics.decisions,
        n_retries=len(metrics.retries),
        total_delay=metrics.total_delay,
        hindsight_best=metrics.hindsight_best,
        comparator=metrics.comparator,
        joint_windows=metrics.joint_windows,
        window_bounds=metrics.window_bounds,
    )


def run_single_agent(cfg: ScenarioConfig, run_index: int) -> RunMetrics:
    """One seeded single-agent run (the sequential decision loop with one task FN)."""
    if cfg.task_fns != 1:
        raise ScenarioValueError("run_single_agent needs task_fns == 1")
    return run_scenario(cfg, run_index)


def run_multi_agent(cfg: ScenarioConfig, run_index: int) -> RunMetrics:
    """One seeded multi-agent run; requires a collision model."""
    if cfg.task_fns < 2:
        raise ScenarioValueError("run_multi_agent needs task_fns >= 2")
    return run_scenario(cfg, run_index)


def _worker(args: tuple[ScenarioConfig, int, str | None]) -> RunSummary:
    cfg, run_index, kind = args
    return compact(run_scenario(cfg, run_index, policy_kind=kind), cfg)


def monte_carlo(cfg: ScenarioConfig, workers: int = 1, runs: int | None = None,
                policy_kind: str | None = None) -> list[RunSummary]:
    """Independent seeded runs; result identical for any worker count."""
    n_runs = cfg.runs if runs is None else runs
    if n_runs < 1:
        raise ScenarioValueError("runs must be >= 1")
    jobs = [(cfg, i, policy_kind) for i in range(n_runs)]
    if workers <= 1 or n_runs == 1:
        return [_worker(job) for job in jobs]
    import multiprocessing as mp

    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else mp.get_context()
    with ctx.Pool(min(workers, n_runs)) as pool:
        return pool.map(_worker, jobs)


def aggregate(summaries: list[RunSummary]) -> dict[str, Any]:
    """Across-run means and standard errors of the headline quantities."""
    n = len(summaries)
    finals = np.array([s.final_regret for s in summaries])
    lat = np.array([float(np.mean(s.final_window_latency)) for s in summaries])
    best_hits = []
    for s in summaries:
        target = s.hindsight_best[-1]
        best_hits.extend(int(m == target) for m in s.modal_final_third)
    marks = sorted(summaries[0].regret_checkpoints)
    horizon = marks[-1]
    return {
        "runs": n,
        "final_regret_mean": float(finals.mean()),
        "final_regret_se": float(finals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        "final_regret_rate_mean": float(finals.mean()) / horizon,
        "final_latency_mean": float(lat.mean()),
        "best_arm_frequency": float(np.mean(best_hits)),
        "regret_checkpoint_means": {m: float(np.mean([s.regret_checkpoints[m] for s in summaries]))
                                    for m in marks},
        "mean_decisions": float(np.mean([s.decisions for s in summaries])),
        "mean_retries": float(np.mean([s.n_retries for s in summaries])),
        "mean_total_delay": float(np.mean([s.total_delay for s in summaries])),
    }


# --- zero-sum matrix-game self-play -------------------------------------------


@dataclass(frozen=True)
class MatrixGameConfig:
    """Self-play of the delayed learner on an explicit zero-sum cost matrix."""

    matrix: tuple[tuple[float, ...], ...] = ((1.0, 0.0), (0.0, 1.0))  # matching pennies
    horizon: int = 30000
    runs: int = 20
    feedback_delay: int = 2
    confidence: float = 0.05
    master_seed: int = 777

    def validate(self) -> "MatrixGameConfig":
        GameMatrix(np.asarray(self.matrix))
        if self.horizon < 10:
            raise ScenarioValueError("matrix game horizon must be >= 10")
        if self.feedback_delay < 1:
            raise ScenarioValueError("feedback_delay must be >= 1")
        if self.runs < 1:
            raise ScenarioValueError("runs must be >= 1")
        return self


@dataclass
class MatrixGameResult:
    run_index: int
    checkpoints: list[int]
    row_gaps: list[float]
    col_gaps: list[float]
    row_average: np.ndarray
    col_average: np.ndarray


def run_matrix_game(cfg: MatrixGameConfig, run_index: int) -> MatrixGameResult:
    """Two delayed exponential-weights learners against each other on U.

    Row player pays U[i,j], column player pays 1-U[i,j]; both observe only
    their own realized cost, `feedback_delay` slots late. Epsilon-NE gaps of
    the ergodic average strategies are logged at T/3, 2T/3 and T.
    """
    cfg.validate()
    u = np.asarray(cfg.matrix, dtype=float)
    n_arms = u.shape[0]
    horizon = cfg.horizon
    rng = run_rng(cfg.master_seed, run_index)
    eta, beta = theorem1_params(n_arms, horizon, cfg.feedback_delay * horizon, cfg.confidence)
    row = DebPolicy(n_arms, eta, beta)
    col = DebPolicy(u.shape[1], eta, beta)
    delay_cfg = DelayConfig(d_max=cfg.feedback_delay + 1, retry_cap=0)
    row_buf = DelayBuffer(delay_cfg)
    col_buf = DelayBuffer(delay_cfg)
    row_sum = np.zeros(n_arms)
    col_sum = np.zeros(u.shape[1])
    marks = [horizon // 3, (2 * horizon) // 3, horizon]
    result = MatrixGameResult(run_index, [], [], [], np.zeros(n_arms), np.zeros(u.shape[1]))
    tid = 0
    for t in range(1, horizon + 1):
        row_sum += row.probs
        col_sum += col.probs
        i = row.select(rng)
        j = col.select(rng)
        row.note_dispatch(tid, i)
        col.note_dispatch(tid + 1, j)
        cost = float(u[i, j])
        row_buf.add(FeedbackRecord(tid, t, i, cost, cfg.feedback_delay, False))
        col_buf.add(FeedbackRecord(tid + 1, t, j, 1.0 - cost, cfg.feedback_delay, False))
        tid += 2
        row.ingest(row_buf.collect(t), rng)
        col.ingest(col_buf.collect(t), rng)
        if t in marks:
            p_bar = row_sum / t
            q_bar = col_sum / t
            row_gap, col_gap = epsilon_ne_gap(u, p_bar, q_bar)
            result.checkpoints.append(t)
            result.row_gaps.append(row_gap)
            result.col_gaps.append(col_gap)
            if t == horizon:
                result.row_average = p_bar
                result.col_average = q_bar
    return result


def matrix_game_suite(cfg: MatrixGameConfig, workers: int = 1) -> list[MatrixGameResult]:
    jobs = list(range(cfg.runs))
    if workers <= 1 or cfg.runs == 1:
        return [run_matrix_game(cfg, i) for i in jobs]
    import multiprocessing as mp

    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else mp.get_context()
    with ctx.Pool(min(workers, cfg.runs)) as pool:
        return pool.starmap(run_matrix_game, [(cfg, i) for i in jobs])
