"""Arm-selection policies: the delayed exponential-weights learner and baselines.

Every policy speaks the same protocol: `select` samples an arm from the
current strategy, `note_dispatch` registers an outstanding task, and
`ingest` consumes a FeedbackSet (possibly empty, possibly several records,
out of dispatch order). The exponential-weights family keeps per-dispatch
probability snapshots so a record returning after d slots is weighted by
the probability it was dispatched under.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from collections import deque

import numpy as np

from .config import DelayConfig, PolicyConfig, ScenarioValueError
from .delay import FeedbackSet

E = math.e


class AccountingError(RuntimeError):
    """Feedback arrived for a dispatch the policy never registered."""


def theorem1_params(n_arms: int, horizon: int, delay_budget: float,
                    confidence: float) -> tuple[float, float]:
    """Step size and exploration bias from the closed-form high-probability rule.

    eta = 2*beta = sqrt((ln K + ln(K/delta)) / (D + (e+1)*K*T/2)) with D the
    (estimated) total feedback delay.
    """
    if n_arms < 2:
        raise ScenarioValueError("parameter rule needs n_arms >= 2")
    if horizon < 1:
        raise ScenarioValueError("parameter rule needs horizon >= 1")
    if not 0.0 < confidence < 1.0:
        raise ScenarioValueError("confidence must be in (0,1)")
    if delay_budget < 0:
        raise ScenarioValueError("delay_budget must be >= 0")
    num = math.log(n_arms) + math.log(n_arms / confidence)
    den = delay_budget + (E + 1.0) * n_arms * horizon / 2.0
    eta = math.sqrt(num / den)
    return eta, eta / 2.0


def estimate_loss(loss: float, p_chosen: float, beta: float, chosen: bool = True) -> float:
    """Implicit-exploration importance-weighted loss: l/(p + beta*l) if chosen else 0."""
    if not chosen:
        return 0.0
    if p_chosen <= 0.0:
        raise AccountingError("chosen arm had zero dispatch probability")
    return loss / (p_chosen + beta * loss)


class BasePolicy:
    """Protocol shared by all policies."""

    kind = "base"
    delayed = True  # False => the harness hands feedback over immediately

    def __init__(self, n_arms: int) -> None:
        if n_arms < 1:
            raise ScenarioValueError("n_arms must be >= 1")
        self.n_arms = n_arms

    def select(self, rng: np.random.Generator) -> int:
        raise NotImplementedError

    def note_dispatch(self, task_id: int, arm: int) -> None:
        pass

    def ingest(self, feedback: FeedbackSet, rng: np.random.Generator) -> None:
        raise NotImplementedError


class ExpWeightsPolicy(BasePolicy):
    """Exponential weights over estimated losses, in the log domain.

    Weights are per-slot products exp(-eta * sum of estimates), kept as
    log-weights and renormalized by max-shifted exponentiation, so thirty
    thousand updates cannot underflow. A whole feedback set updates the
    state once: estimates for all records are summed per arm first, then
    weights and probabilities are refreshed. State lives in plain lists;
    the array views exist for inspection.
    """

    kind = "expweights"

    def __init__(self, n_arms: int, eta: float, beta: float,
                 denominator: str = "dispatch") -> None:
        super().__init__(n_arms)
        if eta <= 0:
            raise ScenarioValueError("eta must be > 0")
        if beta < 0:
            raise ScenarioValueError("beta must be >= 0")
        if denominator not in ("dispatch", "delivery"):
            raise ScenarioValueError("denominator must be dispatch|delivery")
        self.eta = eta
        self.beta = beta
        self.denominator = denominator
        self._logw = [0.0] * n_arms
        self._cume = [0.0] * n_arms
        self._snapshots: dict[int, tuple[int, float]] = {}
        self._refresh()

    @property
    def log_weights(self) -> np.ndarray:
        return np.asarray(self._logw)

    @property
    def probs(self) -> np.ndarray:
        return np.asarray(self._probs)

    @property
    def cum_estimates(self) -> np.ndarray:
        return np.asarray(self._cume)

    def _refresh(self) -> None:
        logw = self._logw
        m = max(logw)
        ws = [math.exp(x - m) for x in logw]
        tot = sum(ws)
        self._probs = [w / tot for w in ws]
        cum = []
        acc = 0.0
        for p in self._probs:
            acc += p
            cum.append(acc)
        self._cum = cum

    def select(self, rng: np.random.Generator) -> int:
        u = rng.random()
        idx = bisect_right(self._cum, u)
        return idx if idx < self.n_arms else self.n_arms - 1

    def note_dispatch(self, task_id: int, arm: int) -> None:
        self._snapshots[task_id] = (arm, self._probs[arm])

    def ingest(self, feedback: FeedbackSet, rng: np.random.Generator) -> None:
        if not feedback.records:
            return  # strategy reused untouched
        per_arm: dict[int, float] = {}
        for rec in feedback.records:
            try:
                arm, p_dispatch = self._snapshots.pop(rec.task_id)
            except KeyError:
                raise AccountingError(f"unknown dispatch id {rec.task_id}") from None
            if arm != rec.arm:
                raise AccountingError(
                    f"dispatch {rec.task_id} registered on arm {arm}, feedback says {rec.arm}")
            p = p_dispatch if self.denominator == "dispatch" else self._probs[arm]
            per_arm[arm] = per_arm.get(arm, 0.0) + estimate_loss(rec.loss, p, self.beta)
        eta = self.eta
        for arm, total in per_arm.items():
            self._cume[arm] += total
            self._logw[arm] -= eta * total
        self._refresh()


class DebPolicy(ExpWeightsPolicy):
    """Delayed exponential-weights learner (the proposed policy)."""

    kind = "deb"


class Exp3IxPolicy(ExpWeightsPolicy):
    """Implicit-exploration exponential weights for the no-extra-delay regime.

    Same estimator and update as DebPolicy: with every feedback set holding
    exactly the previous slot's record, the delayed learner degenerates to
    this one, trajectory for trajectory.
    """

    kind = "exp3ix"


class Exp3Policy(BasePolicy):
    """Classic exponential weights with explicit uniform mixing; no delay handling.

    The genie reference: the harness reveals each loss in its dispatch slot.
    """

    kind = "exp3"
    delayed = False

    def __init__(self, n_arms: int, horizon: int, gamma: float | None = None) -> None:
        super().__init__(n_arms)
        if gamma is None:
            gamma = min(1.0, math.sqrt(n_arms * math.log(max(n_arms, 2))
                                       / ((E - 1.0) * max(horizon, 1))))
        if not 0.0 < gamma <= 1.0:
            raise ScenarioValueError("exp3 gamma must be in (0,1]")
        self.gamma = gamma
        self.eta = gamma / n_arms
        self.log_weights = np.zeros(n_arms, dtype=float)
        self._snapshots: dict[int, tuple[int, float]] = {}
        self._refresh()

    def _refresh(self) -> None:
        shifted = self.log_weights - self.log_weights.max()
        w = np.exp(shifted)
        self.probs = (1.0 - self.gamma) * (w / w.sum()) + self.gamma / self.n_arms
        self._cum = np.cumsum(self.probs)

    def select(self, rng: np.random.Generator) -> int:
        u = rng.random()
        return min(int(np.searchsorted(self._cum, u, side="right")), self.n_arms - 1)

    def note_dispatch(self, task_id: int, arm: int) -> None:
        self._snapshots[task_id] = (arm, float(self.probs[arm]))

    def ingest(self, feedback: FeedbackSet, rng: np.random.Generator) -> None:
        if not feedback.records:
            return
        for rec in feedback.records:
            try:
                arm, p = self._snapshots.pop(rec.task_id)
            except KeyError:
                raise AccountingError(f"unknown dispatch id {rec.task_id}") from None
            self.log_weights[arm] -= self.eta * rec.loss / p
        self._refresh()


class FixedPolicy(BasePolicy):
    """Always plays one arm; diagnostic."""

    kind = "fixed"

    def __init__(self, n_arms: int, arm: int = 0) -> None:
        super().__init__(n_arms)
        if not 0 <= arm < n_arms:
            raise ScenarioValueError("fixed arm out of range")
        self.arm = arm

    def select(self, rng: np.random.Generator) -> int:
        return self.arm

    def ingest(self, feedback: FeedbackSet, rng: np.random.Generator) -> None:
        pass


class _ThompsonBase:
    """Bernoulli-Beta Thompson sampler over rewards 1 - loss."""

    def __init__(self, n_arms: int) -> None:
        self.alpha = np.ones(n_arms, dtype=float)
        self.beta_ = np.ones(n_arms, dtype=float)

    def sample_arm(self, rng: np.random.Generator) -> int:
        theta = rng.beta(self.alpha, self.beta_)
        return int(np.argmax(theta))

    def update(self, arm: int, loss: float, rng: np.random.Generator) -> None:
        reward = 1.0 if rng.random() < 1.0 - loss else 0.0
        self.alpha[arm] += reward
        self.beta_[arm] += 1.0 - reward


class QpmdPolicy(BasePolicy):
    """Queued handling of delayed feedback around a Thompson base learner.

    Arriving losses are parked in the queue of their arm; the base learner
    consumes one queued sample whenever the arm it asked for is played, then
    picks its next arm.
    """

    kind = "qpmd"

    def __init__(self, n_arms: int) -> None:
        super().__init__(n_arms)
        self.base = _ThompsonBase(n_arms)
        self.queues: list[deque[float]] = [deque() for _ in range(n_arms)]
        self._desired: int | None = None

    def select(self, rng: np.random.Generator) -> int:
        if self._desired is None:
            self._desired = self.base.sample_arm(rng)
        return self._desired

    def ingest(self, feedback: FeedbackSet, rng: np.random.Generator) -> None:
        for rec in feedback.records:
            self.queues[rec.arm].append(rec.loss)
        if self._desired is not None and self.queues[self._desired]:
            loss = self.queues[self._desired].popleft()
            self.base.update(self._desired, loss, rng)
            self._desired = self.base.sample_arm(rng)


class SdbPolicy(BasePolicy):
    """Queued Thompson learner whose play distribution is bent away from arms
    with many outstanding dispatches (heuristic delay control).

    `inflight_penalty` scales how strongly pending dispatches suppress an
    arm's posterior draw; our constant, not from any reference.
    """

    kind = "sdb"

    def __init__(self, n_arms: int, inflight_penalty: float = 0.1) -> None:
        super().__init__(n_arms)
        self.base = _ThompsonBase(n_arms)
        self.queues: list[deque[float]] = [deque() for _ in range(n_arms)]
        self.inflight = np.zeros(n_arms, dtype=float)
        self.returned = np.zeros(n_arms, dtype=float)
        self.inflight_penalty = inflight_penalty
        self._last_played: int | None = None

    def select(self, rng: np.random.Generator) -> int:
        theta = rng.beta(self.base.alpha, self.base.beta_)
        score = theta - self.inflight_penalty * self.inflight / (1.0 + self.returned)
        arm = int(np.argmax(score))
        self._last_played = arm
        return arm

    def note_dispatch(self, task_id: int, arm: int) -> None:
        self.inflight[arm] += 1.0

    def ingest(self, feedback: FeedbackSet, rng: np.random.Generator) -> None:
        for rec in feedback.records:
            self.queues[rec.arm].append(rec.loss)
            self.inflight[rec.arm] = max(0.0, self.inflight[rec.arm] - 1.0)
            self.returned[rec.arm] += 1.0
        if self._last_played is not None and self.queues[self._last_played]:
            loss = self.queues[self._last_played].popleft()
            self.base.update(self._last_played, loss, rng)


class DucbPolicy(BasePolicy):
    """Discounted lower-confidence index over received losses.

    Statistics decay by `discount` per slot, samples enter pre-aged by their
    feedback delay, and the index mean - bonus*sqrt(xi*ln N / n) is
    minimized, lowest arm index winning ties. The short default memory
    (discount 0.95, about twenty samples) reflects this baseline's
    recency-driven design; bonus/xi follow the discounted-UCB literature.
    Arms never dispatched are tried first. All constants are ours, exposed
    through policy options.
    """

    kind = "ducb"

    def __init__(self, n_arms: int, discount: float = 0.95,
                 bonus: float = 2.0, xi: float = 0.6) -> None:
        super().__init__(n_arms)
        if not 0.0 < discount <= 1.0:
            raise ScenarioValueError("ducb discount must be in (0,1]")
        self.discount = discount
        self.bonus = bonus
        self.xi = xi
        self.counts = np.zeros(n_arms, dtype=float)
        self.sums = np.zeros(n_arms, dtype=float)
        self.dispatched = np.zeros(n_arms, dtype=int)
        self._last_slot = 0

    def select(self, rng: np.random.Generator) -> int:
        if np.any(self.dispatched == 0):
            return int(np.argmin(self.dispatched))
        seen = np.maximum(self.counts, 1e-12)
        total = max(float(self.counts.sum()), E)
        index = self.sums / seen - self.bonus * np.sqrt(self.xi * np.log(total) / seen)
        return int(np.argmin(index))

    def note_dispatch(self, task_id: int, arm: int) -> None:
        self.dispatched[arm] += 1

    def ingest(self, feedback: FeedbackSet, rng: np.random.Generator) -> None:
        gap = feedback.slot - self._last_slot
        if gap > 0 and self.discount < 1.0:
            factor = self.discount ** gap
            self.counts *= factor
            self.sums *= factor
        self._last_slot = max(self._last_slot, feedback.slot)
        for rec in feedback.records:
            age = self.discount ** max(feedback.slot - rec.dispatch_slot, 0)
            self.counts[rec.arm] += age
            self.sums[rec.arm] += age * rec.loss


class BlotPolicy(BasePolicy):
    """Undiscounted confidence index over whatever feedback is currently available."""

    kind = "blot"

    def __init__(self, n_arms: int, alpha: float = 2.0) -> None:
        super().__init__(n_arms)
        self.alpha = alpha
        self.counts = np.zeros(n_arms, dtype=float)
        self.sums = np.zeros(n_arms, dtype=float)
        self.dispatched = np.zeros(n_arms, dtype=int)
        self._slot = 1

    def select(self, rng: np.random.Generator) -> int:
        if np.any(self.dispatched == 0):
            return int(np.argmin(self.dispatched))
        if np.any(self.counts == 0):
            return int(np.argmin(self.counts))
        index = (self.sums / self.counts
                 - np.sqrt(self.alpha * math.log(max(self._slot, 2)) / self.counts))
        return int(np.argmin(index))

    def note_dispatch(self, task_id: int, arm: int) -> None:
        self.dispatched[arm] += 1

    def ingest(self, feedback: FeedbackSet, rng: np.random.Generator) -> None:
        self._slot = max(self._slot, feedback.slot)
        for rec in feedback.records:
            self.counts[rec.arm] += 1.0
            self.sums[rec.arm] += rec.loss


def make_policy(n_arms: int, cfg: PolicyConfig, horizon: int,
                delay_cfg: DelayConfig) -> BasePolicy:
    """Instantiate a policy by kind; eta/beta default to the closed-form rule."""
    kind = cfg.kind
    opts = cfg.options
    if kind in ("deb", "exp3ix"):
        if cfg.eta is not None:
            eta = cfg.eta
            beta = cfg.beta if cfg.beta is not None else eta / 2.0
        elif n_arms == 1:
            eta, beta = 1.0, 0.5  # degenerate bandit; values never matter
        else:
            budget = cfg.delay_budget
            if budget is None:
                budget = delay_cfg.d_max * horizon / 2.0
            eta, beta = theorem1_params(n_arms, horizon, budget, cfg.confidence)
            if cfg.beta is not None:
                beta = cfg.beta
        cls = DebPolicy if kind == "deb" else Exp3IxPolicy
        return cls(n_arms, eta, beta, denominator=opts.get("denominator", "dispatch"))
    if kind == "exp3":
        return Exp3Policy(n_arms, horizon, gamma=opts.get("gamma"))
    if kind == "qpmd":
        return QpmdPolicy(n_arms)
    if kind == "sdb":
        return SdbPolicy(n_arms, inflight_penalty=opts.get("inflight_penalty", 0.1))
    if kind == "ducb":
        return DucbPolicy(n_arms, discount=opts.get("discount", 0.95),
                          bonus=opts.get("bonus", 2.0), xi=opts.get("xi", 0.6))
    if kind == "blot":
        return BlotPolicy(n_arms, alpha=opts.get("alpha", 2.0))
    if kind == "fixed":
        return FixedPolicy(n_arms, arm=opts.get("arm", 0))
    raise ScenarioValueError(
        f"unknown policy kind {kind!r}; valid kinds: deb, exp3, exp3ix, qpmd, sdb, ducb, blot, fixed")
