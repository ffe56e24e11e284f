"""Delayed feedback channel: buffering, out-of-order delivery, timeouts, retries.

A dispatch at slot s whose total latency is O becomes observable after
d = max(1, ceil(O)) slots. Feedback slower than d_max is a failure: the
loss is forced to 1 and delivered at s + d_max, and the task may be
re-offloaded (bounded by retry_cap).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .config import DelayConfig, LossConfig
from .env import normalize_loss


@dataclass(slots=True)
class FeedbackRecord:
    task_id: int
    dispatch_slot: int
    arm: int
    loss: float
    delay: int          # raw d_s; delivery happens at dispatch_slot + min(delay, d_max)
    timed_out: bool
    retries: int = 0    # re-dispatches already spent on this task lineage

    def delivery_slot(self, cfg: DelayConfig) -> int:
        return self.dispatch_slot + min(self.delay, cfg.d_max)


@dataclass(frozen=True)
class FeedbackSet:
    """Everything that becomes observable at one slot; possibly empty."""

    slot: int
    records: tuple[FeedbackRecord, ...]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def schedule_feedback(task_id: int, dispatch_slot: int, arm: int, total_latency: float,
                      loss_cfg: LossConfig, delay_cfg: DelayConfig,
                      retries: int = 0) -> FeedbackRecord:
    """Turn a realized total latency into a (possibly timed-out) feedback record."""
    if total_latency < 0:
        raise ValueError("total latency must be non-negative")
    d = max(1, math.ceil(total_latency))
    if d >= delay_cfg.d_max:
        return FeedbackRecord(task_id, dispatch_slot, arm, 1.0, d, True, retries)
    return FeedbackRecord(task_id, dispatch_slot, arm,
                          normalize_loss(total_latency, loss_cfg), d, False, retries)


def failure_feedback(task_id: int, dispatch_slot: int, arm: int, delay_cfg: DelayConfig,
                     retries: int = 0) -> FeedbackRecord:
    """Record for a task that will never be processed (e.g. lost a collision)."""
    return FeedbackRecord(task_id, dispatch_slot, arm, 1.0, delay_cfg.d_max, True, retries)


@dataclass
class DelayBuffer:
    """Holds in-flight feedback keyed by delivery slot, in insertion order."""

    cfg: DelayConfig
    _due: dict[int, list[FeedbackRecord]] = field(default_factory=dict)
    _retry_queue: dict[int, list[FeedbackRecord]] = field(default_factory=dict)
    outstanding: int = 0

    def add(self, record: FeedbackRecord) -> None:
        self._due.setdefault(record.delivery_slot(self.cfg), []).append(record)
        self.outstanding += 1

    def collect(self, slot: int) -> FeedbackSet:
        """Pop exactly the records due at `slot`; stashes timeouts for retry queries."""
        if slot < 1:
            raise ValueError("slots are 1-based")
        records = self._due.pop(slot, [])
        self.outstanding -= len(records)
        retriable = [r for r in records if r.timed_out and r.retries < self.cfg.retry_cap]
        if retriable:
            self._retry_queue[slot] = retriable
        return FeedbackSet(slot, tuple(records))

    def reoffload_due(self, slot: int) -> list[FeedbackRecord]:
        """Timed-out records from `slot` still holding retry budget.

        The caller re-dispatches them at slot+1 as additional decisions; the
        returned records carry the incremented retry count to stamp onto the
        fresh dispatch.
        """
        out = self._retry_queue.pop(slot, [])
        return [FeedbackRecord(r.task_id, r.dispatch_slot, r.arm, r.loss, r.delay,
                               r.timed_out, r.retries + 1) for r in out]

    def drain(self) -> list[FeedbackRecord]:
        """Remaining in-flight records (end-of-run accounting)."""
        out = [r for slot in sorted(self._due) for r in self._due[slot]]
        self._due.clear()
        self.outstanding = 0
        return out
