"""Deterministic simulated-distributed executor.

Work items carry a key (user id or cluster id). Items sharing a key run one
after another in sequence order on the worker that owns the key; different
keys may run concurrently on a thread pool. Because tasks only touch the state
of their own key, results are bit-identical for any worker count.
"""
from __future__ import annotations

from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from .errors import InputError

BYTES_PER_VALUE = 8


@dataclass(frozen=True)
class WorkItem:
    key: int
    seq: int
    payload: Any


@dataclass(frozen=True)
class ShardPlan:
    n_workers: int = 1

    def __post_init__(self):
        if self.n_workers < 1:
            raise InputError("n_workers must be >= 1")

    def worker_of(self, key: int) -> int:
        # multiplicative hash so consecutive ids spread across workers
        return ((int(key) * 0x9E3779B1) & 0xFFFFFFFF) % self.n_workers


def _run_shard(task, indexed: list[tuple[int, WorkItem]], out: list, errors: dict):
    for idx, item in indexed:
        try:
            out[idx] = task(item)
        except Exception as exc:  # surfaced by par_map_serialized
            errors[idx] = exc
            return


def par_map_serialized(plan: ShardPlan, items: Sequence[WorkItem], task: Callable[[WorkItem], Any],
                       pool: ThreadPoolExecutor | None = None) -> list:
    """Run ``task`` over keyed items; outputs come back in input order.

    Items with equal keys execute in ``seq`` order. If any task raises, the
    error of the earliest failing item (in input order) is re-raised.
    """
    order = sorted(range(len(items)), key=lambda i: (items[i].seq, i))
    shards: dict[int, list[tuple[int, WorkItem]]] = defaultdict(list)
    for i in order:
        shards[plan.worker_of(items[i].key)].append((i, items[i]))
    out: list = [None] * len(items)
    errors: dict[int, Exception] = {}
    if plan.n_workers == 1 or len(shards) <= 1:
        for shard in shards.values():
            _run_shard(task, shard, out, errors)
    else:
        owned = pool is None
        pool = pool or ThreadPoolExecutor(max_workers=plan.n_workers)
        try:
            futures = [pool.submit(_run_shard, task, shard, out, errors) for shard in shards.values()]
            for f in futures:
                f.result()
        finally:
            if owned:
                pool.shutdown()
    if errors:
        raise errors[min(errors)]
    return out


def tree_reduce(values: Sequence, combine: Callable[[Any, Any], Any]):
    """Fold with a fixed balanced pairing over index order.

    Level by level, neighbours ``(0,1), (2,3), ...`` are combined and an odd
    tail is carried up unchanged. The tree depends only on ``len(values)``.
    """
    level = list(values)
    if not level:
        raise InputError("tree_reduce needs at least one value")
    while len(level) > 1:
        nxt = [combine(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


@dataclass(frozen=True)
class LedgerEvent:
    phase: int
    kind: str
    value_count: int

    @property
    def bytes(self) -> int:
        return BYTES_PER_VALUE * self.value_count


@dataclass
class CommLedger:
    """Append-only record of simulated inter-node transfers."""

    events: list[LedgerEvent] = field(default_factory=list)
    _total: int = 0

    def record(self, phase: int, kind: str, value_count: int) -> "CommLedger":
        if value_count < 0:
            raise InputError("value_count must be non-negative")
        ev = LedgerEvent(phase, kind, int(value_count))
        self.events.append(ev)
        self._total += ev.bytes
        return self

    def total_bytes(self, phase: int | None = None, kind: str | None = None) -> int:
        if phase is None and kind is None:
            return self._total
        return sum(e.bytes for e in self.events
                   if (phase is None or e.phase == phase) and (kind is None or e.kind == kind))

    def count(self, kind: str | None = None) -> int:
        return sum(1 for e in self.events if kind is None or e.kind == kind)


def ledger_record(ledger: CommLedger, phase: int, kind: str, value_count: int) -> CommLedger:
    return ledger.record(phase, kind, value_count)


class Runtime:
    """Owns the shard plan and a reusable thread pool."""

    def __init__(self, n_workers: int = 1):
        self.plan = ShardPlan(n_workers)
        self._pool = ThreadPoolExecutor(max_workers=n_workers) if n_workers > 1 else None

    @property
    def n_workers(self) -> int:
        return self.plan.n_workers

    def map(self, items: Sequence[WorkItem], task) -> list:
        return par_map_serialized(self.plan, items, task, self._pool)

    def map_keys(self, keys: Iterable[int], task) -> list:
        """One item per key: embarrassingly parallel per-key work."""
        items = [WorkItem(k, 0, k) for k in keys]
        return self.map(items, lambda it: task(it.payload))

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
