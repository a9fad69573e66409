"""Pieces shared by every policy runner."""
from __future__ import annotations

from typing import Callable

import numpy as np

from ..bandit import UserModel
from ..config import RunConfig
from ..environment import Environment, Interaction
from ..errors import InputError
from ..linalg import GramInverse
from ..metrics import MetricsLog, MetricsRecorder
from ..runtime import CommLedger, Runtime, WorkItem, tree_reduce


def serve(env: Environment, itx: Interaction, choice: int) -> tuple[int, int, float]:
    """Reveal the reward of ``choice`` and its expected regret."""
    reward = env.reward(itx, choice)
    regret = env.best_reward(itx) - env.expected_reward(itx, choice)
    return choice, reward, regret


class Stream:
    """Forward-only cursor over an environment, cut into windows."""

    def __init__(self, env: Environment):
        self.env = env
        self.pos = 0
        self.total = len(env)

    @property
    def exhausted(self) -> bool:
        return self.pos >= self.total

    def take(self, count: int) -> list[Interaction]:
        stop = min(self.pos + max(count, 0), self.total)
        out = self.env.interactions(self.pos, stop)
        self.pos = stop
        return out

    def take_while_under(self, limits, cap: int) -> list[Interaction]:
        """Consume interactions while their user is below its window limit.

        The window closes before the first interaction whose user already
        used ``limits[user]`` slots in this window, or after ``cap`` items.
        """
        used: dict[int, int] = {}
        out = []
        while self.pos < self.total and len(out) < cap:
            itx = self.env.interaction(self.pos)
            u = itx.user_id
            if used.get(u, 0) >= limits[u]:
                break
            used[u] = used.get(u, 0) + 1
            out.append(itx)
            self.pos += 1
        return out

    def take_until_count(self, counts, limit: int, cap: int) -> tuple[list[Interaction], bool]:
        """Consume until some user's running count reaches ``limit``.

        ``counts`` is updated in place. Returns the window and whether the
        limit was hit (as opposed to running out of stream or ``cap``).
        """
        out = []
        while self.pos < self.total and len(out) < cap:
            itx = self.env.interaction(self.pos)
            self.pos += 1
            out.append(itx)
            counts[itx.user_id] += 1
            if counts[itx.user_id] >= limit:
                return out, True
        return out, False


class ClusterAggregate:
    """Pooled ridge state ``(Mc, bc)`` of one cluster with a maintained inverse."""

    __slots__ = ("gram", "b")

    def __init__(self, gram: GramInverse, b: np.ndarray):
        self.gram = gram
        self.b = b

    @property
    def m(self) -> np.ndarray:
        return self.gram.m

    @property
    def minv(self) -> np.ndarray:
        return self.gram.minv

    def absorb(self, x: np.ndarray, reward: float) -> None:
        self.gram.add_outer(x)
        if reward:
            self.b += reward * x


def aggregate_arrays(models: list[UserModel], members, mode: str = "listing") -> tuple[np.ndarray, np.ndarray]:
    """``(I + sum Mu, sum bu)`` over ``members``, or ``I + sum(Mu - I)`` in offset mode."""
    if len(members) == 0:
        raise InputError("cluster has no members")
    d = models[members[0]].dim
    m = np.array(tree_reduce([models[u].m for u in members], np.add), copy=True)
    b = np.array(tree_reduce([models[u].b for u in members], np.add), copy=True)
    if mode == "listing":
        m += np.eye(d)
    elif mode == "offset":
        m -= (len(members) - 1) * np.eye(d)
    else:
        raise InputError(f"unknown cluster_agg_mode {mode!r}")
    return m, b


def build_aggregate(models, members, mode: str = "listing") -> ClusterAggregate:
    m, b = aggregate_arrays(models, members, mode)
    return ClusterAggregate(GramInverse(m), b)


class Runner:
    """Base class: owns the stream, recorder, ledger and barrier hooks."""

    name = "base"

    def __init__(self, env: Environment, config: RunConfig, runtime: Runtime | None = None):
        self.env = env
        self.config = config
        self.n, self.d = env.n_users, env.d
        self.stream = Stream(env)
        self.recorder = MetricsRecorder(config.checkpoint_every, len(env))
        self.ledger = CommLedger()
        self._own_runtime = runtime is None
        self.runtime = runtime or Runtime(config.n_workers)
        self.counters: dict[str, int] = {}
        # callables (runner, event) fired after steps and barriers, used by tests
        self.hooks: list[Callable] = []

    def fire(self, event: str) -> None:
        for hook in self.hooks:
            hook(self, event)

    def n_clusters(self) -> int:
        return 0

    def labels(self) -> list[int] | None:
        return None

    def sync_state(self) -> None:
        self.recorder.set_state(self.n_clusters(), self.ledger.total_bytes(), self.counters)

    def observe(self, outcomes) -> None:
        self.recorder.observe([o[1] for o in outcomes], [o[2] for o in outcomes])

    def map_items(self, window, key_of, task) -> list:
        items = [WorkItem(key_of(itx), itx.t, itx) for itx in window]
        return self.runtime.map(items, lambda it: task(it.payload))

    def loop(self) -> None:
        raise NotImplementedError

    def run(self) -> MetricsLog:
        try:
            self.sync_state()
            self.loop()
        finally:
            if self._own_runtime:
                self.runtime.close()
        rows = self.recorder.finish()
        summary = {
            "T": len(self.env),
            "cum_reward": self.recorder.cum_reward,
            "cum_regret": self.recorder.cum_regret,
            "clusters": self.n_clusters(),
            "comm_bytes": self.ledger.total_bytes(),
            "counters": dict(self.counters),
            "n_users": self.n,
            "d": self.d,
        }
        labels = self.labels()
        if labels is not None:
            summary["labels"] = labels
        return MetricsLog(self.name, rows, summary, self.config.to_dict(), self.env.fingerprint())
