"""Checkpointed reward/regret/cluster/byte series and their file formats."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError

CSV_HEADER = ("t", "cum_reward", "cum_regret", "clusters", "comm_bytes")


@dataclass(frozen=True)
class Checkpoint:
    t: int
    cum_reward: int
    cum_regret: float
    clusters: int
    comm_bytes: int
    counters: dict = field(default_factory=dict, compare=True, hash=False)

    def csv_row(self) -> list[str]:
        return [str(self.t), str(self.cum_reward), repr(float(self.cum_regret)),
                str(self.clusters), str(self.comm_bytes)]


@dataclass
class MetricsLog:
    algorithm: str
    rows: list[Checkpoint] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    environment: str = ""

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    @property
    def final(self) -> Checkpoint | None:
        return self.rows[-1] if self.rows else None

    @property
    def cum_reward(self) -> int:
        return self.summary.get("cum_reward", 0)

    @property
    def cum_regret(self) -> float:
        return self.summary.get("cum_regret", 0.0)

    def same_results(self, other: "MetricsLog") -> bool:
        """Series and summary equality, ignoring run configuration (e.g. worker count)."""
        return self.rows == other.rows and self.summary == other.summary


class MetricsRecorder:
    """Turns per-interaction outcomes into checkpoint rows.

    A row for checkpoint ``t`` captures the cluster count, ledger bytes and
    counters in force once every barrier scheduled at stream position ``t``
    has completed.
    """

    def __init__(self, every: int, total: int):
        if every < 1:
            raise InputError("checkpoint_every must be >= 1")
        self.every = every
        self.total = total
        self.t = 0
        self.cum_reward = 0
        self.cum_regret = 0.0
        self.rows: list[Checkpoint] = []
        self._pending: tuple[int, int, float] | None = None
        self.clusters = 0
        self.comm_bytes = 0
        self.counters: dict = {}

    def set_state(self, clusters: int, comm_bytes: int, counters: dict | None = None) -> None:
        self.clusters = int(clusters)
        self.comm_bytes = int(comm_bytes)
        if counters is not None:
            self.counters = dict(counters)

    def _emit(self, t, reward, regret):
        self.rows.append(Checkpoint(t, reward, regret, self.clusters, self.comm_bytes, dict(self.counters)))

    def _flush(self):
        if self._pending is not None:
            self._emit(*self._pending)
            self._pending = None

    def observe(self, rewards, regrets) -> None:
        """Record a block of consecutive interactions with no barrier inside it."""
        if len(rewards) == 0:
            return
        self._flush()
        for r, g in zip(rewards, regrets):
            self.cum_reward += int(r)
            self.cum_regret += float(g)
            self.t += 1
            if self.t % self.every == 0 or self.t == self.total:
                self._flush()
                self._pending = (self.t, self.cum_reward, self.cum_regret)

    def finish(self) -> list[Checkpoint]:
        self._flush()
        return self.rows


def emit_metrics(log: MetricsLog, path) -> Path:
    """Write ``<path>`` (CSV series) and ``<path>.json`` (config and summary)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in log.rows:
            w.writerow(row.csv_row())
    sidecar = {
        "algorithm": log.algorithm,
        "environment": log.environment,
        "config": log.config,
        "summary": log.summary,
        "counters": [row.counters for row in log.rows],
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return path


def read_metrics(path) -> MetricsLog:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != CSV_HEADER:
            raise InputError(f"{path}: unexpected metrics header {header}")
        raw = list(reader)
    meta = {}
    side = path.with_suffix(".json")
    if side.exists():
        meta = json.loads(side.read_text())
    counters = meta.get("counters") or [{} for _ in raw]
    rows = [Checkpoint(int(t), int(r), float(g), int(c), int(b), counters[i])
            for i, (t, r, g, c, b) in enumerate(raw)]
    return MetricsLog(meta.get("algorithm", path.stem), rows, meta.get("summary", {}),
                      meta.get("config", {}), meta.get("environment", ""))
