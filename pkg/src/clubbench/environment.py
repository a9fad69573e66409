"""Interaction streams: synthetic planted clusters and logged-data replay.

Every random quantity is drawn from a substream keyed by ``(seed, tag, ...)``
so that interaction ``t`` is the same regardless of which policy consumes it,
in which order, or on how many workers.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, ReplayParseError, SchemaError

# substream tags
TAG_THETA = 1
TAG_INTERACTION = 2
TAG_RANDOM_POLICY = 3
TAG_EXCHANGE = 4
TAG_NETWORK = 5

_SEED_MASK = (1 << 64) - 1


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``."""
    return np.random.default_rng([seed & _SEED_MASK, *keys])


@dataclass(frozen=True, eq=False)
class Interaction:
    t: int
    user_id: int
    ctx: np.ndarray
    positive_index: int
    payoffs: np.ndarray = field(repr=False)
    draw: float = field(default=0.0, repr=False)

    @property
    def K(self) -> int:
        return self.ctx.shape[0]


@dataclass(frozen=True)
class SyntheticConfig:
    n_users: int
    n_interactions: int
    d: int = 25
    K: int = 20
    c_true: int = 20
    noise: float = 0.0
    seed: int = 0
    # weight of the cluster preference in the positive item, the rest is a random unit vector
    signal: float = 0.8
    # item features are truncated to multiples of 2**-quant_bits (0 disables)
    quant_bits: int = 12

    def validate(self) -> None:
        if self.n_users < 1:
            raise InputError("n_users must be >= 1")
        if self.n_interactions < 0:
            raise InputError("n_interactions must be >= 0")
        if self.d < 1:
            raise InputError("d must be >= 1")
        if self.K < 2:
            raise InputError("K must be >= 2")
        if not 1 <= self.c_true <= self.n_users:
            raise InputError("c_true must lie in [1, n_users]")
        if not 0.0 <= self.noise <= 1.0:
            raise InputError("noise must lie in [0, 1]")
        if not 0.0 < self.signal <= 1.0:
            raise InputError("signal must lie in (0, 1]")
        if not 0 <= self.quant_bits <= 26:
            raise InputError("quant_bits must lie in [0, 26]")


class Environment:
    """Common surface of synthetic and replay streams."""

    kind = "abstract"
    n_users: int
    d: int
    K: int

    def __len__(self) -> int:
        raise NotImplementedError

    def interaction(self, t: int) -> Interaction:
        raise NotImplementedError

    def interactions(self, start: int = 0, stop: int | None = None) -> list[Interaction]:
        stop = len(self) if stop is None else min(stop, len(self))
        return [self.interaction(t) for t in range(start, stop)]

    def __iter__(self):
        for t in range(len(self)):
            yield self.interaction(t)

    def _check_choice(self, itx: Interaction, choice: int) -> None:
        if not 0 <= choice < itx.K:
            raise InputError(f"choice {choice} outside [0, {itx.K})")

    def expected_reward(self, itx: Interaction, choice: int) -> float:
        self._check_choice(itx, choice)
        return float(itx.payoffs[choice])

    def best_reward(self, itx: Interaction) -> float:
        return float(itx.payoffs.max())

    def reward(self, itx: Interaction, choice: int) -> int:
        raise NotImplementedError

    def fingerprint(self) -> str:
        raise NotImplementedError


class SyntheticEnvironment(Environment):
    kind = "synthetic"

    def __init__(self, cfg: SyntheticConfig):
        cfg.validate()
        self.cfg = cfg
        self.n_users, self.d, self.K = cfg.n_users, cfg.d, cfg.K
        theta = substream(cfg.seed, TAG_THETA).normal(size=(cfg.c_true, cfg.d))
        self.theta = theta / np.linalg.norm(theta, axis=1, keepdims=True)
        self.user_cluster = np.arange(cfg.n_users) % cfg.c_true
        self._scale = float(2 ** cfg.quant_bits) if cfg.quant_bits else 0.0

    def __len__(self) -> int:
        return self.cfg.n_interactions

    def true_labels(self) -> np.ndarray:
        return self.user_cluster.copy()

    def payoffs(self, user: int, ctx: np.ndarray) -> np.ndarray:
        """Click probability of every item in ``ctx`` for ``user``."""
        theta = self.theta[self.user_cluster[user]]
        noise = self.cfg.noise
        return np.clip(np.asarray(ctx) @ theta, 0.0, 1.0) * (1.0 - noise) + noise * 0.5

    def interaction(self, t: int) -> Interaction:
        if not 0 <= t < len(self):
            raise IndexError(t)
        cfg = self.cfg
        rng = substream(cfg.seed, TAG_INTERACTION, t)
        user = int(rng.integers(cfg.n_users))
        items = rng.normal(size=(cfg.K, cfg.d))
        items /= np.linalg.norm(items, axis=1, keepdims=True)
        g = rng.normal(size=cfg.d)
        g /= np.linalg.norm(g)
        pos = int(rng.integers(cfg.K))
        theta = self.theta[self.user_cluster[user]]
        x = cfg.signal * theta + (1.0 - cfg.signal) * g
        items[pos] = x / np.linalg.norm(x)
        if self._scale:
            # truncation toward zero keeps every norm <= 1
            items = np.trunc(items * self._scale) / self._scale
        draw = float(rng.random())
        return Interaction(t, user, items, pos, self.payoffs(user, items), draw)

    def reward(self, itx: Interaction, choice: int) -> int:
        self._check_choice(itx, choice)
        return int(itx.draw < itx.payoffs[choice])

    def fingerprint(self) -> str:
        return "synthetic:" + json.dumps(asdict(self.cfg), sort_keys=True)


class ReplayEnvironment(Environment):
    """A finite logged stream with exactly one positive item per context."""

    kind = "replay"

    def __init__(self, n_users: int, d: int, K: int, records: list[Interaction], digest: str = ""):
        self.n_users, self.d, self.K = n_users, d, K
        self._records = records
        self._digest = digest

    @classmethod
    def from_arrays(cls, n_users, user_ids, contexts, positives, ts=None) -> "ReplayEnvironment":
        contexts = np.asarray(contexts, dtype=np.float64)
        T, K, d = contexts.shape
        ts = range(T) if ts is None else ts
        records = [
            Interaction(int(t), int(u), contexts[i], int(p), _one_hot(K, int(p)))
            for i, (t, u, p) in enumerate(zip(ts, user_ids, positives))
        ]
        return cls(n_users, d, K, records)

    def __len__(self) -> int:
        return len(self._records)

    def interaction(self, t: int) -> Interaction:
        return self._records[t]

    def reward(self, itx: Interaction, choice: int) -> int:
        self._check_choice(itx, choice)
        return int(choice == itx.positive_index)

    def fingerprint(self) -> str:
        if not self._digest:
            h = hashlib.sha256()
            h.update(dump_replay(self).encode())
            self._digest = h.hexdigest()
        return "replay:" + self._digest


def _one_hot(K: int, p: int) -> np.ndarray:
    v = np.zeros(K)
    v[p] = 1.0
    return v


def gen_synthetic(cfg: SyntheticConfig) -> SyntheticEnvironment:
    return SyntheticEnvironment(cfg)


def random_policy(ctx, rng: np.random.Generator) -> int:
    return int(rng.integers(len(ctx)))


# --- replay file format -----------------------------------------------------
#
# line 1:   n_users,d,K
# line 2..: t,user_id,positive_index,x_0_0,...,x_{K-1}_{d-1}
#
# floats use Python's shortest round-trip repr, so load -> dump is byte-exact
# for files written by dump_replay.


def _parse_int(tok: str, line: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ReplayParseError(f"{what} {tok!r} is not an integer", line) from None


def parse_replay(text: str) -> ReplayEnvironment:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ReplayParseError("missing header", 1)
    head = lines[0].split(",")
    if len(head) != 3:
        raise ReplayParseError("header must be 'n_users,d,K'", 1)
    n_users, d, K = (_parse_int(tok, 1, "header field") for tok in head)
    if n_users < 1 or d < 1 or K < 1:
        raise SchemaError("header values must be positive", 1)
    width = 3 + K * d
    records = []
    for lineno, raw in enumerate(lines[1:], start=2):
        fields = raw.split(",")
        if len(fields) != width:
            raise SchemaError(f"expected {width} fields for d={d}, K={K}, got {len(fields)}", lineno)
        t = _parse_int(fields[0], lineno, "t")
        user = _parse_int(fields[1], lineno, "user_id")
        pos = _parse_int(fields[2], lineno, "positive_index")
        if not 0 <= user < n_users:
            raise SchemaError(f"user_id {user} outside [0, {n_users})", lineno)
        if not 0 <= pos < K:
            raise SchemaError(f"positive_index {pos} outside [0, {K})", lineno)
        try:
            values = np.array([float(x) for x in fields[3:]])
        except ValueError:
            raise ReplayParseError("non-numeric feature value", lineno) from None
        if not np.all(np.isfinite(values)):
            raise ReplayParseError("feature values must be finite", lineno)
        records.append(Interaction(t, user, values.reshape(K, d), pos, _one_hot(K, pos)))
    digest = hashlib.sha256(text.encode()).hexdigest()
    return ReplayEnvironment(n_users, d, K, records, digest)


def load_replay(path) -> ReplayEnvironment:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return parse_replay(fh.read())


def dump_replay(env: ReplayEnvironment) -> str:
    out = [f"{env.n_users},{env.d},{env.K}"]
    for itx in env:
        feats = ",".join(repr(float(v)) for v in itx.ctx.ravel())
        out.append(f"{itx.t},{itx.user_id},{itx.positive_index},{feats}")
    return "\n".join(out) + "\n"


def write_replay(env: ReplayEnvironment, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_replay(env))
    return path
