"""DCCB: per-user bandits with delayed update buffers and random peer exchange."""
from __future__ import annotations

import numpy as np

from ..bandit import ucb_select
from ..environment import TAG_EXCHANGE, substream
from ..graph import Clustering, UserGraph, connected_components, should_disconnect
from ..linalg import spd_inverse, spd_solve
from ..metrics import MetricsLog
from .common import Runner, serve


def _dense(entry) -> np.ndarray:
    if isinstance(entry, tuple):
        coefs, vecs = entry
        return (vecs.T * coefs) @ vecs
    return entry


def _avg_matrix(a, b, d: int):
    """Element-wise mean of two matrix slots; ``None`` is the zero matrix."""
    if a is None and b is None:
        return None
    if isinstance(a, tuple) or a is None:
        if isinstance(b, tuple) or b is None:
            parts = [p for p in (a, b) if p is not None]
            coefs = np.concatenate([p[0] for p in parts]) * 0.5
            vecs = np.concatenate([p[1] for p in parts])
            if len(coefs) * (d + 1) <= d * d:
                return coefs, vecs
            return _dense((coefs, vecs))
    da = np.zeros((d, d)) if a is None else _dense(a)
    db = np.zeros((d, d)) if b is None else _dense(b)
    return 0.5 * (da + db)


def _avg_vector(a, b):
    if a is None and b is None:
        return None
    if a is None:
        return 0.5 * b
    if b is None:
        return 0.5 * a
    return 0.5 * (a + b)


class UpdateQueue:
    """Fixed-length FIFO of (matrix, vector) updates, initially all zeros.

    Only non-zero slots are stored, keyed by absolute position. A matrix slot
    holds weighted rank-1 factors ``(coefs, vecs)`` until a dense array is
    smaller, so thousands of mostly-empty buffers stay cheap.
    """

    def __init__(self, length: int, d: int):
        self.length = length
        self.d = d
        self.head = 0
        self._mat: dict[int, object] = {}
        self._vec: dict[int, np.ndarray] = {}

    def __len__(self) -> int:
        return self.length

    @property
    def n_nonzero(self) -> int:
        return len(self._mat.keys() | self._vec.keys())

    def cycle(self, x: np.ndarray, reward: float):
        """Pop the head slot and push ``(x x^T, reward * x)`` at the tail.

        Returns the popped ``(matrix, vector)``; ``None`` stands for zero.
        """
        m = self._mat.pop(self.head, None)
        v = self._vec.pop(self.head, None)
        self.head += 1
        tail = self.head + self.length - 1
        self._mat[tail] = (np.ones(1), x[None, :].copy())
        if reward:
            self._vec[tail] = reward * x
        return (None if m is None else _dense(m)), v

    def entry(self, q: int) -> tuple[np.ndarray, np.ndarray]:
        """Dense ``(matrix, vector)`` at relative position ``q`` (0 is the head)."""
        m = self._mat.get(self.head + q)
        v = self._vec.get(self.head + q)
        return (np.zeros((self.d, self.d)) if m is None else _dense(m),
                np.zeros(self.d) if v is None else v.copy())

    def matrix_sum(self) -> np.ndarray:
        out = np.zeros((self.d, self.d))
        for k in sorted(self._mat):
            out += _dense(self._mat[k])
        return out

    def vector_sum(self) -> np.ndarray:
        out = np.zeros(self.d)
        for k in sorted(self._vec):
            out += self._vec[k]
        return out

    def clear(self) -> None:
        self._mat.clear()
        self._vec.clear()

    def averaged_with(self, other: "UpdateQueue") -> tuple[dict, dict]:
        """Slot-wise mean with ``other``, aligned by position from each head."""
        shift = other.head - self.head
        mat, vec = {}, {}
        for k in sorted(self._mat.keys() | {j - shift for j in other._mat}):
            mat[k] = _avg_matrix(self._mat.get(k), other._mat.get(k + shift), self.d)
        for k in sorted(self._vec.keys() | {j - shift for j in other._vec}):
            vec[k] = _avg_vector(self._vec.get(k), other._vec.get(k + shift))
        return mat, vec

    def assign(self, slots: tuple[dict, dict]) -> None:
        self._mat, self._vec = slots


class DccbUser:
    """Current copies ``(mw, bw)``, local copies and the update buffer of one user."""

    __slots__ = ("d", "mw", "bw", "mw_local", "bw_local", "queue", "occ", "_w", "_minv")

    def __init__(self, d: int, length: int):
        self.d = d
        self.mw = np.eye(d)
        self.bw = np.zeros(d)
        self.mw_local = np.eye(d)
        self.bw_local = np.zeros(d)
        self.queue = UpdateQueue(length, d)
        self.occ = 0
        self._w = None
        self._minv = None

    def current(self) -> tuple[np.ndarray, np.ndarray]:
        """``(mw^-1 bw, mw^-1)``, cached until the current copies change."""
        if self._minv is None:
            self._minv = spd_inverse(self.mw)
        if self._w is None:
            self._w = spd_solve(self.mw, self.bw)
        return self._w, self._minv

    def local_vector(self) -> np.ndarray:
        return spd_solve(self.mw_local, self.bw_local)

    def absorb(self, x: np.ndarray, reward: float) -> None:
        self.mw_local += np.outer(x, x)
        if reward:
            self.bw_local += reward * x
        m, v = self.queue.cycle(x, reward)
        if m is not None:
            self.mw += m
            self._minv = self._w = None
        if v is not None:
            self.bw += v
            self._w = None
        self.occ += 1

    def reset(self) -> None:
        """Zero the buffer and return the current copies to ``(I, 0)``."""
        self.queue.clear()
        self.mw = np.eye(self.d)
        self.bw = np.zeros(self.d)
        self._w = self._minv = None

    def average_from(self, peer: "DccbUser") -> tuple:
        """Means of buffers and current copies; apply with :meth:`set_shared`."""
        return (self.queue.averaged_with(peer.queue), 0.5 * (self.mw + peer.mw), 0.5 * (self.bw + peer.bw))

    def set_shared(self, shared) -> None:
        slots, self.mw, self.bw = shared
        self.queue.assign(slots)
        self._w = self._minv = None


def dccb_interaction(state: DccbUser, itx, env, alpha: float):
    w, minv = state.current()
    choice = ucb_select(w, state.occ, itx.ctx, minv, alpha)
    out = serve(env, itx, choice)
    state.absorb(itx.ctx[choice], out[1])
    return out


def dccb_phase_trigger(counts, length: int) -> bool:
    """True once any user saw ``length`` interactions since the last phase."""
    return bool(np.any(np.asarray(counts) >= length))


def dccb_peer_exchange(states: list[DccbUser], graph: UserGraph, gamma: float, rng,
                       symmetric: bool = False) -> dict:
    """One exchange round in a shuffled user order; returns event counts."""
    stats = {"pairs": 0, "removed": 0, "averaged": 0}
    local = [s.local_vector() for s in states]
    for i in rng.permutation(len(states)).tolist():
        nbrs = graph.neighbors(i)
        if len(nbrs) == 0:
            continue
        p = int(nbrs[rng.integers(len(nbrs))])
        stats["pairs"] += 1
        if should_disconnect(local[i], local[p], states[i].occ, states[p].occ, gamma):
            graph.remove_edge(i, p)
            states[i].reset()
            states[p].reset()
            stats["removed"] += 1
        elif graph.same_neighborhood(i, p):
            shared = states[i].average_from(states[p])
            if symmetric:
                states[p].set_shared(states[p].average_from(states[i]))
            states[i].set_shared(shared)
            stats["averaged"] += 1
    return stats


def pair_value_count(length: int, d: int) -> int:
    """Values shipped per exchanging pair: the buffer plus the active copies."""
    return (length + 1) * (d * d + d)


class DccbRunner(Runner):
    name = "dccb"

    def __init__(self, env, config, runtime=None):
        super().__init__(env, config, runtime)
        self.length = config.buffer_size
        self.states = [DccbUser(self.d, self.length) for _ in range(self.n)]
        self.graph = UserGraph(self.n)
        self.clustering = Clustering.single(self.n)
        self.since_phase = np.zeros(self.n, dtype=np.int64)
        self.counters = {"phases": 0, "exchanges": 0, "edges_removed": 0, "averages": 0}

    def n_clusters(self) -> int:
        return self.clustering.n_clusters

    def labels(self):
        return self.clustering.assignment.tolist()

    def _step(self, itx):
        return dccb_interaction(self.states[itx.user_id], itx, self.env, self.config.alpha)

    def next_window(self):
        if self.config.dccb_trigger == "global":
            window = self.stream.take(self.length)
            return window, len(window) == self.length
        return self.stream.take_until_count(self.since_phase, self.length, self.length * self.n)

    def exchange_phase(self) -> None:
        phase = self.counters["phases"]
        rng = substream(self.config.seed, TAG_EXCHANGE, phase)
        stats = dccb_peer_exchange(self.states, self.graph, self.config.gamma, rng,
                                   self.config.symmetric_averaging)
        per_pair = pair_value_count(self.length, self.d)
        for _ in range(stats["pairs"]):
            self.ledger.record(phase, "dccb_pair", per_pair)
        self.since_phase[:] = 0
        self.clustering = connected_components(self.graph)
        self.counters["phases"] += 1
        self.counters["exchanges"] += stats["pairs"]
        self.counters["edges_removed"] += stats["removed"]
        self.counters["averages"] += stats["averaged"]

    def loop(self) -> None:
        while not self.stream.exhausted:
            window, triggered = self.next_window()
            if self.config.dccb_trigger == "global":
                np.add.at(self.since_phase, [itx.user_id for itx in window], 1)
            self.observe(self.map_items(window, lambda itx: itx.user_id, self._step))
            self.fire("interactions")
            if triggered:
                self.exchange_phase()
                self.sync_state()
                self.fire("phase")


def run_dccb(env, config, runtime=None) -> MetricsLog:
    return DccbRunner(env, config, runtime).run()
