"""User similarity graph with monotone edge deletion and component clustering.

The graph starts complete and only ever loses edges, so it is stored as the
complement: one set of cut neighbours per user. Memory is proportional to the
number of deleted edges, not to ``n^2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bandit import UserModel, confidence_bound, user_vector
from .errors import InputError

#: Above this many users, update_network samples pairs instead of testing all.
ALL_PAIRS_LIMIT = 2_000
DEFAULT_SAMPLED_PAIRS = 2_000_000
_CHUNK = 250_000


class UserGraph:
    def __init__(self, n: int):
        if n < 0:
            raise InputError("user count must be non-negative")
        self.n = n
        self._cut: list[set[int]] = [set() for _ in range(n)]
        self._n_cut = 0

    def has_edge(self, u: int, v: int) -> bool:
        return u != v and v not in self._cut[u]

    def remove_edge(self, u: int, v: int) -> bool:
        """Delete ``{u, v}``; returns False if it was already gone."""
        if u == v or v in self._cut[u]:
            return False
        self._cut[u].add(v)
        self._cut[v].add(u)
        self._n_cut += 1
        return True

    @property
    def n_edges(self) -> int:
        return self.n * (self.n - 1) // 2 - self._n_cut

    def degree(self, u: int) -> int:
        return self.n - 1 - len(self._cut[u])

    def neighbors(self, u: int) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[u] = False
        if self._cut[u]:
            mask[list(self._cut[u])] = False
        return np.flatnonzero(mask)

    def same_neighborhood(self, u: int, v: int) -> bool:
        """True when the closed neighbourhoods of ``u`` and ``v`` coincide."""
        return self._cut[u] == self._cut[v]

    def cut_set(self, u: int) -> frozenset[int]:
        return frozenset(self._cut[u])

    def edge_mask(self) -> np.ndarray:
        """Dense upper-triangular boolean mask of surviving edges."""
        mask = np.triu(np.ones((self.n, self.n), dtype=bool), 1)
        for u, cut in enumerate(self._cut):
            if cut:
                mask[u, list(cut)] = False
        return np.triu(mask, 1)

    def edges(self):
        for u in range(self.n):
            cut = self._cut[u]
            for v in range(u + 1, self.n):
                if v not in cut:
                    yield u, v

    def copy(self) -> "UserGraph":
        g = UserGraph(self.n)
        g._cut = [set(c) for c in self._cut]
        g._n_cut = self._n_cut
        return g


@dataclass(frozen=True)
class Clustering:
    assignment: np.ndarray
    clusters: tuple[tuple[int, ...], ...]

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    def members(self, cid: int) -> tuple[int, ...]:
        return self.clusters[cid]

    def as_partition(self) -> frozenset[frozenset[int]]:
        return frozenset(frozenset(c) for c in self.clusters)

    @classmethod
    def from_labels(cls, labels) -> "Clustering":
        """Relabel an arbitrary label vector with ids ordered by smallest member."""
        labels = np.asarray(labels)
        remap: dict = {}
        groups: list[list[int]] = []
        assignment = np.empty(len(labels), dtype=np.int64)
        for u, lab in enumerate(labels.tolist()):
            cid = remap.get(lab)
            if cid is None:
                cid = remap[lab] = len(groups)
                groups.append([])
            groups[cid].append(u)
            assignment[u] = cid
        return cls(assignment, tuple(tuple(g) for g in groups))

    @classmethod
    def single(cls, n: int) -> "Clustering":
        return cls(np.zeros(n, dtype=np.int64), (tuple(range(n)),) if n else ())


def same_partition(a, b) -> bool:
    """Compare two label vectors (or Clusterings) as partitions."""
    a = a if isinstance(a, Clustering) else Clustering.from_labels(a)
    b = b if isinstance(b, Clustering) else Clustering.from_labels(b)
    return a.as_partition() == b.as_partition()


def pair_distances(wa: np.ndarray, wb: np.ndarray) -> np.ndarray:
    diff = wa - wb
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def should_disconnect(wu, wv, occ_u: int, occ_v: int, gamma: float) -> bool:
    wu = np.asarray(wu, dtype=np.float64)
    wv = np.asarray(wv, dtype=np.float64)
    if wu.shape != wv.shape:
        raise InputError(f"dimension mismatch: {wu.shape} vs {wv.shape}")
    if not gamma > 0:
        raise InputError("gamma must be positive")
    dist = pair_distances(wu[None, :], wv[None, :])[0]
    return bool(dist >= gamma * (confidence_bound(occ_u) + confidence_bound(occ_v)))


def candidate_pairs(g: UserGraph, max_pairs: int | None = None, rng=None):
    """Surviving edges to test, as two index arrays with ``i < j``.

    With ``max_pairs`` set and fewer than ``n(n-1)/2`` allowed, a uniform
    sample of pairs is drawn from ``rng`` and deleted ones are dropped.
    """
    n = g.n
    total = n * (n - 1) // 2
    if max_pairs is None:
        max_pairs = total if n <= ALL_PAIRS_LIMIT else DEFAULT_SAMPLED_PAIRS
    if max_pairs >= total:
        i, j = np.nonzero(g.edge_mask())
        return i, j
    if rng is None:
        raise InputError("pair sampling needs a random generator")
    a = rng.integers(0, n, size=max_pairs)
    b = rng.integers(0, n - 1, size=max_pairs)
    b = b + (b >= a)
    i, j = np.minimum(a, b), np.maximum(a, b)
    keys = np.unique(i * n + j)
    i, j = keys // n, keys % n
    keep = np.fromiter((g.has_edge(int(u), int(v)) for u, v in zip(i, j)), dtype=bool, count=len(i))
    return i[keep], j[keep]


def update_network_vectors(g: UserGraph, vectors: np.ndarray, occ, gamma: float,
                           max_pairs: int | None = None, rng=None) -> int:
    """Test candidate edges against precomputed user vectors; returns edges removed."""
    if not gamma > 0:
        raise InputError("gamma must be positive")
    occ = np.asarray(occ)
    cb = confidence_bound(occ)
    i, j = candidate_pairs(g, max_pairs, rng)
    removed = 0
    for start in range(0, len(i), _CHUNK):
        ci, cj = i[start:start + _CHUNK], j[start:start + _CHUNK]
        dist = pair_distances(vectors[ci], vectors[cj])
        cut = dist >= gamma * (cb[ci] + cb[cj])
        for u, v in zip(ci[cut].tolist(), cj[cut].tolist()):
            removed += g.remove_edge(u, v)
    return removed


def update_network(models: list[UserModel], g: UserGraph, gamma: float,
                   max_pairs: int | None = None, rng=None) -> UserGraph:
    vectors = np.stack([user_vector(m) for m in models]) if models else np.zeros((0, 0))
    occ = np.array([m.occ for m in models], dtype=np.int64)
    update_network_vectors(g, vectors, occ, gamma, max_pairs, rng)
    return g


def connected_components(g: UserGraph) -> Clustering:
    """Components of the surviving graph; ids ordered by smallest member.

    BFS over the complement representation: each visited vertex scans the
    still-unvisited set, and every scanned vertex is either absorbed or sits
    in that vertex's cut set, so the cost is O(n + deleted edges).
    """
    n = g.n
    assignment = np.empty(n, dtype=np.int64)
    unvisited = set(range(n))
    clusters = []
    for s in range(n):
        if s not in unvisited:
            continue
        unvisited.discard(s)
        comp = [s]
        frontier = [s]
        while frontier:
            u = frontier.pop()
            reach = unvisited - g._cut[u]
            if reach:
                unvisited -= reach
                comp.extend(reach)
                frontier.extend(reach)
        comp.sort()
        cid = len(clusters)
        assignment[comp] = cid
        clusters.append(tuple(comp))
    return Clustering(assignment, tuple(clusters))
