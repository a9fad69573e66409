"""DistCLUB: alternating user-based and cluster-based stages with lazy reclustering."""
from __future__ import annotations

import math

import numpy as np

from ..bandit import UserModel, linear_update, ucb_select, user_vector
from ..environment import TAG_NETWORK, substream
from ..graph import Clustering, UserGraph, connected_components, update_network_vectors
from ..linalg import spd_solve
from ..metrics import MetricsLog
from .common import Runner, aggregate_arrays, build_aggregate, serve


def personalized_gate(occ: int, cluster_seen: int, size: int, beta: float) -> bool:
    """True when the user has seen at least ``beta`` times its cluster's mean share."""
    return occ >= beta * (cluster_seen / size)


def rebalance(occ, clusters, cluster_seen, u_rounds, c_rounds, beta: float, sigma: int) -> None:
    """Shift round budget toward users who interact more than their cluster mean.

    Per member, ``(occ - mean) / beta`` is truncated toward zero and clamped so
    that ``u_rounds`` stays within ``[0, 2 sigma]``; ``c_rounds`` absorbs the
    opposite change, so ``u_rounds + c_rounds`` is preserved. Arrays are
    updated in place.
    """
    cap = 2 * sigma
    for cid, members in enumerate(clusters):
        mean = cluster_seen[cid] / len(members)
        for u in members:
            delta = math.trunc((occ[u] - mean) / beta)
            new_u = min(max(int(u_rounds[u]) + delta, 0), cap)
            applied = new_u - int(u_rounds[u])
            u_rounds[u] = new_u
            c_rounds[u] -= applied


class DistClubRunner(Runner):
    name = "distclub"

    def __init__(self, env, config, runtime=None):
        super().__init__(env, config, runtime)
        n, d = self.n, self.d
        self.models = [UserModel.fresh(d) for _ in range(n)]
        self.graph = UserGraph(n)
        self.clustering = Clustering.single(n)
        self.aggs = [build_aggregate(self.models, m, config.cluster_agg_mode) for m in self.clustering.clusters]
        self.cluster_seen = np.zeros(self.clustering.n_clusters, dtype=np.int64)
        self.sigma = config.sigma
        self.u_rounds = np.full(n, config.sigma, dtype=np.int64)
        self.c_rounds = np.full(n, config.sigma, dtype=np.int64)
        self.counters = {"cycles": 0, "stage2_runs": 0, "stage1_interactions": 0,
                         "stage3_interactions": 0, "personalized": 0}

    def n_clusters(self) -> int:
        return self.clustering.n_clusters

    def labels(self):
        return self.clustering.assignment.tolist()

    # -- windows -----------------------------------------------------------

    def _window(self, limits):
        if self.config.window_mode == "global":
            return self.stream.take(int(limits.sum()) // self.n)
        return self.stream.take_while_under(limits, 4 * self.sigma * self.n)

    # -- stage 1 -----------------------------------------------------------

    def _user_step(self, itx):
        model = self.models[itx.user_id]
        choice = ucb_select(user_vector(model), model.occ, itx.ctx, model.minv, self.config.alpha)
        out = serve(self.env, itx, choice)
        linear_update(model, itx.ctx[choice], out[1])
        return out

    def stage1(self, window) -> list:
        out = self.map_items(window, lambda itx: itx.user_id, self._user_step)
        self.counters["stage1_interactions"] += len(window)
        return out

    # -- stage 2 -----------------------------------------------------------

    def stage2(self) -> None:
        runs = self.counters["stage2_runs"]
        vectors = np.stack(self.runtime.map_keys(range(self.n), lambda u: user_vector(self.models[u])))
        occ = np.array([m.occ for m in self.models], dtype=np.int64)
        rng = substream(self.config.seed, TAG_NETWORK, runs)
        update_network_vectors(self.graph, vectors, occ, self.config.gamma,
                               self.config.max_pairs_per_update, rng)
        self.clustering = connected_components(self.graph)
        mode = self.config.cluster_agg_mode
        self.aggs = self.runtime.map_keys(
            range(self.clustering.n_clusters),
            lambda c: build_aggregate(self.models, self.clustering.members(c), mode))
        self.cluster_seen = np.zeros(self.clustering.n_clusters, dtype=np.int64)
        self.ledger.record(runs, "distclub_stage2", self.n * (self.d * self.d + self.d))
        self.counters["stage2_runs"] += 1

    def aggregate_from_scratch(self, cid: int):
        return aggregate_arrays(self.models, self.clustering.members(cid), self.config.cluster_agg_mode)

    # -- stage 3 -----------------------------------------------------------

    def _cluster_step(self, itx):
        u = itx.user_id
        cid = int(self.clustering.assignment[u])
        model, agg = self.models[u], self.aggs[cid]
        size = len(self.clustering.members(cid))
        personal = personalized_gate(model.occ, int(self.cluster_seen[cid]), size, self.config.beta)
        if personal:
            theta = user_vector(model)
        else:
            theta = spd_solve(agg.m, agg.b)
        bonus = model.minv if (personal and self.config.personal_bonus_matrix) else agg.minv
        choice = ucb_select(theta, model.occ, itx.ctx, bonus, self.config.alpha)
        out = serve(self.env, itx, choice)
        x = itx.ctx[choice]
        linear_update(model, x, out[1])
        agg.absorb(x, out[1])
        self.cluster_seen[cid] += 1
        return out + (personal,)

    def stage3(self, window) -> list:
        assign = self.clustering.assignment
        out = self.map_items(window, lambda itx: int(assign[itx.user_id]), self._cluster_step)
        self.counters["stage3_interactions"] += len(window)
        self.counters["personalized"] += sum(o[3] for o in out)
        return out

    # -- stage 4 -----------------------------------------------------------

    def stage4(self) -> None:
        occ = [m.occ for m in self.models]
        rebalance(occ, self.clustering.clusters, self.cluster_seen, self.u_rounds, self.c_rounds,
                  self.config.beta, self.sigma)

    def rounds_conserved(self) -> bool:
        return bool(np.all(self.u_rounds + self.c_rounds == 2 * self.sigma))

    def loop(self) -> None:
        while not self.stream.exhausted:
            start = self.stream.pos
            self.observe(self.stage1(self._window(self.u_rounds)))
            self.fire("stage1")
            self.stage2()
            self.sync_state()
            self.fire("stage2")
            self.observe(self.stage3(self._window(self.c_rounds)))
            self.fire("stage3")
            self.stage4()
            self.counters["cycles"] += 1
            self.sync_state()
            self.fire("stage4")
            if self.stream.pos == start:
                raise RuntimeError("DistCLUB cycle consumed no interactions")


def run_distclub(env, config, runtime=None) -> MetricsLog:
    return DistClubRunner(env, config, runtime).run()
