"""Sequential CLUB: cluster-pooled UCB over a graph that loses edges every δ steps."""
from __future__ import annotations

import numpy as np

from ..bandit import UserModel, linear_update, ucb_select
from ..environment import TAG_NETWORK, substream
from ..graph import Clustering, UserGraph, connected_components, update_network
from ..linalg import spd_solve
from ..metrics import MetricsLog
from .common import Runner, aggregate_arrays, build_aggregate, serve


class ClubRunner(Runner):
    name = "club"

    def __init__(self, env, config, runtime=None):
        super().__init__(env, config, runtime)
        self.models = [UserModel.fresh(self.d) for _ in range(self.n)]
        self.graph = UserGraph(self.n)
        self.clustering = Clustering.single(self.n)
        self.network_delay = config.network_delay
        self.t = 0
        self.counters = {"network_updates": 0, "edges_removed": 0}
        self._rebuild()

    def n_clusters(self) -> int:
        return self.clustering.n_clusters

    def labels(self):
        return self.clustering.assignment.tolist()

    def _rebuild(self) -> None:
        mode = self.config.cluster_agg_mode
        self.aggs = [build_aggregate(self.models, members, mode) for members in self.clustering.clusters]

    def aggregate_from_scratch(self, cid: int) -> tuple[np.ndarray, np.ndarray]:
        return aggregate_arrays(self.models, self.clustering.members(cid), self.config.cluster_agg_mode)

    def aggregates_consistent(self) -> bool:
        """Incremental aggregates equal a from-scratch recomputation (exactly)."""
        for cid, agg in enumerate(self.aggs):
            m, b = self.aggregate_from_scratch(cid)
            if not (np.array_equal(m, agg.m) and np.array_equal(b, agg.b)):
                return False
        return True

    def step(self, itx):
        user = itx.user_id
        agg = self.aggs[self.clustering.assignment[user]]
        w = spd_solve(agg.m, agg.b)
        choice = ucb_select(w, self.models[user].occ, itx.ctx, agg.minv, self.config.alpha)
        out = serve(self.env, itx, choice)
        x = itx.ctx[choice]
        linear_update(self.models[user], x, out[1])
        agg.absorb(x, out[1])
        self.t += 1
        if self.t % self.network_delay == 0:
            self.network_update()
        return out

    def network_update(self) -> None:
        before = self.graph.n_edges
        rng = substream(self.config.seed, TAG_NETWORK, self.t // self.network_delay)
        update_network(self.models, self.graph, self.config.gamma, self.config.max_pairs_per_update, rng)
        self.clustering = connected_components(self.graph)
        self._rebuild()
        self.counters["network_updates"] += 1
        self.counters["edges_removed"] += before - self.graph.n_edges
        self.fire("network_update")

    def loop(self) -> None:
        hooked = bool(self.hooks)
        for itx in self.stream.env:
            out = self.step(itx)
            self.stream.pos += 1
            self.recorder.observe((out[1],), (out[2],))
            if self.t % self.network_delay == 0:
                self.sync_state()
            if hooked:
                self.fire("step")


def run_club(env, config, runtime=None) -> MetricsLog:
    return ClubRunner(env, config, runtime).run()
