"""Uniform random policy and independent per-user LinUCB."""
from __future__ import annotations

from ..bandit import UserModel, linear_update, ucb_select, user_vector
from ..environment import TAG_RANDOM_POLICY, random_policy, substream
from ..metrics import MetricsLog
from .common import Runner, serve

# interactions handed to the runtime per batch; no barrier semantics
_BATCH = 5_000


class RandomRunner(Runner):
    name = "random"

    def _step(self, itx):
        rng = substream(self.config.seed, TAG_RANDOM_POLICY, itx.t)
        return serve(self.env, itx, random_policy(itx.ctx, rng))

    def loop(self) -> None:
        while not self.stream.exhausted:
            window = self.stream.take(_BATCH)
            self.observe(self.map_items(window, lambda itx: itx.user_id, self._step))


class LinUCBRunner(Runner):
    """One ridge model per user, no information sharing."""

    name = "linucb"

    def __init__(self, env, config, runtime=None):
        super().__init__(env, config, runtime)
        self.models = [UserModel.fresh(self.d) for _ in range(self.n)]

    def n_clusters(self) -> int:
        return self.n

    def labels(self):
        return list(range(self.n))

    def _step(self, itx):
        model = self.models[itx.user_id]
        choice = ucb_select(user_vector(model), model.occ, itx.ctx, model.minv, self.config.alpha)
        out = serve(self.env, itx, choice)
        linear_update(model, itx.ctx[choice], out[1])
        return out

    def loop(self) -> None:
        while not self.stream.exhausted:
            window = self.stream.take(_BATCH)
            self.observe(self.map_items(window, lambda itx: itx.user_id, self._step))


def run_random(env, config, runtime=None) -> MetricsLog:
    return RandomRunner(env, config, runtime).run()


def run_linucb(env, config, runtime=None) -> MetricsLog:
    return LinUCBRunner(env, config, runtime).run()
