import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clubbench.environment import (
    ReplayEnvironment,
    SyntheticConfig,
    dump_replay,
    gen_synthetic,
    load_replay,
    parse_replay,
    random_policy,
    substream,
    write_replay,
)
from clubbench.errors import InputError, ReplayParseError, SchemaError

FIXTURE = (
    "3,2,2\n"
    "0,0,1,0.5,0.25,-1.0,0.125\n"
    "1,2,0,1.0,0.0,0.0,1.0\n"
    "2,1,1,0.1,0.2,0.3,0.4\n"
)


@pytest.fixture
def small_env():
    return gen_synthetic(SyntheticConfig(n_users=30, n_interactions=500, d=6, K=5, c_true=3, seed=9))


class TestSyntheticConfig:
    @pytest.mark.parametrize("kwargs", [
        dict(n_users=0, n_interactions=1),
        dict(n_users=5, n_interactions=1, c_true=6),
        dict(n_users=5, n_interactions=1, c_true=1, d=0),
        dict(n_users=5, n_interactions=1, c_true=1, K=1),
        dict(n_users=5, n_interactions=1, c_true=1, noise=1.5),
        dict(n_users=5, n_interactions=-1, c_true=1),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(InputError):
            gen_synthetic(SyntheticConfig(**kwargs))


class TestSynthetic:
    def test_single_cluster(self):
        env = gen_synthetic(SyntheticConfig(n_users=10, n_interactions=5, c_true=1))
        assert set(env.true_labels().tolist()) == {0}

    def test_round_robin_assignment(self):
        env = gen_synthetic(SyntheticConfig(n_users=200, n_interactions=1, c_true=20, seed=11))
        assert env.true_labels().tolist() == [u % 20 for u in range(200)]

    def test_theta_unit_norm(self, small_env):
        np.testing.assert_allclose(np.linalg.norm(small_env.theta, axis=1), 1.0, rtol=1e-12)

    def test_deterministic(self):
        cfg = SyntheticConfig(n_users=20, n_interactions=50, seed=3)
        a, b = gen_synthetic(cfg), gen_synthetic(cfg)
        for x, y in zip(a, b):
            assert (x.t, x.user_id, x.positive_index, x.draw) == (y.t, y.user_id, y.positive_index, y.draw)
            np.testing.assert_array_equal(x.ctx, y.ctx)

    def test_random_access_matches_iteration(self, small_env):
        seq = small_env.interactions(100, 110)
        for itx in seq:
            np.testing.assert_array_equal(itx.ctx, small_env.interaction(itx.t).ctx)

    def test_seed_changes_stream(self):
        a = gen_synthetic(SyntheticConfig(n_users=20, n_interactions=5, seed=1)).interaction(0)
        b = gen_synthetic(SyntheticConfig(n_users=20, n_interactions=5, seed=2)).interaction(0)
        assert not np.array_equal(a.ctx, b.ctx)

    def test_items_quantized_and_bounded(self, small_env):
        for itx in small_env.interactions(0, 50):
            scaled = itx.ctx * 4096
            np.testing.assert_array_equal(scaled, np.round(scaled))
            assert np.all(np.linalg.norm(itx.ctx, axis=1) <= 1.0)

    def test_payoff_formula(self):
        env = gen_synthetic(SyntheticConfig(n_users=8, n_interactions=40, d=4, K=6, c_true=2, noise=0.3, seed=5))
        for itx in env:
            theta = env.theta[itx.user_id % 2]
            for k, x in enumerate(itx.ctx):
                p = min(max(float(x @ theta), 0.0), 1.0) * 0.7 + 0.15
                assert env.expected_reward(itx, k) == pytest.approx(p, abs=1e-15)
            assert env.best_reward(itx) == max(env.expected_reward(itx, k) for k in range(itx.K))
            assert env.reward(itx, 0) == int(itx.draw < itx.payoffs[0])

    def test_orthogonal_item_never_rewarded(self):
        env = gen_synthetic(SyntheticConfig(n_users=2, n_interactions=1, d=3, c_true=1, noise=0.0))
        theta = env.theta[0]
        ortho = np.cross(theta, np.array([1.0, 0.0, 0.0]))
        assert env.payoffs(0, ortho[None, :])[0] == pytest.approx(0.0, abs=1e-15)
        assert env.payoffs(0, theta[None, :])[0] == pytest.approx(1.0)

    def test_out_of_range_choice(self, small_env):
        itx = small_env.interaction(0)
        with pytest.raises(InputError):
            small_env.reward(itx, itx.K)
        with pytest.raises(InputError):
            small_env.expected_reward(itx, -1)

    def test_planted_signal_beats_random(self, small_env):
        best = np.mean([small_env.best_reward(i) for i in small_env])
        rand = np.mean([np.mean(i.payoffs) for i in small_env])
        assert best > rand

    def test_users_roughly_uniform(self):
        env = gen_synthetic(SyntheticConfig(n_users=4, n_interactions=4000, d=2, K=2, c_true=1))
        counts = np.bincount([i.user_id for i in env], minlength=4)
        assert np.all(np.abs(counts - 1000) < 4 * math.sqrt(4000 * 0.25 * 0.75))


class TestRandomPolicy:
    def test_single_item(self):
        assert random_policy(np.zeros((1, 3)), substream(0, 1)) == 0

    def test_same_seed_same_sequence(self):
        ctx = np.zeros((20, 2))
        r1, r2 = substream(5, 3), substream(5, 3)
        assert [random_policy(ctx, r1) for _ in range(50)] == [random_policy(ctx, r2) for _ in range(50)]

    def test_uniform_frequencies(self):
        # the policy is rng.integers(K); draw 10^6 of them in one call
        rng = substream(123, 3)
        draws = rng.integers(20, size=1_000_000)
        assert random_policy(np.zeros((20, 1)), substream(123, 3)) == draws[0]
        counts = np.bincount(draws, minlength=20)
        p = 1 / 20
        sd = math.sqrt(1_000_000 * p * (1 - p))
        assert np.all(np.abs(counts - 1_000_000 * p) <= 3 * sd)


class TestReplay:
    def test_fixture_in_order(self):
        env = parse_replay(FIXTURE)
        assert len(env) == 3
        assert [i.user_id for i in env] == [0, 2, 1]
        np.testing.assert_array_equal(env.interaction(0).ctx, [[0.5, 0.25], [-1.0, 0.125]])

    def test_reward_and_best(self):
        env = parse_replay(FIXTURE)
        itx = env.interaction(0)
        assert env.reward(itx, 1) == 1
        assert env.reward(itx, 0) == 0
        assert all(env.best_reward(i) == 1.0 for i in env)
        assert env.expected_reward(itx, 0) == 0.0

    def test_round_trip(self, tmp_path):
        path = tmp_path / "fixture.csv"
        path.write_bytes(FIXTURE.encode())
        out = tmp_path / "copy.csv"
        write_replay(load_replay(path), out)
        assert out.read_bytes() == path.read_bytes()

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 6), st.integers(0, 2**32 - 1))
    def test_round_trip_random(self, d, K, T, seed):
        rng = np.random.default_rng(seed)
        env = ReplayEnvironment.from_arrays(
            3, rng.integers(3, size=T), rng.normal(size=(T, K, d)), rng.integers(K, size=T))
        text = dump_replay(env)
        assert dump_replay(parse_replay(text)) == text
        assert parse_replay(text).fingerprint() == parse_replay(text).fingerprint()

    @pytest.mark.parametrize("text, line, exc", [
        ("", 1, ReplayParseError),
        ("3,2\n", 1, ReplayParseError),
        ("3,x,2\n", 1, ReplayParseError),
        ("3,2,2\n0,0,1,0.5,0.25,-1.0\n", 2, SchemaError),
        ("3,2,2\n0,0,1,0.5,0.25,-1.0,0.1\n1,5,0,1,1,1,1\n", 3, SchemaError),
        ("3,2,2\n0,0,2,0.5,0.25,-1.0,0.1\n", 2, SchemaError),
        ("3,2,2\n0,0,1,0.5,abc,-1.0,0.1\n", 2, ReplayParseError),
        ("3,2,2\n0,0,1,0.5,nan,-1.0,0.1\n", 2, ReplayParseError),
        ("3,2,2\nz,0,1,0.5,0.1,-1.0,0.1\n", 2, ReplayParseError),
    ])
    def test_errors_carry_line_numbers(self, text, line, exc):
        with pytest.raises(exc) as info:
            parse_replay(text)
        assert info.value.line == line
        assert str(info.value).startswith(f"line {line}:")

    def test_fingerprint_tracks_content(self):
        a = parse_replay(FIXTURE)
        b = parse_replay(FIXTURE.replace("0.4", "0.5"))
        assert a.fingerprint() != b.fingerprint()
