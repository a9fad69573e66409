import dataclasses

import numpy as np
import pytest

from clubbench.algorithms import run_club, run_dccb, run_distclub, run_linucb, run_random
from clubbench.config import (
    RunConfig,
    apply_overrides,
    format_config,
    parse_synthetic,
    read_config_file,
    synthetic_spec,
)
from clubbench.environment import ReplayEnvironment, SyntheticConfig, gen_synthetic
from clubbench.errors import DatasetError, InputError
from clubbench.harness import build_environment, compare_runs, run_experiment, run_repeated
from clubbench.metrics import CSV_HEADER, MetricsLog, MetricsRecorder, emit_metrics, read_metrics

RUNNERS = [run_random, run_linucb, run_club, run_dccb, run_distclub]


def small(T=3000, **kw):
    syn = SyntheticConfig(n_users=15, n_interactions=T, d=4, K=5, c_true=3, seed=2)
    return gen_synthetic(syn), RunConfig(seed=2, synthetic=syn, sigma=40, buffer_size=200,
                                         network_delay=300, **kw).validate()


class TestRecorder:
    def test_rows_every_checkpoint(self):
        rec = MetricsRecorder(1000, 10_000)
        rec.observe([1] * 10_000, [0.5] * 10_000)
        rows = rec.finish()
        assert [r.t for r in rows] == list(range(1000, 10_001, 1000))
        assert rows[-1].cum_reward == 10_000 and rows[-1].cum_regret == 5000.0

    def test_final_partial_row(self):
        rec = MetricsRecorder(1000, 2500)
        rec.observe([0] * 2500, [1.0] * 2500)
        assert [r.t for r in rec.finish()] == [1000, 2000, 2500]

    def test_barrier_state_applies_to_checkpoint_at_barrier(self):
        rec = MetricsRecorder(10, 30)
        rec.observe([1] * 10, [0] * 10)
        rec.set_state(4, 100)
        rec.observe([1] * 20, [0] * 20)
        rec.set_state(9, 500)
        rows = rec.finish()
        assert [(r.clusters, r.comm_bytes) for r in rows] == [(4, 100), (4, 100), (9, 500)]

    def test_invalid_every(self):
        with pytest.raises(InputError):
            MetricsRecorder(0, 10)


class TestMetricsFiles:
    def test_empty_log_header_only(self, tmp_path):
        path = emit_metrics(MetricsLog("random"), tmp_path / "m.csv")
        assert path.read_text() == ",".join(CSV_HEADER) + "\n"
        assert (tmp_path / "m.json").exists()

    def test_round_trip(self, tmp_path):
        env, cfg = small()
        log = run_distclub(env, cfg)
        path = emit_metrics(log, tmp_path / "d.csv")
        back = read_metrics(path)
        assert back.rows == log.rows
        assert back.summary == log.summary
        assert back.environment == log.environment
        assert back.config["sigma"] == 40

    def test_ten_rows(self, tmp_path):
        syn = SyntheticConfig(n_users=5, n_interactions=10_000, d=2, K=3, c_true=1)
        log = run_random(gen_synthetic(syn), RunConfig(checkpoint_every=1000))
        emit_metrics(log, tmp_path / "r.csv")
        assert len((tmp_path / "r.csv").read_text().splitlines()) == 11

    def test_bad_header(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("a,b\n")
        with pytest.raises(InputError):
            read_metrics(p)


class TestSeriesInvariants:
    @pytest.mark.parametrize("runner", RUNNERS, ids=lambda f: f.__name__)
    def test_monotone_series(self, runner):
        env, cfg = small(checkpoint_every=100)
        log = runner(env, cfg)
        t = log.series("t")
        assert np.all(np.diff(t) > 0) and t[-1] == 3000
        for name in ("cum_reward", "cum_regret", "comm_bytes"):
            assert np.all(np.diff(log.series(name)) >= 0), name
        assert log.summary["comm_bytes"] == log.rows[-1].comm_bytes

    @pytest.mark.parametrize("runner", RUNNERS, ids=lambda f: f.__name__)
    def test_replay_regret_identity(self, runner):
        rng = np.random.default_rng(0)
        T = 1200
        env = ReplayEnvironment.from_arrays(6, rng.integers(6, size=T), rng.normal(size=(T, 5, 3)) * 0.4,
                                            rng.integers(5, size=T))
        log = runner(env, RunConfig(sigma=20, buffer_size=100, network_delay=200, checkpoint_every=100))
        for row in log.rows:
            assert row.cum_regret == row.t - row.cum_reward

    @pytest.mark.parametrize("runner", RUNNERS, ids=lambda f: f.__name__)
    def test_comm_bytes_match_ledger_at_checkpoints(self, runner):
        env, cfg = small(checkpoint_every=50)
        log = runner(env, cfg)
        algo = log.algorithm
        per_event = {"dccb": (200 + 1) * 20 * 8, "distclub": 15 * 20 * 8}.get(algo)
        if per_event is None:
            assert all(r.comm_bytes == 0 for r in log.rows)
        else:
            assert all(r.comm_bytes % per_event == 0 for r in log.rows)
            key = "exchanges" if algo == "dccb" else "stage2_runs"
            assert all(r.comm_bytes == r.counters[key] * per_event for r in log.rows)


class TestConfig:
    def test_defaults(self):
        cfg = RunConfig()
        assert (cfg.alpha, cfg.beta, cfg.gamma, cfg.network_delay, cfg.buffer_size, cfg.sigma) == (
            0.03, 2.0, 0.7, 2000, 5000, 2500)

    @pytest.mark.parametrize("field, value", [
        ("algorithm", "foo"), ("alpha", -1.0), ("beta", 0.0), ("gamma", 0.0), ("sigma", 0),
        ("buffer_size", 0), ("network_delay", 0), ("n_workers", 0), ("checkpoint_every", 0),
        ("cluster_agg_mode", "x"), ("window_mode", "x"), ("dccb_trigger", "x"), ("max_pairs_per_update", 0),
    ])
    def test_invalid(self, field, value):
        with pytest.raises(InputError):
            dataclasses.replace(RunConfig(), **{field: value}).validate()

    def test_parse_synthetic(self):
        cfg = parse_synthetic("n=100,c=5,T=1000,seed=1")
        assert (cfg.n_users, cfg.c_true, cfg.n_interactions, cfg.seed, cfg.d, cfg.K) == (100, 5, 1000, 1, 25, 20)
        assert parse_synthetic("n=3,T=1,c=1", default_seed=9).seed == 9
        assert parse_synthetic(synthetic_spec(cfg)) == cfg

    @pytest.mark.parametrize("spec", ["n=3", "n=3,T=2,zz=1", "n=3,T=x", "n=3,T=2,c", "n=3,T=2,c=4"])
    def test_bad_synthetic(self, spec):
        with pytest.raises(InputError):
            parse_synthetic(spec)

    def test_file_round_trip(self, tmp_path):
        cfg = RunConfig(algorithm="dccb", seed=5, synthetic=parse_synthetic("n=10,T=50,c=2", 5),
                        symmetric_averaging=True, max_pairs_per_update=1000)
        path = tmp_path / "run.conf"
        path.write_text("# comment\n" + format_config(cfg) + "\n")
        assert apply_overrides(RunConfig(), read_config_file(path)) == cfg

    def test_unknown_key(self):
        with pytest.raises(InputError):
            apply_overrides(RunConfig(), {"nope": "1"})

    def test_with_seed_moves_synthetic_seed(self):
        cfg = RunConfig(seed=3, synthetic=parse_synthetic("n=4,T=5,c=1", 3))
        assert cfg.with_seed(4).synthetic.seed == 4
        pinned = RunConfig(seed=3, synthetic=parse_synthetic("n=4,T=5,c=1,seed=11"))
        assert pinned.with_seed(4).synthetic.seed == 11


class TestExperiment:
    def test_random_vs_itself(self):
        log = run_experiment(RunConfig(algorithm="random", seed=1, synthetic=parse_synthetic("n=100,c=5,T=1000,seed=1")))
        report = compare_runs([log])
        assert report["runs"]["random"]["reward_ratio"] == 1.0

    def test_repeat_writes_one_file_per_seed(self, tmp_path):
        cfg = RunConfig(algorithm="linucb", seed=10, synthetic=parse_synthetic("n=5,T=200,c=1,d=3,K=4", 10))
        logs = run_repeated(cfg, 3, tmp_path)
        assert sorted(p.name for p in tmp_path.glob("*.csv")) == [f"linucb_seed{s}.csv" for s in (10, 11, 12)]
        assert len({log.environment for log in logs}) == 3

    def test_missing_replay(self, tmp_path):
        with pytest.raises(DatasetError):
            build_environment(RunConfig(replay=str(tmp_path / "none.csv")))

    def test_no_environment(self):
        with pytest.raises(InputError):
            run_experiment(RunConfig())


class TestCompare:
    def test_self_ratio_and_pairwise(self):
        env, cfg = small()
        logs = [run_random(env, cfg), run_distclub(env, cfg), run_dccb(env, cfg)]
        report = compare_runs(logs)
        runs = report["runs"]
        assert runs["random"]["reward_ratio"] == 1.0
        assert runs["distclub"]["reward_ratio"] == logs[1].cum_reward / logs[0].cum_reward
        assert report["pairwise"]["distclub/dccb"]["reward"] == logs[1].cum_reward / logs[2].cum_reward
        assert report["pairwise"]["dccb/distclub"]["bytes"] == logs[2].summary["comm_bytes"] / logs[1].summary["comm_bytes"]
        assert runs["distclub"]["cluster_curve"][-1] == [3000, logs[1].summary["clusters"]]

    def test_mismatched_environments(self):
        env_a, cfg = small()
        env_b = gen_synthetic(SyntheticConfig(n_users=15, n_interactions=3000, d=4, K=5, c_true=3, seed=3))
        with pytest.raises(InputError):
            compare_runs([run_random(env_a, cfg), run_random(env_b, cfg)])

    def test_duplicate_algorithms_get_distinct_names(self):
        env, cfg = small(T=200)
        report = compare_runs([run_random(env, cfg), run_random(env, dataclasses.replace(cfg, seed=9))])
        assert set(report["runs"]) == {"random", "random@9"}

    @pytest.mark.slow
    def test_random_vs_random_concentration(self):
        syn = SyntheticConfig(n_users=50, n_interactions=100_000, d=5, K=10, c_true=5, seed=1)
        env = gen_synthetic(syn)
        a = run_random(env, RunConfig(seed=1))
        b = run_random(env, RunConfig(seed=2))
        ratio = compare_runs([a, b])["pairwise"]["random/random@2"]["reward"]
        assert 0.9 <= ratio <= 1.1
