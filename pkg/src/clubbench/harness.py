"""Experiment orchestration and cross-run comparison reports."""
from __future__ import annotations

from pathlib import Path

from .algorithms import RUNNERS
from .config import RunConfig
from .environment import Environment, SyntheticEnvironment, load_replay
from .errors import DatasetError, InputError
from .metrics import MetricsLog, emit_metrics
from .runtime import Runtime


def build_environment(config: RunConfig) -> Environment:
    spec = config.environment_config()
    if isinstance(spec, str):
        try:
            return load_replay(spec)
        except OSError as exc:
            raise DatasetError(f"cannot read replay file {spec!r}: {exc.strerror or exc}") from exc
    return SyntheticEnvironment(spec)


def run_algorithm(env: Environment, config: RunConfig, runtime: Runtime | None = None) -> MetricsLog:
    config.validate()
    return RUNNERS[config.algorithm](env, config, runtime).run()


def metrics_path(out_dir, config: RunConfig) -> Path:
    return Path(out_dir) / f"{config.algorithm}_seed{config.seed}.csv"


def run_experiment(config: RunConfig, out_dir=None, env: Environment | None = None) -> MetricsLog:
    """Run one configuration; with ``out_dir`` set, also write its metrics files."""
    config.validate()
    env = build_environment(config) if env is None else env
    log = run_algorithm(env, config)
    if out_dir is not None:
        emit_metrics(log, metrics_path(out_dir, config))
    return log


def run_repeated(config: RunConfig, repeat: int = 1, out_dir=None) -> list[MetricsLog]:
    """Seeds ``seed, seed+1, ...``; one metrics file per seed."""
    if repeat < 1:
        raise InputError("repeat must be >= 1")
    return [run_experiment(config.with_seed(config.seed + i), out_dir) for i in range(repeat)]


def _ratio(a: float, b: float) -> float | None:
    return a / b if b else None


def _label(log: MetricsLog, taken: set) -> str:
    base = log.algorithm
    seed = log.config.get("seed")
    name = base if base not in taken else f"{base}@{seed}"
    k = 2
    while name in taken:
        name = f"{base}#{k}"
        k += 1
    taken.add(name)
    return name


def compare_runs(logs: list[MetricsLog], baseline: str = "random") -> dict:
    """Reward ratios against the baseline, regret, cluster curves and byte totals.

    All logs must come from the same environment (same fingerprint).
    """
    if not logs:
        raise InputError("nothing to compare")
    envs = {log.environment for log in logs}
    if len(envs) != 1:
        raise InputError("runs were made on different environments: " + "; ".join(sorted(envs)))
    taken: set = set()
    names = [_label(log, taken) for log in logs]
    base = next((log for log in logs if log.algorithm == baseline), None)
    runs = {}
    for name, log in zip(names, logs):
        runs[name] = {
            "algorithm": log.algorithm,
            "seed": log.config.get("seed"),
            "cum_reward": log.cum_reward,
            "cum_regret": log.cum_regret,
            "reward_ratio": None if base is None else _ratio(log.cum_reward, base.cum_reward),
            "final_clusters": log.summary.get("clusters"),
            "comm_bytes": log.summary.get("comm_bytes", 0),
            "cluster_curve": [[r.t, r.clusters] for r in log.rows],
        }
    pairwise = {}
    for a in names:
        for b in names:
            if a != b:
                pairwise[f"{a}/{b}"] = {
                    "reward": _ratio(runs[a]["cum_reward"], runs[b]["cum_reward"]),
                    "bytes": _ratio(runs[a]["comm_bytes"], runs[b]["comm_bytes"]),
                }
    return {"environment": envs.pop(), "baseline": None if base is None else baseline,
            "runs": runs, "pairwise": pairwise}
