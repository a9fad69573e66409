"""Command line: ``clubbench run`` and ``clubbench compare``.

Exit codes: 0 success, 2 bad usage or configuration, 3 dataset error,
4 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ALGORITHMS, RunConfig, apply_overrides, format_config, read_config_file
from .errors import DatasetError, InputError, NumericFailure
from .harness import compare_runs, metrics_path, run_repeated
from .metrics import read_metrics

EXIT_USAGE = 2
EXIT_DATASET = 3
EXIT_NUMERIC = 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clubbench", description="Clustering-of-bandits benchmark")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one algorithm on an environment")
    run.add_argument("--algorithm", choices=ALGORITHMS)
    run.add_argument("--config", help="flat key=value configuration file")
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--out", help="directory for metrics CSV/JSON files")
    run.add_argument("--repeat", type=int, default=1, help="run seeds seed, seed+1, ...")
    run.add_argument("--checkpoint-every", type=int)
    env = run.add_mutually_exclusive_group()
    env.add_argument("--synthetic", metavar="SPEC", help='e.g. "n=100,c=5,T=1000,seed=1"')
    env.add_argument("--replay", metavar="PATH", help="logged interaction file")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override any configuration key (repeatable)")

    cmp = sub.add_parser("compare", help="compare metrics files from runs on one environment")
    cmp.add_argument("metrics", nargs="+", help="metrics CSV files (JSON sidecars alongside)")
    cmp.add_argument("--baseline", default="random")
    cmp.add_argument("--out", help="write the JSON report here instead of stdout")
    return p


def resolve_config(args) -> RunConfig:
    """Defaults, then the config file, then command-line flags."""
    pairs = read_config_file(args.config) if args.config else {}
    flags = {"algorithm": args.algorithm, "seed": args.seed, "n_workers": args.workers,
             "checkpoint_every": args.checkpoint_every}
    for key, value in flags.items():
        if value is not None:
            pairs[key] = str(value)
    if args.synthetic is not None:
        pairs.pop("replay", None)
        pairs["synthetic"] = args.synthetic
    if args.replay is not None:
        pairs.pop("synthetic", None)
        pairs["replay"] = args.replay
    for item in args.set:
        if "=" not in item:
            raise InputError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        pairs[key.strip()] = value.strip()
    cfg = apply_overrides(RunConfig(), pairs)
    return cfg.validate()


def _cmd_run(args) -> int:
    cfg = resolve_config(args)
    print("# resolved configuration")
    print(format_config(cfg))
    logs = run_repeated(cfg, args.repeat, args.out)
    for i, log in enumerate(logs):
        s = log.summary
        line = (f"{log.algorithm} seed={cfg.seed + i} T={s['T']} cum_reward={s['cum_reward']} "
                f"cum_regret={s['cum_regret']:.4f} clusters={s['clusters']} comm_bytes={s['comm_bytes']}")
        if args.out:
            line += f" -> {metrics_path(args.out, cfg.with_seed(cfg.seed + i))}"
        print(line)
    return 0


def _cmd_compare(args) -> int:
    logs = []
    for path in args.metrics:
        try:
            logs.append(read_metrics(path))
        except OSError as exc:
            raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    report = json.dumps(compare_runs(logs, args.baseline), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(report + "\n")
    else:
        print(report)
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _cmd_run(args) if args.command == "run" else _cmd_compare(args)
    except DatasetError as exc:
        print(f"clubbench: dataset error: {exc}", file=sys.stderr)
        return EXIT_DATASET
    except InputError as exc:
        print(f"clubbench: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericFailure as exc:
        print(f"clubbench: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
