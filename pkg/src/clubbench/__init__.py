"""Clustering-of-bandits benchmark: LinUCB, CLUB, DCCB and DistCLUB under a
deterministic simulated-distributed runtime with byte-exact communication
accounting."""
from .config import RunConfig, parse_synthetic
from .environment import ReplayEnvironment, SyntheticConfig, SyntheticEnvironment, gen_synthetic, load_replay
from .errors import ClubBenchError, DatasetError, InputError, NumericFailure, ReplayParseError, SchemaError
from .harness import compare_runs, run_algorithm, run_experiment
from .metrics import MetricsLog, emit_metrics, read_metrics

__version__ = "0.1.0"

__all__ = [
    "ClubBenchError", "DatasetError", "InputError", "MetricsLog", "NumericFailure", "ReplayEnvironment",
    "ReplayParseError", "RunConfig", "SchemaError", "SyntheticConfig", "SyntheticEnvironment",
    "compare_runs", "emit_metrics", "gen_synthetic", "load_replay", "parse_synthetic", "read_metrics",
    "run_algorithm", "run_experiment",
]
