"""Policy runners. Each ``run_*`` takes ``(env, config, runtime=None)`` and returns a MetricsLog."""
from .baselines import LinUCBRunner, RandomRunner, run_linucb, run_random
from .club import ClubRunner, run_club
from .dccb import DccbRunner, run_dccb
from .distclub import DistClubRunner, run_distclub

RUNNERS = {
    "random": RandomRunner,
    "linucb": LinUCBRunner,
    "club": ClubRunner,
    "dccb": DccbRunner,
    "distclub": DistClubRunner,
}

__all__ = [
    "RUNNERS", "ClubRunner", "DccbRunner", "DistClubRunner", "LinUCBRunner", "RandomRunner",
    "run_club", "run_dccb", "run_distclub", "run_linucb", "run_random",
]
