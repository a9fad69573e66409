"""Run configuration: defaults, key=value files, synthetic spec strings."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .environment import SyntheticConfig
from .errors import InputError

ALGORITHMS = ("linucb", "club", "dccb", "distclub", "random")

# short keys accepted in "n=200,c=20,T=50000" style synthetic specs
_SYNTH_ALIASES = {
    "n": "n_users", "users": "n_users", "n_users": "n_users",
    "T": "n_interactions", "t": "n_interactions", "n_interactions": "n_interactions",
    "d": "d", "K": "K", "k": "K",
    "c": "c_true", "c_true": "c_true",
    "noise": "noise", "seed": "seed", "signal": "signal",
    "quant_bits": "quant_bits", "q": "quant_bits",
}


@dataclass
class RunConfig:
    algorithm: str = "distclub"
    alpha: float = 0.03
    beta: float = 2.0
    gamma: float = 0.7
    network_delay: int = 2000
    buffer_size: int = 5000
    sigma: int = 2500
    n_workers: int = 1
    seed: int = 0
    checkpoint_every: int = 1000
    synthetic: SyntheticConfig | None = None
    replay: str | None = None
    # Mc = I + sum(Mu) ("listing") or I + sum(Mu - I) ("offset")
    cluster_agg_mode: str = "listing"
    # DCCB averaging also writes the peer's state
    symmetric_averaging: bool = False
    # DistCLUB stage 3 uses the user's own inverse for the bonus when personalized
    personal_bonus_matrix: bool = False
    max_pairs_per_update: int | None = None
    # window/trigger counting: "global" interactions or "per_user" interaction counts
    dccb_trigger: str = "global"
    window_mode: str = "global"

    def validate(self) -> "RunConfig":
        if self.algorithm not in ALGORITHMS:
            raise InputError(f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        if self.alpha < 0:
            raise InputError("alpha must be >= 0")
        for name in ("beta", "gamma"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be > 0")
        for name in ("network_delay", "buffer_size", "sigma", "n_workers", "checkpoint_every"):
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be >= 1")
        if self.max_pairs_per_update is not None and self.max_pairs_per_update < 1:
            raise InputError("max_pairs_per_update must be >= 1")
        if self.cluster_agg_mode not in ("listing", "offset"):
            raise InputError("cluster_agg_mode must be 'listing' or 'offset'")
        if self.dccb_trigger not in ("global", "per_user"):
            raise InputError("dccb_trigger must be 'global' or 'per_user'")
        if self.window_mode not in ("global", "per_user"):
            raise InputError("window_mode must be 'global' or 'per_user'")
        if self.synthetic is not None and self.replay is not None:
            raise InputError("give either a synthetic spec or a replay path, not both")
        if self.synthetic is not None:
            self.synthetic.validate()
        return self

    def environment_config(self) -> SyntheticConfig | str:
        if self.replay is not None:
            return self.replay
        if self.synthetic is None:
            raise InputError("no environment: pass --synthetic or --replay")
        return self.synthetic

    def with_seed(self, seed: int) -> "RunConfig":
        """Copy with a new run seed; the synthetic seed follows unless pinned."""
        synth = self.synthetic
        if synth is not None and synth.seed == self.seed:
            synth = dataclasses.replace(synth, seed=seed)
        return dataclasses.replace(self, seed=seed, synthetic=synth)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def parse_synthetic(spec: str, default_seed: int = 0) -> SyntheticConfig:
    """Parse ``"n=100,c=5,T=1000,seed=1"``; omitted seed falls back to ``default_seed``."""
    values: dict = {"seed": default_seed}
    for part in filter(None, (p.strip() for p in spec.split(","))):
        if "=" not in part:
            raise InputError(f"synthetic spec entry {part!r} is not key=value")
        key, raw = (s.strip() for s in part.split("=", 1))
        name = _SYNTH_ALIASES.get(key)
        if name is None:
            raise InputError(f"unknown synthetic key {key!r}")
        values[name] = _coerce(SyntheticConfig, name, raw)
    if "n_users" not in values or "n_interactions" not in values:
        raise InputError("synthetic spec needs at least n=<users> and T=<interactions>")
    cfg = SyntheticConfig(**values)
    cfg.validate()
    return cfg


def _coerce(cls, name: str, raw: str):
    ftype = {f.name: f.type for f in dataclasses.fields(cls)}[name]
    ftype = str(ftype)
    try:
        if "bool" in ftype:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if raw.lower() == "none" and "None" in ftype:
            return None
        if ftype.startswith("int"):
            return int(raw)
        if ftype.startswith("float"):
            return float(raw)
        return raw
    except ValueError:
        raise InputError(f"bad value {raw!r} for {name}") from None


def apply_overrides(cfg: RunConfig, pairs: dict[str, str]) -> RunConfig:
    """Apply string key/value overrides (from a config file or ``--set``)."""
    fields = {f.name for f in dataclasses.fields(RunConfig)}
    aliases = {"workers": "n_workers", "delta": "network_delay", "L": "buffer_size",
               "bufferSize": "buffer_size"}
    updates = {}
    synth_spec = None
    for key, raw in pairs.items():
        key = aliases.get(key, key)
        if key == "synthetic":
            synth_spec = raw
            continue
        if key not in fields:
            raise InputError(f"unknown config key {key!r}")
        if key == "replay":
            updates[key] = raw
            continue
        updates[key] = _coerce(RunConfig, key, raw)
    cfg = dataclasses.replace(cfg, **updates)
    if synth_spec is not None:
        cfg = dataclasses.replace(cfg, synthetic=parse_synthetic(synth_spec, cfg.seed), replay=None)
    return cfg


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    pairs = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        pairs[key] = value
    return pairs


def synthetic_spec(cfg: SyntheticConfig) -> str:
    """Inverse of :func:`parse_synthetic`."""
    return (f"n={cfg.n_users},T={cfg.n_interactions},d={cfg.d},K={cfg.K},c={cfg.c_true},"
            f"noise={cfg.noise!r},seed={cfg.seed},signal={cfg.signal!r},quant_bits={cfg.quant_bits}")


def format_config(cfg: RunConfig) -> str:
    """Resolved configuration as ``key = value`` lines, readable by read_config_file."""
    lines = []
    for f in dataclasses.fields(RunConfig):
        value = getattr(cfg, f.name)
        if f.name == "synthetic":
            if value is None:
                continue
            value = synthetic_spec(value)
        elif f.name == "replay" and value is None:
            continue
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines)
