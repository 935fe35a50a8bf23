"""Experiment configuration: a sectioned key = value file with full defaults.

Only ``run.seed`` is mandatory; every other key has a default, and unknown
sections or keys are rejected by name.  See docs/config.md for the schema.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, replace
from pathlib import Path

from . import losses, scheduler, tokenomics
from .data import VALID_SCHEMES


class ConfigError(ValueError):
    """Invalid, unknown, or inconsistent configuration entry."""


@dataclass(frozen=True)
class ExperimentConfig:
    # run
    seed: int
    aggregation: str = scheduler.FEDTOKEN
    target_accuracy: float = 0.7
    # data
    data_source: str = "synthetic"
    csv_path: str = ""
    csv_header: bool = False
    n_samples: int = 400
    dim: int = 5
    separation: float = 3.0
    test_fraction: float = 0.25
    partition_scheme: str = "iid"
    shards_k: int = 2
    dirichlet_beta: float = 0.5
    # learning
    loss: str = losses.LOGISTIC
    lam: float = 0.01
    nu: float | str = "auto"
    local_passes: int = 1
    # federation
    n_clients: int = 100
    m_fraction: float = 0.1
    quota: int | None = None
    quota_ratio: float | None = None
    rounds: int = 50
    # valuation
    delta: int = 4
    eps: float = 0.0
    weighting: str = "mean"
    # attack
    poison_clients: tuple[int, ...] = ()
    flip_fraction: float = 1.0
    # tokens
    total_tokens: int = 1000
    per_round_microtokens: int | None = None
    participation_base_microtokens: int | None = None
    allocation: str = "pf"
    zeta: float = 0.7
    participation_for_selected: bool = False

    @property
    def cohort_size(self) -> int:
        return max(1, math.ceil(self.m_fraction * self.n_clients))

    @property
    def resolved_quota(self) -> int:
        if self.quota is not None:
            return self.quota
        ratio = 0.5 if self.quota_ratio is None else self.quota_ratio
        return max(1, math.ceil(ratio * self.cohort_size))

    @property
    def total_microtokens(self) -> int:
        return self.total_tokens * 10**6

    @property
    def resolved_per_round_microtokens(self) -> int:
        if self.per_round_microtokens is not None:
            return self.per_round_microtokens
        return self.total_microtokens // max(self.rounds, 1)

    @property
    def resolved_participation_base(self) -> int:
        if self.participation_base_microtokens is not None:
            return self.participation_base_microtokens
        return self.resolved_per_round_microtokens // 100

    @property
    def allocation_kind(self) -> str:
        return tokenomics.PROPORTIONAL_FAIR if self.allocation == "pf" \
            else tokenomics.EQUAL_PAY


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_ids(raw: str) -> tuple[int, ...]:
    raw = raw.strip()
    if not raw:
        return ()
    return tuple(int(tok) for tok in raw.split(","))


def _parse_nu(raw: str):
    raw = raw.strip()
    if raw == "auto":
        return "auto"
    return float(raw)


def _parse_opt_int(raw: str):
    raw = raw.strip()
    if raw in ("", "none"):
        return None
    return int(raw)


def _parse_opt_float(raw: str):
    raw = raw.strip()
    if raw in ("", "none"):
        return None
    return float(raw)


# section -> file key -> (dataclass field, parser)
_SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "run": {
        "seed": ("seed", int),
        "aggregation": ("aggregation", str.strip),
        "target_accuracy": ("target_accuracy", float),
    },
    "data": {
        "source": ("data_source", str.strip),
        "csv_path": ("csv_path", str.strip),
        "csv_header": ("csv_header", _parse_bool),
        "n_samples": ("n_samples", int),
        "dim": ("dim", int),
        "separation": ("separation", float),
        "test_fraction": ("test_fraction", float),
        "partition": ("partition_scheme", str.strip),
        "shards_k": ("shards_k", int),
        "dirichlet_beta": ("dirichlet_beta", float),
    },
    "learning": {
        "loss": ("loss", str.strip),
        "lambda": ("lam", float),
        "nu": ("nu", _parse_nu),
        "local_passes": ("local_passes", int),
    },
    "federation": {
        "n_clients": ("n_clients", int),
        "m_fraction": ("m_fraction", float),
        "quota": ("quota", _parse_opt_int),
        "quota_ratio": ("quota_ratio", _parse_opt_float),
        "rounds": ("rounds", int),
    },
    "valuation": {
        "delta": ("delta", int),
        "eps": ("eps", float),
        "weighting": ("weighting", str.strip),
    },
    "attack": {
        "poison_clients": ("poison_clients", _parse_ids),
        "flip_fraction": ("flip_fraction", float),
    },
    "tokens": {
        "total_tokens": ("total_tokens", int),
        "per_round_microtokens": ("per_round_microtokens", _parse_opt_int),
        "participation_base_microtokens": ("participation_base_microtokens", _parse_opt_int),
        "allocation": ("allocation", str.strip),
        "zeta": ("zeta", float),
        "participation_for_selected": ("participation_for_selected", _parse_bool),
    },
}

_FIELD_TO_KEY = {spec[0]: (section, key)
                 for section, keys in _SCHEMA.items()
                 for key, spec in keys.items()}


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    def fail(field_name: str, message: str):
        section, key = _FIELD_TO_KEY[field_name]
        raise ConfigError(f"{section}.{key}: {message}")

    if cfg.aggregation not in scheduler.AGGREGATION_POLICIES:
        fail("aggregation", f"must be one of {scheduler.AGGREGATION_POLICIES}")
    if not 0.0 < cfg.target_accuracy <= 1.0:
        fail("target_accuracy", "must be in (0, 1]")
    if cfg.data_source not in ("synthetic", "csv"):
        fail("data_source", "must be 'synthetic' or 'csv'")
    if cfg.data_source == "csv" and not cfg.csv_path:
        fail("csv_path", "required when data.source = csv")
    if cfg.n_samples < 4:
        fail("n_samples", "need at least 4 samples")
    if cfg.dim < 1:
        fail("dim", "must be >= 1")
    if cfg.separation <= 0:
        fail("separation", "must be > 0")
    if not 0.0 < cfg.test_fraction < 1.0:
        fail("test_fraction", "must be in (0, 1)")
    if cfg.partition_scheme not in VALID_SCHEMES:
        fail("partition_scheme", f"must be one of {VALID_SCHEMES}")
    if cfg.shards_k < 1:
        fail("shards_k", "must be >= 1")
    if cfg.dirichlet_beta <= 0:
        fail("dirichlet_beta", "must be > 0")
    if cfg.loss not in losses.LOSS_KINDS:
        fail("loss", f"must be one of {losses.LOSS_KINDS}")
    if cfg.lam <= 0:
        fail("lam", "must be > 0")
    if cfg.nu != "auto" and not 0.0 < float(cfg.nu) <= 1.0:
        fail("nu", "must be 'auto' or in (0, 1]")
    if cfg.local_passes < 1:
        fail("local_passes", "must be >= 1")
    if cfg.n_clients < 1:
        fail("n_clients", "must be >= 1")
    if not 0.0 < cfg.m_fraction <= 1.0:
        fail("m_fraction", "must be in (0, 1]")
    if cfg.quota is not None and cfg.quota_ratio is not None:
        fail("quota", "give either quota or quota_ratio, not both")
    if cfg.quota is not None and cfg.quota < 1:
        fail("quota", "must be >= 1")
    if cfg.quota_ratio is not None and not 0.0 < cfg.quota_ratio <= 1.0:
        fail("quota_ratio", "must be in (0, 1]")
    if cfg.resolved_quota > cfg.cohort_size:
        fail("quota", f"quota {cfg.resolved_quota} exceeds cohort size {cfg.cohort_size}")
    if cfg.rounds < 0:
        fail("rounds", "must be >= 0")
    if cfg.delta < 1:
        fail("delta", "must be >= 1")
    if cfg.eps < 0:
        fail("eps", "must be >= 0")
    if cfg.weighting not in ("mean", "sum"):
        fail("weighting", "must be 'mean' or 'sum'")
    if any(not 0 <= c < cfg.n_clients for c in cfg.poison_clients):
        fail("poison_clients", f"ids must lie in [0, {cfg.n_clients})")
    if not 0.0 <= cfg.flip_fraction <= 1.0:
        fail("flip_fraction", "must be in [0, 1]")
    if cfg.total_tokens < 1:
        fail("total_tokens", "must be >= 1")
    if cfg.per_round_microtokens is not None and cfg.per_round_microtokens < 1:
        fail("per_round_microtokens", "must be >= 1")
    if cfg.resolved_per_round_microtokens > cfg.total_microtokens:
        fail("per_round_microtokens", "per-round pool exceeds the total budget")
    if cfg.participation_base_microtokens is not None and cfg.participation_base_microtokens < 0:
        fail("participation_base_microtokens", "must be >= 0")
    if cfg.allocation not in ("pf", "ep"):
        fail("allocation", "must be 'pf' or 'ep'")
    if not 0.0 < cfg.zeta < 1.0:
        fail("zeta", "must be in (0, 1)")
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as err:
        raise ConfigError(f"cannot parse {path}: {err}") from err

    values: dict[str, object] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")
            field_name, parse = _SCHEMA[section][key]
            try:
                values[field_name] = parse(raw)
            except (ValueError, TypeError) as err:
                raise ConfigError(f"{section}.{key}: bad value {raw!r} ({err})") from err
    if "seed" not in values:
        raise ConfigError("run.seed is required")
    return validate(ExperimentConfig(**values))


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def save_config(cfg: ExperimentConfig, path: str | Path) -> None:
    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (field_name, _) in keys.items():
            lines.append(f"{key} = {_format_value(getattr(cfg, field_name))}")
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")


def with_overrides(cfg: ExperimentConfig, **kwargs) -> ExperimentConfig:
    return validate(replace(cfg, **kwargs))
