"""Simulation configuration: schema, presets, loading and validation.

A config is a flat JSON document.  A ``preset`` key expands to the built-in
``bitcoin`` or ``ethereum`` parameter sets before any explicitly given key is
applied, so explicit keys always win over preset values.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .txpool import dist_mean

__all__ = ["ConfigError", "SimulationConfig", "PRESETS", "load_config", "config_from_dict"]


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"config field '{field_name}': {message}")
        self.field = field_name


PRESETS = {
    "bitcoin": {
        "nodes": 11000,
        "sim_time_s": 600000.0,
        "block_interval_s": 600.0,
        "consensus": "pow",
        "finalization": "longest",
        "propagation": "cbr",
        "avg_degree": 12.0,
        "beta": 1.0,
        "avg_block_size_mb": 1.22,
        "tx_size_dist": {"kind": "fixed", "value": 0.001},
        "processing_delay_s_per_mb": 0.05,
        "reward_scheme": {"kind": "canonical_only", "block_reward": 6.25},
    },
    "ethereum": {
        "nodes": 8223,
        "sim_time_s": 86400.0,
        "block_interval_s": 13.05,
        "consensus": "pow",
        "finalization": "ghost",
        "propagation": "ethwire",
        "avg_degree": 19.747,
        "beta": 0.24,
        "avg_block_size_mb": 0.023,
        "tx_size_dist": {"kind": "fixed", "value": 0.0005},
        "processing_delay_s_per_mb": 2.68,
        "reward_scheme": {"kind": "canonical_plus_uncles", "block_reward": 2.0},
    },
}

_ENUMS = {
    "consensus": ("pow", "pos"),
    "finalization": ("longest", "ghost"),
    "propagation": ("cbr", "ethwire", "fixed"),
}


@dataclass
class SimulationConfig:
    nodes: int = 100
    sim_time_s: float = 3600.0
    block_interval_s: float = 600.0
    consensus: str = "pow"
    finalization: str = "longest"
    propagation: str = "fixed"
    fixed_delay_mean_s: float = 0.7
    avg_degree: float = 8.0
    beta: float = 1.0
    avg_block_size_mb: float = 1.0
    max_block_size_mb: float | None = None  # default: 2x the target block size
    tx_rate_per_s: float | None = None  # default: derived from block size target
    tx_size_dist: dict = field(default_factory=lambda: {"kind": "fixed", "value": 0.001})
    tx_fee_dist: dict = field(default_factory=lambda: {"kind": "fixed", "value": 0.0001})
    processing_delay_s_per_mb: float = 0.05
    ethwire_protocol_waits: bool = False
    region_data_path: str | None = None
    hash_power_dist: dict = field(default_factory=lambda: {"kind": "equal"})
    stake_dist: dict = field(default_factory=lambda: {"kind": "equal"})
    stake_age_init_s: float | None = None  # default: one block interval
    miners: int | None = None  # default: every node mines
    reward_scheme: dict = field(
        default_factory=lambda: {"kind": "canonical_only", "block_reward": 6.25}
    )
    seed: int = 0

    # -- derived values ---------------------------------------------------

    def effective_max_block_size_mb(self) -> float:
        if self.max_block_size_mb is not None:
            return self.max_block_size_mb
        return 2.0 * self.avg_block_size_mb

    def effective_tx_rate_per_s(self) -> float:
        """Rate matching the target average block size at the block interval."""
        if self.tx_rate_per_s is not None:
            return self.tx_rate_per_s
        mean_size = dist_mean(self.tx_size_dist)
        return self.avg_block_size_mb / (mean_size * self.block_interval_s)

    def effective_miners(self) -> int:
        return self.nodes if self.miners is None else self.miners

    def effective_stake_age_init_s(self) -> float:
        return self.block_interval_s if self.stake_age_init_s is None else self.stake_age_init_s

    # -- validation -------------------------------------------------------

    def validate(self) -> "SimulationConfig":
        if self.nodes < 1:
            raise ConfigError("nodes", "must be at least 1")
        if self.sim_time_s < 0:
            raise ConfigError("sim_time_s", "must be non-negative")
        if self.block_interval_s <= 0:
            raise ConfigError("block_interval_s", "must be positive")
        for key, allowed in _ENUMS.items():
            if getattr(self, key) not in allowed:
                raise ConfigError(key, f"must be one of {allowed}")
        if self.propagation == "fixed" and self.fixed_delay_mean_s <= 0:
            raise ConfigError("fixed_delay_mean_s", "must be positive")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError("beta", "must lie in [0, 1]")
        if self.nodes > 1 and not 0.0 < self.avg_degree < self.nodes:
            raise ConfigError("avg_degree", "must lie in (0, nodes)")
        if self.avg_block_size_mb <= 0:
            raise ConfigError("avg_block_size_mb", "must be positive")
        if self.max_block_size_mb is not None and self.max_block_size_mb <= 0:
            raise ConfigError("max_block_size_mb", "must be positive")
        if self.tx_rate_per_s is not None and self.tx_rate_per_s <= 0:
            raise ConfigError("tx_rate_per_s", "must be positive")
        if self.processing_delay_s_per_mb < 0:
            raise ConfigError("processing_delay_s_per_mb", "must be non-negative")
        if self.miners is not None and not 0 <= self.miners <= self.nodes:
            raise ConfigError("miners", "must lie in [0, nodes]")
        for key in ("tx_size_dist", "tx_fee_dist"):
            try:
                dist_mean(getattr(self, key))
            except (KeyError, ValueError) as exc:
                raise ConfigError(key, str(exc)) from exc
        kind = self.reward_scheme.get("kind")
        if kind not in ("canonical_only", "canonical_plus_uncles"):
            raise ConfigError("reward_scheme", f"unknown kind {kind!r}")
        if not isinstance(self.seed, int):
            raise ConfigError("seed", "must be an integer")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


_FIELD_NAMES = {f.name for f in fields(SimulationConfig)}


def config_from_dict(doc: dict) -> SimulationConfig:
    """Build a validated config from a plain dict, expanding any preset first."""
    doc = dict(doc)
    preset = doc.pop("preset", None)
    merged: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError("preset", f"unknown preset {preset!r}")
        merged.update(PRESETS[preset])
    for key, value in doc.items():
        if key not in _FIELD_NAMES:
            raise ConfigError(key, "unknown key")
        merged[key] = value
    cfg = SimulationConfig(**merged)
    return cfg.validate()


def load_config(path) -> SimulationConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON in {path}: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError("config", "top-level document must be an object")
    return config_from_dict(doc)
