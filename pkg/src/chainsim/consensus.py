"""Block-proposal timing for PoW and PoS.

Inter-block times are exponential, with each miner's rate proportional to its
hash-power share (PoW) or to its coin-age-weighted stake share (PoS), scaled
so the network-wide rate is ``1 / block_interval``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "MinerWeight",
    "ConsensusParams",
    "sample_exponential",
    "pow_next_generation",
    "pos_weight",
    "pos_next_generation",
    "reset_stake_age",
]


@dataclass(frozen=True)
class MinerWeight:
    """Proposal weight inputs for one miner."""

    hash_power: float = 0.0
    stake: float = 0.0
    stake_acquired_at: float = 0.0

    def __post_init__(self):
        if self.hash_power < 0:
            raise ValueError("hash_power must be non-negative")
        if self.stake < 0:
            raise ValueError("stake must be non-negative")
        if self.stake_acquired_at < 0:
            raise ValueError("stake_acquired_at must be non-negative")

    def age(self, now: float) -> float:
        return max(0.0, now - self.stake_acquired_at)


@dataclass(frozen=True)
class ConsensusParams:
    protocol: str  # "pow" | "pos"
    block_interval_s: float

    def __post_init__(self):
        if self.protocol not in ("pow", "pos"):
            raise ValueError(f"unknown protocol: {self.protocol!r}")
        if self.block_interval_s <= 0:
            raise ValueError("block_interval_s must be positive")


def sample_exponential(rate: float, rng: np.random.Generator) -> float:
    """Exponential draw via inverse CDF, T = -ln(u)/rate with u in (0, 1].

    Resamples in the (measure-zero) event of a zero draw so the result is
    always strictly positive.
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    while True:
        u = 1.0 - rng.random()
        t = -math.log(u) / rate
        if t > 0.0:
            return t


def pow_next_generation(
    weight: MinerWeight,
    total_hash: float,
    params: ConsensusParams,
    now: float,
    rng: np.random.Generator,
) -> float | None:
    """Timestamp of the miner's next PoW proposal, or None for zero weight."""
    if total_hash <= 0:
        raise ValueError("total_hash must be positive")
    if weight.hash_power > total_hash:
        raise ValueError("hash_power cannot exceed total_hash")
    share = weight.hash_power / total_hash
    if share == 0.0:
        return None
    lam = share / params.block_interval_s
    return now + sample_exponential(lam, rng)


def pos_weight(weight: MinerWeight, now: float) -> float:
    """Coin-age-weighted stake S_i * Age_i evaluated at ``now``."""
    return weight.stake * weight.age(now)


def pos_next_generation(
    weight: MinerWeight,
    aggregate: float,
    params: ConsensusParams,
    now: float,
    rng: np.random.Generator,
) -> float | None:
    """Timestamp of the miner's next PoS proposal, or None for zero weight.

    ``aggregate`` is the sum of S_j * Age_j over all miners at ``now``; a zero
    own-weight (stake just reset, or no stake) yields no proposal rather than
    an infinite time.
    """
    if aggregate <= 0:
        raise ValueError("aggregate stake-age must be positive")
    share = pos_weight(weight, now) / aggregate
    if share == 0.0:
        return None
    lam = share / params.block_interval_s
    return now + sample_exponential(lam, rng)


def reset_stake_age(weight: MinerWeight, now: float) -> MinerWeight:
    """Reset coin age to zero (PeerCoin convention after a successful proposal)."""
    if now < weight.stake_acquired_at:
        raise ValueError("cannot reset stake age into the past")
    return replace(weight, stake_acquired_at=now)
