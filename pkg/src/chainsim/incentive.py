"""Post-run reward distribution.

Two schemes: canonical-chain miners only (Bitcoin style) and canonical miners
plus discounted rewards for accepted uncle blocks (Ethereum style).
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

from .txpool import GlobalPool

__all__ = ["RewardScheme", "distribute_rewards"]


@dataclass(frozen=True)
class RewardScheme:
    kind: str  # "canonical_only" | "canonical_plus_uncles"
    block_reward: float
    uncle_reward_fraction: float = 7 / 8
    fees_to_miner: bool = True

    def __post_init__(self):
        if self.kind not in ("canonical_only", "canonical_plus_uncles"):
            raise ValueError(f"unknown reward scheme: {self.kind!r}")
        if self.block_reward < 0:
            raise ValueError("block_reward must be non-negative")
        if not 0.0 <= self.uncle_reward_fraction <= 1.0:
            raise ValueError("uncle_reward_fraction must lie in [0, 1]")


def distribute_rewards(canonical, uncles, scheme: RewardScheme, pool: GlobalPool):
    """Per-miner balances and block counts at termination.

    Every canonical (non-genesis) block credits the full block reward, plus
    its transactions' fees if enabled, to its miner.  Under
    ``canonical_plus_uncles`` each accepted uncle additionally credits
    ``uncle_reward_fraction * block_reward``; under ``canonical_only`` uncle
    miners receive nothing.
    """
    balances = defaultdict(float)
    canonical_counts = defaultdict(int)
    uncle_counts = defaultdict(int)

    for blk in canonical:
        if blk.parent is None:
            continue
        credit = scheme.block_reward
        if scheme.fees_to_miner:
            credit += blk.txs.total_fees(pool)
        balances[blk.miner_id] += credit
        canonical_counts[blk.miner_id] += 1

    if scheme.kind == "canonical_plus_uncles":
        for blk in uncles:
            balances[blk.miner_id] += scheme.uncle_reward_fraction * scheme.block_reward
            uncle_counts[blk.miner_id] += 1

    miners = sorted(set(balances) | set(canonical_counts) | set(uncle_counts))
    return [
        {
            "node_id": m,
            "canonical_blocks": canonical_counts[m],
            "uncle_blocks": uncle_counts[m],
            "balance": balances[m],
        }
        for m in miners
    ]
