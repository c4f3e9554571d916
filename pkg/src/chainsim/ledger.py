"""Blocks, per-node chain state and fork-choice rules.

Blocks are immutable records with parent pointers, so "a chain" is just a tip
block and adoption of a longer chain costs only a walk back to the common
ancestor.  Two finalization rules are provided: longest chain (compare tip
depths) and a GHOST variant that compares depth plus observed uncle count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .txpool import GlobalPool, TxBitset

__all__ = [
    "Block",
    "NodeChainState",
    "ChainUpdate",
    "ProcessingModel",
    "processing_delay",
    "apply_longest_rule",
    "apply_ghost_rule",
    "chain_of",
    "chain_metrics",
    "select_accepted_uncles",
    "MAX_UNCLES_PER_BLOCK",
]

# Ethereum-style cap on how many new uncles one appended block may reference.
MAX_UNCLES_PER_BLOCK = 2


class Block:
    """Immutable chain element.

    ``chain_uncles`` is the total number of uncle blocks referenced along the
    chain ending at this block (the GHOST weight contribution).  ``cum_txs``
    is the bitwise union of the transaction bitsets of every block on that
    chain; a node whose tip is this block therefore has mempool bits equal to
    the complement of ``cum_txs``, which lets fork choice skip per-receive
    mempool updates entirely.
    """

    __slots__ = (
        "id", "parent", "miner_id", "depth", "gen_timestamp", "size_mb", "txs",
        "chain_uncles", "cum_txs",
    )

    def __init__(self, id, parent, miner_id, depth, gen_timestamp, size_mb, txs,
                 chain_uncles=None, cum_txs=None):
        self.id = id
        self.parent = parent
        self.miner_id = miner_id
        self.depth = depth
        self.gen_timestamp = gen_timestamp
        self.size_mb = size_mb
        self.txs = txs
        if chain_uncles is None:
            chain_uncles = 0 if parent is None else parent.chain_uncles
        self.chain_uncles = chain_uncles
        if cum_txs is None:
            cum_txs = txs.bits if parent is None else (parent.cum_txs | txs.bits)
        self.cum_txs = cum_txs
        if parent is None:
            if depth != 0:
                raise ValueError("genesis must have depth 0")
        elif depth != parent.depth + 1:
            raise ValueError("depth must be parent depth + 1")

    @property
    def weight(self) -> int:
        """GHOST weight of the chain ending here."""
        return self.depth + self.chain_uncles

    @classmethod
    def genesis(cls, tx_count: int = 0) -> "Block":
        return cls(0, None, -1, 0, 0.0, 0.0, TxBitset.empty(tx_count))

    def __repr__(self):
        return f"Block(id={self.id}, depth={self.depth}, miner={self.miner_id})"


@dataclass
class ChainUpdate:
    """What a fork-choice decision changed on the receiving node.

    ``entering`` blocks joined the main chain (their transactions must be
    removed from the mempool); ``leaving`` blocks were displaced (their
    transactions must be released back).
    """

    appended: Block | None = None
    uncled: Block | None = None
    entering: list = field(default_factory=list)
    leaving: list = field(default_factory=list)

    @property
    def adopted(self) -> bool:
        return self.appended is None and self.uncled is None


@dataclass
class NodeChainState:
    """One node's view: main-chain tip plus the uncles it knows about.

    ``uncle_count`` tracks the uncles referenced by the node's current chain
    and is kept in sync with ``tip.chain_uncles`` by the fork-choice rules.
    Uncles the node has seen but not yet referenced are pending until the
    node itself mines (at most MAX_UNCLES_PER_BLOCK per new block).
    """

    tip: Block
    unclechain: list = field(default_factory=list)
    uncle_count: int = 0
    _pending_uncles: int = 0

    def note_uncle(self, block: Block) -> None:
        self.unclechain.append(block)
        self._pending_uncles += 1

    def reference_uncles(self, cap: int = MAX_UNCLES_PER_BLOCK) -> int:
        """Consume up to ``cap`` pending uncles for a block this node mines."""
        take = min(cap, self._pending_uncles)
        self._pending_uncles -= take
        return take

    @property
    def weight(self) -> int:
        return self.tip.depth + self.uncle_count


@dataclass(frozen=True)
class ProcessingModel:
    pd_s_per_mb: float

    def __post_init__(self):
        if self.pd_s_per_mb < 0:
            raise ValueError("processing delay must be non-negative")


def processing_delay(size_mb: float, model: ProcessingModel) -> float:
    """Linear block validation/execution delay."""
    if size_mb < 0:
        raise ValueError("size must be non-negative")
    return model.pd_s_per_mb * size_mb


def _divergence(old_tip: Block, new_tip: Block):
    """Blocks leaving and entering the main chain when moving between tips.

    Returned ``entering`` is ordered genesis-side first.
    """
    leaving, entering = [], []
    a, b = old_tip, new_tip
    while b.depth > a.depth:
        entering.append(b)
        b = b.parent
    while a.depth > b.depth:
        leaving.append(a)
        a = a.parent
    while a is not b:
        leaving.append(a)
        entering.append(b)
        a = a.parent
        b = b.parent
    entering.reverse()
    return leaving, entering


def _apply(receiver: NodeChainState, incoming: Block, adopt: bool) -> ChainUpdate:
    if incoming.parent is receiver.tip:
        receiver.tip = incoming
        receiver.uncle_count = incoming.chain_uncles
        return ChainUpdate(appended=incoming, entering=[incoming])
    if adopt:
        leaving, entering = _divergence(receiver.tip, incoming)
        receiver.tip = incoming
        receiver.uncle_count = incoming.chain_uncles
        for blk in leaving:
            receiver.note_uncle(blk)
        return ChainUpdate(entering=entering, leaving=leaving)
    receiver.note_uncle(incoming)
    return ChainUpdate(uncled=incoming)


def apply_longest_rule(receiver: NodeChainState, incoming: Block) -> ChainUpdate:
    """Longest-chain fork choice: adopt iff strictly deeper; ties keep local."""
    adopt = incoming.depth > receiver.tip.depth
    return _apply(receiver, incoming, adopt)


def apply_ghost_rule(receiver: NodeChainState, incoming: Block) -> ChainUpdate:
    """GHOST-style fork choice comparing chain weights (depth + uncles).

    Adoption requires the incoming chain's weight to strictly exceed the
    receiver's; ties keep the local chain.
    """
    adopt = incoming.weight > receiver.weight
    return _apply(receiver, incoming, adopt)


def chain_of(tip: Block) -> list:
    """Blocks from genesis to ``tip``, inclusive."""
    chain = []
    b = tip
    while b is not None:
        chain.append(b)
        b = b.parent
    chain.reverse()
    return chain


def chain_metrics(all_blocks, canonical_chain) -> dict:
    """Stale/uncle rate and average block size of the finished run.

    Genesis is excluded on both sides.  With zero generated blocks the
    metrics are reported as absent (None), not zero.
    """
    generated = [b for b in all_blocks if b.parent is not None]
    canonical = [b for b in canonical_chain if b.parent is not None]
    if not generated:
        return {"stale_rate": None, "avg_block_size_mb": None, "total_blocks": 0, "canonical_length": 0}
    stale = (len(generated) - len(canonical)) / len(generated)
    avg_size = sum(b.size_mb for b in canonical) / len(canonical) if canonical else None
    return {
        "stale_rate": stale,
        "avg_block_size_mb": avg_size,
        "total_blocks": len(generated),
        "canonical_length": len(canonical),
    }


def select_accepted_uncles(canonical_chain, stale_blocks, cap: int = MAX_UNCLES_PER_BLOCK):
    """Pair stale blocks with canonical blocks, at most ``cap`` uncles each.

    Deterministic: uncles are considered in (generation time, id) order and a
    canonical block may only reference uncles generated before it.
    """
    pending = sorted(
        (b for b in stale_blocks if b.parent is not None),
        key=lambda b: (b.gen_timestamp, b.id),
    )
    accepted = []
    i = 0
    for blk in canonical_chain:
        if blk.parent is None:
            continue
        taken = 0
        while i < len(pending) and taken < cap and pending[i].gen_timestamp < blk.gen_timestamp:
            accepted.append(pending[i])
            i += 1
            taken += 1
    return accepted
