"""Shared transaction pool and bitset views of it.

All transactions generated during a run live once in a :class:`GlobalPool`,
sorted by generation timestamp.  Each node's mempool and each block's content
is a :class:`TxBitset`: a fixed-length bit sequence plus a ``low``/``high``
window.  Transaction ``k`` is a member iff bit ``k`` is set and
``low <= k <= high``.  Mempools start with every bit set to 1 and an empty
window; moving ``high`` forward makes newly generated transactions visible to
all nodes at once, so per-transaction gossip never has to be simulated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["GlobalPool", "TxBitset", "pregenerate", "sample_dist", "dist_mean"]

_EPS = 1e-12


def sample_dist(spec: dict, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` samples from a distribution spec dict.

    Supported kinds: ``{"kind": "fixed", "value": v}``,
    ``{"kind": "exponential", "mean": m}`` and
    ``{"kind": "uniform", "low": a, "high": b}``.
    """
    kind = spec.get("kind")
    if kind == "fixed":
        return np.full(n, float(spec["value"]))
    if kind == "exponential":
        # Inverse CDF on (0, 1] for cross-platform reproducibility.
        u = 1.0 - rng.random(n)
        return -float(spec["mean"]) * np.log(u)
    if kind == "uniform":
        return rng.uniform(float(spec["low"]), float(spec["high"]), n)
    raise ValueError(f"unknown distribution kind: {kind!r}")


def dist_mean(spec: dict) -> float:
    kind = spec.get("kind")
    if kind == "fixed":
        return float(spec["value"])
    if kind == "exponential":
        return float(spec["mean"])
    if kind == "uniform":
        return (float(spec["low"]) + float(spec["high"])) / 2.0
    raise ValueError(f"unknown distribution kind: {kind!r}")


class GlobalPool:
    """Immutable, timestamp-sorted list of every transaction in a run."""

    __slots__ = ("timestamps", "sizes_mb", "fees", "_min_size")

    def __init__(self, timestamps: np.ndarray, sizes_mb: np.ndarray, fees: np.ndarray):
        timestamps = np.asarray(timestamps, dtype=float)
        sizes_mb = np.asarray(sizes_mb, dtype=float)
        fees = np.asarray(fees, dtype=float)
        if not (len(timestamps) == len(sizes_mb) == len(fees)):
            raise ValueError("timestamps, sizes and fees must have equal length")
        if len(timestamps) > 1 and np.any(np.diff(timestamps) < 0):
            raise ValueError("transaction timestamps must be non-decreasing")
        self.timestamps = timestamps
        self.sizes_mb = sizes_mb
        self.fees = fees
        self._min_size = float(sizes_mb.min()) if len(sizes_mb) else 0.0

    @property
    def count(self) -> int:
        return len(self.timestamps)

    @property
    def min_size_mb(self) -> float:
        return self._min_size

    def high_at(self, clock: float) -> int:
        """Index of the last transaction generated at or before ``clock`` (-1 if none)."""
        return int(np.searchsorted(self.timestamps, clock, side="right")) - 1


def pregenerate(
    rate_per_s: float,
    sim_time_s: float,
    size_dist: dict,
    fee_dist: dict,
    rng: np.random.Generator,
) -> GlobalPool:
    """Pre-generate the whole run's transactions as a Poisson arrival process.

    Arrivals have exponential inter-arrival times with mean ``1/rate`` on
    ``[0, sim_time_s]``.  Fixing the count up front is what allows fixed-length
    bitsets everywhere else.
    """
    if rate_per_s <= 0:
        raise ValueError("transaction rate must be positive")
    if sim_time_s < 0:
        raise ValueError("sim_time_s must be non-negative")

    times = []
    t = 0.0
    chunk = max(1024, int(rate_per_s * sim_time_s * 1.1))
    while t <= sim_time_s:
        u = 1.0 - rng.random(chunk)
        gaps = -np.log(u) / rate_per_s
        arr = t + np.cumsum(gaps)
        times.append(arr)
        t = arr[-1]
    timestamps = np.concatenate(times)
    timestamps = timestamps[timestamps <= sim_time_s]
    m = len(timestamps)
    sizes = sample_dist(size_dist, m, rng)
    fees = sample_dist(fee_dist, m, rng)
    return GlobalPool(timestamps, sizes, fees)


@dataclass
class TxBitset:
    """Fixed-length bit sequence with a ``low``/``high`` availability window.

    ``bits`` is a Python int used as a bit vector (bit k = transaction k);
    bitwise AND/OR/AND-NOT on it run at C speed regardless of length.
    ``low == high == -1`` denotes an empty window.
    """

    length: int
    bits: int = 0
    low: int = -1
    high: int = -1

    @classmethod
    def all_ones(cls, length: int) -> "TxBitset":
        return cls(length, (1 << length) - 1 if length else 0, -1, -1)

    @classmethod
    def empty(cls, length: int) -> "TxBitset":
        return cls(length, 0, -1, -1)

    @classmethod
    def from_indices(cls, length: int, indices) -> "TxBitset":
        tb = cls.empty(length)
        indices = np.asarray(indices, dtype=np.int64)
        if len(indices) == 0:
            return tb
        hi = int(indices.max())
        flags = np.zeros(hi + 1, dtype=np.uint8)
        flags[indices] = 1
        packed = np.packbits(flags, bitorder="little")
        tb.bits = int.from_bytes(packed.tobytes(), "little")
        tb.low = int(indices.min())
        tb.high = hi
        return tb

    # -- queries ---------------------------------------------------------

    def contains(self, k: int) -> bool:
        return self.low <= k <= self.high and (self.bits >> k) & 1 == 1

    def member_indices(self) -> np.ndarray:
        """Indices of all member transactions, ascending."""
        if self.low < 0:
            return np.empty(0, dtype=np.int64)
        nbytes = self.high // 8 + 1
        total = max(nbytes, (self.bits.bit_length() + 7) // 8)
        raw = self.bits.to_bytes(total, "little")[:nbytes]
        flags = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")
        idx = np.nonzero(flags[: self.high + 1])[0]
        return idx[idx >= self.low].astype(np.int64)

    def as_set(self) -> set:
        return set(int(i) for i in self.member_indices())

    def is_empty(self) -> bool:
        return self.low < 0

    def total_size_mb(self, pool: GlobalPool) -> float:
        idx = self.member_indices()
        return float(pool.sizes_mb[idx].sum()) if len(idx) else 0.0

    def total_fees(self, pool: GlobalPool) -> float:
        idx = self.member_indices()
        return float(pool.fees[idx].sum()) if len(idx) else 0.0

    # -- window maintenance ----------------------------------------------

    def _lowest_set_at_or_above(self, start: int) -> int:
        """Index of lowest set bit >= start, or -1 if none."""
        x = self.bits >> start
        if x == 0:
            return -1
        return start + ((x & -x).bit_length() - 1)

    def _trim_low(self) -> None:
        # Advance low past any all-zero prefix; collapse to (-1, -1) when no
        # member remains inside the window.
        if self.low < 0:
            return
        idx = self._lowest_set_at_or_above(self.low)
        if idx < 0 or idx > self.high:
            self.low = -1
            self.high = -1
        else:
            self.low = idx

    # -- operations -------------------------------------------------------

    def advance_window(self, clock: float, pool: GlobalPool) -> None:
        """Extend ``high`` to the last transaction generated by ``clock``.

        All mempool bits start at 1, so advancing the window is how newly
        generated transactions become visible to every node simultaneously.
        """
        new_high = pool.high_at(clock)
        if new_high <= self.high:
            return
        start = self.low if self.low >= 0 else 0
        idx = self._lowest_set_at_or_above(start)
        if idx < 0 or idx > new_high:
            self.low = -1
            self.high = -1
        else:
            self.low = idx
            self.high = new_high

    def select_transactions(self, max_block_size_mb: float, pool: GlobalPool) -> "TxBitset":
        """Greedy earliest-first content selection under a size cap.

        Scans members in index order and takes every transaction that still
        fits; stops early once the residual capacity is below the smallest
        transaction size in the pool.
        """
        members = self.member_indices()
        if len(members) == 0:
            return TxBitset.empty(self.length)
        sizes = pool.sizes_mb[members]
        cum = np.cumsum(sizes)
        cap = max_block_size_mb + _EPS
        k = int(np.searchsorted(cum, cap, side="right"))
        total = float(cum[k - 1]) if k else 0.0
        chosen = list(members[:k])
        min_size = pool.min_size_mb
        for i in members[k:]:
            if max_block_size_mb - total < min_size - _EPS:
                break
            s = float(pool.sizes_mb[i])
            if total + s <= cap:
                total += s
                chosen.append(int(i))
        return TxBitset.from_indices(self.length, chosen)

    def remove_included(self, block_txs: "TxBitset") -> None:
        """Clear every transaction the block includes (bitwise AND NOT)."""
        if block_txs.length != self.length:
            raise ValueError("bitset length mismatch")
        self.bits &= ~block_txs.bits
        self._trim_low()

    def release_transactions(self, block_txs: "TxBitset") -> None:
        """Return a stale block's transactions to the mempool (bitwise OR)."""
        if block_txs.length != self.length:
            raise ValueError("bitset length mismatch")
        self.bits |= block_txs.bits
        if block_txs.low >= 0:
            if self.low < 0:
                self.low, self.high = block_txs.low, block_txs.high
            else:
                self.low = min(self.low, block_txs.low)
                self.high = max(self.high, block_txs.high)
