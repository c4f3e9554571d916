"""Arrival-delay collection and report assembly."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["DelayAccumulator", "nearest_rank", "SimulationReport", "summarize"]


def nearest_rank(sorted_values: np.ndarray, percentile: float) -> float:
    """Nearest-rank percentile: the (floor(p/100 * n) + 1)-th smallest value."""
    n = len(sorted_values)
    if n == 0:
        raise ValueError("empty sample")
    idx = min(int(math.floor(percentile / 100.0 * n)), n - 1)
    return float(sorted_values[idx])


class DelayAccumulator:
    """Multiset of (block, receiver) arrival delays."""

    def __init__(self):
        self._chunks = []
        self._count = 0

    def record_arrival(self, block_id: int, node_id: int, delay_s: float) -> None:
        if delay_s < 0:
            raise ValueError("arrival delay must be non-negative")
        self._chunks.append(np.array([delay_s]))
        self._count += 1

    def record_block(self, block_id: int, delays_s: np.ndarray) -> None:
        """Record all receiver delays of one block at once."""
        if len(delays_s) and float(delays_s.min()) < 0:
            raise ValueError("arrival delay must be non-negative")
        self._chunks.append(np.asarray(delays_s, dtype=float))
        self._count += len(delays_s)

    def __len__(self) -> int:
        return self._count

    def all_delays(self) -> np.ndarray:
        if not self._chunks:
            return np.empty(0)
        return np.concatenate(self._chunks)

    def percentiles(self, ps) -> list:
        vals = np.sort(self.all_delays())
        return [nearest_rank(vals, p) for p in ps]


@dataclass
class SimulationReport:
    """Machine-readable run summary.

    Delay percentiles and rate/size metrics are None when the run produced no
    blocks.  ``runtime_s`` and ``peak_memory_mb`` are environment-dependent
    and excluded from determinism comparisons.
    """

    bpd_p50_s: float | None
    bpd_p90_s: float | None
    avg_block_size_mb: float | None
    stale_uncle_rate: float | None
    total_blocks: int
    canonical_length: int
    rewards: list
    runtime_s: float
    peak_memory_mb: float | None = None

    def to_dict(self) -> dict:
        return {
            "bpd_p50_s": self.bpd_p50_s,
            "bpd_p90_s": self.bpd_p90_s,
            "avg_block_size_mb": self.avg_block_size_mb,
            "stale_uncle_rate": self.stale_uncle_rate,
            "total_blocks": self.total_blocks,
            "canonical_length": self.canonical_length,
            "rewards": self.rewards,
            "runtime_s": self.runtime_s,
            "peak_memory_mb": self.peak_memory_mb,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def deterministic_payload(self) -> str:
        """Serialized report minus wall-clock fields, for determinism checks."""
        d = self.to_dict()
        d.pop("runtime_s")
        d.pop("peak_memory_mb")
        return json.dumps(d, indent=2, sort_keys=True)

    def summary_text(self) -> str:
        def fmt(v, unit=""):
            return "n/a" if v is None else f"{v:.6g}{unit}"

        lines = [
            "simulation summary",
            f"  blocks generated     {self.total_blocks}",
            f"  canonical length     {self.canonical_length}",
            f"  stale/uncle rate     {fmt(None if self.stale_uncle_rate is None else 100 * self.stale_uncle_rate, ' %')}",
            f"  avg block size       {fmt(self.avg_block_size_mb, ' MB')}",
            f"  bpd p50              {fmt(self.bpd_p50_s, ' s')}",
            f"  bpd p90              {fmt(self.bpd_p90_s, ' s')}",
            f"  runtime              {self.runtime_s:.2f} s",
        ]
        if self.peak_memory_mb is not None:
            lines.append(f"  peak memory          {self.peak_memory_mb:.1f} MB")
        return "\n".join(lines)


def summarize(
    accumulator: DelayAccumulator,
    ledger_metrics: dict,
    rewards: list,
    runtime_s: float,
    peak_memory_mb: float | None = None,
) -> SimulationReport:
    if len(accumulator):
        p50, p90 = accumulator.percentiles([50, 90])
    else:
        p50 = p90 = None
    return SimulationReport(
        bpd_p50_s=p50,
        bpd_p90_s=p90,
        avg_block_size_mb=ledger_metrics["avg_block_size_mb"],
        stale_uncle_rate=ledger_metrics["stale_rate"],
        total_blocks=ledger_metrics["total_blocks"],
        canonical_length=ledger_metrics["canonical_length"],
        rewards=rewards,
        runtime_s=runtime_s,
        peak_memory_mb=peak_memory_mb,
    )
