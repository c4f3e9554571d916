"""Transaction pool and bitset tests, including a randomized set oracle."""

import numpy as np
import pytest

from chainsim.txpool import GlobalPool, TxBitset, dist_mean, pregenerate, sample_dist


def make_pool(timestamps, sizes=None, fees=None):
    m = len(timestamps)
    if sizes is None:
        sizes = [0.001] * m
    if fees is None:
        fees = [0.0001] * m
    return GlobalPool(np.array(timestamps), np.array(sizes), np.array(fees))


class TestGlobalPool:
    def test_rejects_unsorted_timestamps(self):
        with pytest.raises(ValueError):
            make_pool([0.0, 2.0, 1.0])

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            GlobalPool(np.array([0.0]), np.array([0.1, 0.2]), np.array([0.0]))

    def test_high_at(self):
        pool = make_pool([1.0, 2.0, 2.0, 5.0])
        assert pool.high_at(0.5) == -1
        assert pool.high_at(1.0) == 0
        assert pool.high_at(2.0) == 2
        assert pool.high_at(4.9) == 2
        assert pool.high_at(100.0) == 3

    def test_min_size(self):
        pool = make_pool([0.0, 1.0], sizes=[0.005, 0.002])
        assert pool.min_size_mb == 0.002


class TestPregenerate:
    def test_poisson_count_and_bounds(self):
        rng = np.random.default_rng(3)
        pool = pregenerate(10.0, 1000.0, {"kind": "fixed", "value": 0.001},
                           {"kind": "fixed", "value": 0.0001}, rng)
        # Count ~ Poisson(10000); allow 5 sigma.
        assert abs(pool.count - 10000) < 5 * np.sqrt(10000)
        assert pool.timestamps[0] > 0
        assert pool.timestamps[-1] <= 1000.0
        assert np.all(np.diff(pool.timestamps) >= 0)

    def test_interarrival_mean(self):
        rng = np.random.default_rng(4)
        pool = pregenerate(50.0, 2000.0, {"kind": "fixed", "value": 0.001},
                           {"kind": "fixed", "value": 0.0}, rng)
        gaps = np.diff(pool.timestamps)
        assert np.mean(gaps) == pytest.approx(1.0 / 50.0, rel=0.05)

    def test_zero_rate_rejected(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            pregenerate(0.0, 10.0, {"kind": "fixed", "value": 1.0},
                        {"kind": "fixed", "value": 0.0}, rng)


class TestDistributions:
    def test_fixed(self):
        rng = np.random.default_rng(0)
        vals = sample_dist({"kind": "fixed", "value": 0.25}, 10, rng)
        assert np.all(vals == 0.25)
        assert dist_mean({"kind": "fixed", "value": 0.25}) == 0.25

    def test_exponential_mean(self):
        rng = np.random.default_rng(1)
        vals = sample_dist({"kind": "exponential", "mean": 2.0}, 200000, rng)
        assert np.all(vals > 0)
        assert np.mean(vals) == pytest.approx(2.0, rel=0.02)
        assert dist_mean({"kind": "exponential", "mean": 2.0}) == 2.0

    def test_uniform_bounds(self):
        rng = np.random.default_rng(2)
        vals = sample_dist({"kind": "uniform", "low": 1.0, "high": 3.0}, 50000, rng)
        assert vals.min() >= 1.0 and vals.max() <= 3.0
        assert np.mean(vals) == pytest.approx(2.0, rel=0.02)
        assert dist_mean({"kind": "uniform", "low": 1.0, "high": 3.0}) == 2.0

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            sample_dist({"kind": "pareto"}, 1, np.random.default_rng(0))
        with pytest.raises(ValueError):
            dist_mean({"kind": "pareto"})


class TestTxBitsetBasics:
    def test_all_ones_window_empty(self):
        tb = TxBitset.all_ones(8)
        assert tb.bits == 0xFF
        assert tb.low == -1 and tb.high == -1
        assert not tb.contains(3)  # set bit, but outside the window
        assert tb.is_empty()

    def test_from_indices_roundtrip(self):
        tb = TxBitset.from_indices(32, [3, 7, 20])
        assert tb.low == 3 and tb.high == 20
        assert tb.as_set() == {3, 7, 20}
        assert tb.contains(7) and not tb.contains(4)

    def test_from_indices_empty(self):
        tb = TxBitset.from_indices(16, [])
        assert tb.is_empty()
        assert len(tb.member_indices()) == 0

    def test_membership_requires_bit_and_window(self):
        tb = TxBitset(length=16, bits=0b1010_0110, low=2, high=5)
        # bits set at 1, 2, 5, 7; window [2, 5]
        assert tb.as_set() == {2, 5}
        assert not tb.contains(1)
        assert not tb.contains(7)

    def test_totals(self):
        pool = make_pool([0.0, 1.0, 2.0], sizes=[0.1, 0.2, 0.4], fees=[1.0, 2.0, 4.0])
        tb = TxBitset.from_indices(3, [0, 2])
        assert tb.total_size_mb(pool) == pytest.approx(0.5)
        assert tb.total_fees(pool) == pytest.approx(5.0)


class TestAdvanceWindow:
    def test_opens_and_extends(self):
        pool = make_pool([1.0, 2.0, 3.0, 4.0])
        tb = TxBitset.all_ones(4)
        tb.advance_window(0.5, pool)
        assert tb.is_empty()  # nothing generated yet
        tb.advance_window(2.5, pool)
        assert (tb.low, tb.high) == (0, 1)
        tb.advance_window(10.0, pool)
        assert (tb.low, tb.high) == (0, 3)

    def test_never_moves_backwards(self):
        pool = make_pool([1.0, 2.0])
        tb = TxBitset.all_ones(2)
        tb.advance_window(5.0, pool)
        tb.advance_window(1.0, pool)
        assert (tb.low, tb.high) == (0, 1)

    def test_skips_cleared_prefix(self):
        pool = make_pool([1.0, 2.0, 3.0])
        tb = TxBitset.all_ones(3)
        tb.bits &= ~0b011  # transactions 0 and 1 already mined elsewhere
        tb.advance_window(10.0, pool)
        assert (tb.low, tb.high) == (2, 2)


class TestSelectTransactions:
    def test_greedy_earliest_first(self):
        pool = make_pool([0.0, 1.0, 2.0, 3.0], sizes=[0.4, 0.4, 0.4, 0.4])
        tb = TxBitset.all_ones(4)
        tb.advance_window(10.0, pool)
        chosen = tb.select_transactions(1.0, pool)
        assert chosen.as_set() == {0, 1}

    def test_skips_oversized_and_fills_with_later(self):
        pool = make_pool([0.0, 1.0, 2.0], sizes=[0.6, 0.9, 0.3])
        tb = TxBitset.all_ones(3)
        tb.advance_window(10.0, pool)
        chosen = tb.select_transactions(1.0, pool)
        # 0.6 fits, 0.9 does not (0.6 + 0.9 > 1), 0.3 still fits.
        assert chosen.as_set() == {0, 2}

    def test_selection_leaves_mempool_untouched(self):
        pool = make_pool([0.0, 1.0], sizes=[0.1, 0.1])
        tb = TxBitset.all_ones(2)
        tb.advance_window(10.0, pool)
        tb.select_transactions(1.0, pool)
        assert tb.as_set() == {0, 1}

    def test_empty_mempool(self):
        pool = make_pool([5.0])
        tb = TxBitset.all_ones(1)
        tb.advance_window(1.0, pool)
        assert tb.select_transactions(1.0, pool).is_empty()

    def test_respects_cap_exactly(self):
        pool = make_pool([0.0, 1.0], sizes=[0.5, 0.5])
        tb = TxBitset.all_ones(2)
        tb.advance_window(10.0, pool)
        chosen = tb.select_transactions(1.0, pool)
        assert chosen.total_size_mb(pool) == pytest.approx(1.0)


class TestRemoveRelease:
    def test_remove_included(self):
        pool = make_pool([0.0, 1.0, 2.0])
        tb = TxBitset.all_ones(3)
        tb.advance_window(10.0, pool)
        blk = TxBitset.from_indices(3, [0, 2])
        tb.remove_included(blk)
        assert tb.as_set() == {1}
        assert tb.low == 1

    def test_remove_all_collapses_window(self):
        pool = make_pool([0.0, 1.0])
        tb = TxBitset.all_ones(2)
        tb.advance_window(10.0, pool)
        tb.remove_included(TxBitset.from_indices(2, [0, 1]))
        assert tb.is_empty()

    def test_release_restores(self):
        pool = make_pool([0.0, 1.0, 2.0])
        tb = TxBitset.all_ones(3)
        tb.advance_window(10.0, pool)
        blk = TxBitset.from_indices(3, [1])
        tb.remove_included(blk)
        tb.release_transactions(blk)
        assert tb.as_set() == {0, 1, 2}

    def test_release_into_empty(self):
        tb = TxBitset.empty(8)
        blk = TxBitset.from_indices(8, [2, 5])
        tb.release_transactions(blk)
        assert tb.as_set() == {2, 5}

    def test_length_mismatch_rejected(self):
        tb = TxBitset.all_ones(4)
        with pytest.raises(ValueError):
            tb.remove_included(TxBitset.empty(5))
        with pytest.raises(ValueError):
            tb.release_transactions(TxBitset.empty(5))


def test_randomized_against_set_oracle():
    """Drive a bitset and a plain Python set through the same operations."""
    rng = np.random.default_rng(99)
    m = 400
    timestamps = np.sort(rng.uniform(0, 100, m))
    sizes = rng.uniform(0.001, 0.01, m)
    pool = GlobalPool(timestamps, sizes, np.zeros(m))

    tb = TxBitset.all_ones(m)
    oracle = set()          # visible members
    future = set(range(m))  # generated later than the current clock
    clock = 0.0

    for _ in range(300):
        op = rng.integers(0, 3)
        if op == 0:
            clock += float(rng.uniform(0, 5))
            tb.advance_window(clock, pool)
            newly = {k for k in future if timestamps[k] <= clock}
            oracle |= newly
            future -= newly
        elif op == 1:
            take = {k for k in oracle if rng.random() < 0.3}
            blk = TxBitset.from_indices(m, sorted(take))
            tb.remove_included(blk)
            oracle -= take
        else:
            back = {k for k in range(m) if k not in oracle and k not in future
                    and rng.random() < 0.2}
            blk = TxBitset.from_indices(m, sorted(back))
            tb.release_transactions(blk)
            oracle |= back
        assert tb.as_set() == oracle
