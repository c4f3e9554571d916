"""Proposal-timing tests for the PoW and PoS schedulers."""

import numpy as np
import pytest

from chainsim.consensus import (
    ConsensusParams,
    MinerWeight,
    pos_next_generation,
    pos_weight,
    pow_next_generation,
    reset_stake_age,
    sample_exponential,
)


def test_params_validation():
    with pytest.raises(ValueError):
        ConsensusParams("dpos", 10.0)
    with pytest.raises(ValueError):
        ConsensusParams("pow", 0.0)


def test_weight_validation():
    with pytest.raises(ValueError):
        MinerWeight(hash_power=-1.0)
    with pytest.raises(ValueError):
        MinerWeight(stake=-0.5)


def test_exponential_mean_and_positivity():
    rng = np.random.default_rng(11)
    samples = np.array([sample_exponential(0.5, rng) for _ in range(100000)])
    assert np.all(samples > 0)
    assert samples.mean() == pytest.approx(2.0, rel=0.02)


def test_exponential_rejects_bad_rate():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        sample_exponential(0.0, rng)


class TestPow:
    def test_mean_interval_matches_share(self):
        # A miner with 25% of the hash power should average 4 block intervals.
        rng = np.random.default_rng(5)
        params = ConsensusParams("pow", 600.0)
        w = MinerWeight(hash_power=1.0)
        gaps = np.array([
            pow_next_generation(w, 4.0, params, 0.0, rng) for _ in range(50000)
        ])
        assert gaps.mean() == pytest.approx(2400.0, rel=0.02)

    def test_offsets_from_now(self):
        rng = np.random.default_rng(6)
        params = ConsensusParams("pow", 10.0)
        w = MinerWeight(hash_power=1.0)
        t = pow_next_generation(w, 1.0, params, 500.0, rng)
        assert t > 500.0

    def test_zero_share_yields_no_proposal(self):
        rng = np.random.default_rng(7)
        params = ConsensusParams("pow", 10.0)
        assert pow_next_generation(MinerWeight(), 1.0, params, 0.0, rng) is None

    def test_invalid_totals(self):
        rng = np.random.default_rng(8)
        params = ConsensusParams("pow", 10.0)
        with pytest.raises(ValueError):
            pow_next_generation(MinerWeight(hash_power=1.0), 0.0, params, 0.0, rng)
        with pytest.raises(ValueError):
            pow_next_generation(MinerWeight(hash_power=2.0), 1.0, params, 0.0, rng)

    def test_first_proposer_shares(self):
        # Monte Carlo: the probability of proposing first equals the hash share.
        rng = np.random.default_rng(9)
        params = ConsensusParams("pow", 100.0)
        powers = [1.0, 2.0, 7.0]
        total = sum(powers)
        wins = np.zeros(3)
        for _ in range(20000):
            times = [
                pow_next_generation(MinerWeight(hash_power=h), total, params, 0.0, rng)
                for h in powers
            ]
            wins[int(np.argmin(times))] += 1
        shares = wins / wins.sum()
        for k, h in enumerate(powers):
            assert shares[k] == pytest.approx(h / total, abs=0.015)

    def test_rate_scale_invariance(self):
        # Doubling every hash power must not change the timing distribution.
        params = ConsensusParams("pow", 60.0)
        a = np.random.default_rng(42)
        b = np.random.default_rng(42)
        for _ in range(50):
            t1 = pow_next_generation(MinerWeight(hash_power=3.0), 12.0, params, 0.0, a)
            t2 = pow_next_generation(MinerWeight(hash_power=6.0), 24.0, params, 0.0, b)
            assert t1 == pytest.approx(t2)


class TestPos:
    def test_age_growth(self):
        w = MinerWeight(stake=5.0, stake_acquired_at=100.0)
        assert w.age(50.0) == 0.0
        assert w.age(160.0) == 60.0
        assert pos_weight(w, 160.0) == pytest.approx(300.0)

    def test_zero_age_yields_no_proposal(self):
        rng = np.random.default_rng(10)
        params = ConsensusParams("pos", 10.0)
        w = MinerWeight(stake=5.0, stake_acquired_at=50.0)
        assert pos_next_generation(w, 100.0, params, 50.0, rng) is None

    def test_invalid_aggregate(self):
        rng = np.random.default_rng(10)
        params = ConsensusParams("pos", 10.0)
        w = MinerWeight(stake=5.0)
        with pytest.raises(ValueError):
            pos_next_generation(w, 0.0, params, 10.0, rng)

    def test_mean_interval_matches_stake_age_share(self):
        rng = np.random.default_rng(12)
        params = ConsensusParams("pos", 20.0)
        w = MinerWeight(stake=2.0, stake_acquired_at=0.0)
        now = 50.0
        aggregate = 400.0  # own weight 100 -> share 0.25 -> mean 80 s
        gaps = np.array([
            pos_next_generation(w, aggregate, params, now, rng) - now
            for _ in range(50000)
        ])
        assert gaps.mean() == pytest.approx(80.0, rel=0.02)

    def test_reset_stake_age(self):
        w = MinerWeight(stake=3.0, stake_acquired_at=10.0)
        w2 = reset_stake_age(w, 75.0)
        assert w2.stake == 3.0
        assert w2.stake_acquired_at == 75.0
        assert w2.age(75.0) == 0.0
        assert w.stake_acquired_at == 10.0  # original untouched
        with pytest.raises(ValueError):
            reset_stake_age(w, 5.0)
