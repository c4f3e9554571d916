"""Discrete-event simulation core.

One global clock, a timestamp-ordered event pool and two event kinds:
GENERATE_BLOCK (a miner's pre-drawn proposal fires: assemble a block from the
mempool, broadcast it, draw the miner's next proposal) and RECEIVE_BLOCK (a
node runs fork choice on an arriving block and fixes up its mempool).  Equal
timestamps dispatch in FIFO insertion order, so a run is fully deterministic
for a given (config, seed) pair.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import consensus, ledger, network
from .config import ConfigError, SimulationConfig
from .incentive import RewardScheme, distribute_rewards
from .ledger import Block, NodeChainState
from .metrics import DelayAccumulator, SimulationReport, summarize
from .txpool import TxBitset, pregenerate, sample_dist

__all__ = [
    "EventKind",
    "Event",
    "EventPool",
    "Clock",
    "Simulation",
    "SimulationInvariantError",
    "run",
]


class SimulationInvariantError(RuntimeError):
    """An internal invariant was violated (logic bug, not user error)."""


class EventKind(IntEnum):
    GENERATE_BLOCK = 0
    RECEIVE_BLOCK = 1


@dataclass(slots=True)
class Event:
    timestamp: float
    kind: EventKind
    node_id: int
    block: Block | None = None
    version: int = 0

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError("event timestamp must be non-negative")
        if self.kind == EventKind.RECEIVE_BLOCK and self.block is None:
            raise ValueError("a RECEIVE_BLOCK event must carry a block")


class Clock:
    """Monotonically advancing simulation clock bounded by the run length."""

    def __init__(self, sim_time_s: float):
        self.now = 0.0
        self.sim_time_s = sim_time_s

    def advance(self, t: float) -> None:
        if t < self.now:
            raise SimulationInvariantError(f"clock moved backwards: {self.now} -> {t}")
        if t > self.sim_time_s:
            raise SimulationInvariantError("dispatched past the simulation horizon")
        self.now = t


class EventPool:
    """Min-ordered event queue keyed by timestamp, FIFO among equal stamps."""

    def __init__(self, clock: Clock):
        self._clock = clock
        self._heap: list = []
        self._seq = 0

    def schedule(self, event: Event) -> None:
        if event.timestamp < self._clock.now:
            raise SimulationInvariantError(
                f"event scheduled in the past: {event.timestamp} < {self._clock.now}"
            )
        heapq.heappush(self._heap, (event.timestamp, self._seq, event))
        self._seq += 1

    def peek_timestamp(self) -> float | None:
        return self._heap[0][0] if self._heap else None

    def pop(self) -> Event | None:
        if not self._heap:
            return None
        return heapq.heappop(self._heap)[2]

    def __len__(self) -> int:
        return len(self._heap)


def _sample_weights(spec: dict, count: int, rng: np.random.Generator) -> np.ndarray:
    kind = spec.get("kind", "equal")
    if kind == "equal":
        return np.ones(count)
    if kind == "exponential":
        return sample_dist({"kind": "exponential", "mean": spec.get("mean", 1.0)}, count, rng)
    if kind == "explicit":
        values = np.asarray(spec["values"], dtype=float)
        if len(values) != count:
            raise ConfigError("hash_power_dist", f"expected {count} values, got {len(values)}")
        if np.any(values < 0):
            raise ConfigError("hash_power_dist", "weights must be non-negative")
        return values
    raise ConfigError("hash_power_dist", f"unknown kind {kind!r}")


class Simulation:
    """One seeded simulation run.

    After :meth:`run` the instance keeps its topology, block set, canonical
    chain and transaction pool around for trace exports and inspection.
    """

    def __init__(self, config: SimulationConfig, region_data: network.RegionData | None = None):
        self.config = config.validate()
        self._region_data = region_data

        ss = np.random.SeedSequence(config.seed)
        topo_ss, cons_ss, wire_ss, tx_ss = ss.spawn(4)
        self.topo_rng = np.random.default_rng(topo_ss)
        self.cons_rng = np.random.default_rng(cons_ss)
        self.wire_rng = np.random.default_rng(wire_ss)
        self.tx_rng = np.random.default_rng(tx_ss)

        self.topology: network.Topology | None = None
        self.blocks: list[Block] = []
        self.canonical: list[Block] = []
        self.pool = None
        self.report: SimulationReport | None = None

    # -- setup ------------------------------------------------------------

    def _setup(self):
        cfg = self.config
        n = cfg.nodes

        if cfg.propagation in ("cbr", "ethwire"):
            regions = self._region_data
            if regions is None:
                if cfg.region_data_path is not None:
                    regions = network.load_region_data(cfg.region_data_path)
                else:
                    regions = network.default_region_data()
            params = network.TopologyParams(n, cfg.beta, cfg.avg_degree)
            self.topology = network.generate_network(params, regions, self.topo_rng)

        self.delay_model = network.DelayModel(
            kind=cfg.propagation,
            processing_delay_s_per_mb=cfg.processing_delay_s_per_mb,
            fixed_mean_s=cfg.fixed_delay_mean_s if cfg.propagation == "fixed" else 0.0,
            announce_waits=cfg.ethwire_protocol_waits,
        )

        self.pool = pregenerate(
            cfg.effective_tx_rate_per_s(),
            cfg.sim_time_s,
            cfg.tx_size_dist,
            cfg.tx_fee_dist,
            self.tx_rng,
        )
        m = self.pool.count

        self.genesis = Block.genesis(m)
        self.blocks = [self.genesis]
        self.states = [NodeChainState(tip=self.genesis) for _ in range(n)]
        # A node's mempool bits are the complement of the union of its chain's
        # block bitsets (bits start all-ones; only chain removes/releases touch
        # them), so the mempool is materialized lazily from the tip at mining
        # time instead of being updated on every receive.
        self._all_tx_mask = (1 << m) - 1 if m else 0

        self.params = consensus.ConsensusParams(cfg.consensus, cfg.block_interval_s)
        miners = cfg.effective_miners()
        weights = _sample_weights(
            cfg.hash_power_dist if cfg.consensus == "pow" else cfg.stake_dist,
            miners,
            self.cons_rng,
        )
        self.hash_powers = np.zeros(n)
        self.stakes = np.zeros(n)
        if cfg.consensus == "pow":
            self.hash_powers[:miners] = weights
        else:
            self.stakes[:miners] = weights
        self.total_hash = float(self.hash_powers.sum())
        self.stake_acquired_at = np.zeros(n)

        self.max_block_mb = cfg.effective_max_block_size_mb()
        self.clock = Clock(cfg.sim_time_s)
        self.events = EventPool(self.clock)
        self.acc = DelayAccumulator()
        self.receive_fanout: dict[int, int] = {}
        # Pending-proposal version per node; bumping it invalidates any
        # already-scheduled GENERATE_BLOCK event for that node (lazy deletion).
        self._gen_version = [0] * n

        for miner in range(n):
            self._schedule_next_generation(miner, 0.0)

    # -- proposal scheduling ----------------------------------------------

    def _schedule_next_generation(self, miner: int, now: float) -> None:
        cfg = self.config
        if cfg.consensus == "pow":
            if self.total_hash <= 0:
                return
            weight = consensus.MinerWeight(hash_power=float(self.hash_powers[miner]))
            ts = consensus.pow_next_generation(
                weight, self.total_hash, self.params, now, self.cons_rng
            )
        else:
            stake = float(self.stakes[miner])
            if stake == 0.0:
                return
            eval_at = now
            if eval_at - self.stake_acquired_at[miner] <= 0:
                # Coin age is zero right after a reset (and at t=0); defer one
                # interval so the age has regrown before the rate is frozen.
                eval_at = now + cfg.effective_stake_age_init_s()
            ages = np.clip(eval_at - self.stake_acquired_at, 0.0, None)
            aggregate = float(self.stakes @ ages)
            if aggregate <= 0:
                return
            weight = consensus.MinerWeight(
                stake=stake, stake_acquired_at=float(self.stake_acquired_at[miner])
            )
            ts = consensus.pos_next_generation(
                weight, aggregate, self.params, eval_at, self.cons_rng
            )
        if ts is not None:
            self.events.schedule(
                Event(ts, EventKind.GENERATE_BLOCK, miner,
                      version=self._gen_version[miner])
            )

    # -- event processing --------------------------------------------------

    def _mempool_of(self, state: NodeChainState) -> TxBitset:
        mempool = TxBitset(
            length=self.pool.count,
            bits=self._all_tx_mask & ~state.tip.cum_txs,
        )
        mempool.advance_window(self.clock.now, self.pool)
        return mempool

    def _process_generate(self, ev: Event) -> None:
        miner = ev.node_id
        t = ev.timestamp
        state = self.states[miner]

        mempool = self._mempool_of(state)
        tb = mempool.select_transactions(self.max_block_mb, self.pool)
        size = tb.total_size_mb(self.pool)

        referenced = state.reference_uncles()
        blk = Block(
            len(self.blocks), state.tip, miner, state.tip.depth + 1, t, size, tb,
            chain_uncles=state.tip.chain_uncles + referenced,
        )
        self.blocks.append(blk)
        state.tip = blk
        state.uncle_count = blk.chain_uncles
        if self.config.consensus == "pos":
            self.stake_acquired_at[miner] = t

        delays = network.propagate(
            miner, size, self.topology, self.delay_model, self.wire_rng,
            node_count=self.config.nodes,
        )
        if not np.all(np.isfinite(delays)):
            raise SimulationInvariantError(f"block {blk.id} cannot reach every node")
        self.acc.record_block(blk.id, np.delete(delays, miner))

        schedule = self.events.schedule
        fanout = 0
        for v in range(self.topology.n if self.topology else self.config.nodes):
            if v == miner:
                continue
            schedule(Event(t + delays[v], EventKind.RECEIVE_BLOCK, v, blk))
            fanout += 1
        self.receive_fanout[blk.id] = fanout

        if self.config.consensus == "pos":
            # The age reset changed every staker's share, so redraw all
            # pending proposals at the updated rates.
            for m in range(self.config.nodes):
                self._gen_version[m] += 1
                self._schedule_next_generation(m, t)
        else:
            self._schedule_next_generation(miner, t)

    def _process_receive(self, ev: Event) -> None:
        # Mempool effects of the chain update (tx remove on entering blocks,
        # release on leaving ones) are implicit: the mempool is derived from
        # the tip's cumulative bitset when the node next mines.
        state = self.states[ev.node_id]
        if self.config.finalization == "ghost":
            ledger.apply_ghost_rule(state, ev.block)
        else:
            ledger.apply_longest_rule(state, ev.block)

    # -- main loop ---------------------------------------------------------

    def run(self) -> SimulationReport:
        start = time.perf_counter()
        self._setup()
        sim_time = self.config.sim_time_s

        while True:
            ts = self.events.peek_timestamp()
            if ts is None or ts > sim_time:
                break  # later events stay in the pool unprocessed
            ev = self.events.pop()
            if (ev.kind == EventKind.GENERATE_BLOCK
                    and ev.version != self._gen_version[ev.node_id]):
                continue  # superseded by a redraw
            self.clock.advance(ev.timestamp)
            if ev.kind == EventKind.GENERATE_BLOCK:
                self._process_generate(ev)
            else:
                self._process_receive(ev)

        self.report = self._finalize(time.perf_counter() - start)
        return self.report

    # -- termination --------------------------------------------------------

    def _best_node(self) -> int:
        if self.config.finalization == "ghost":
            key = lambda i: (-self.states[i].weight, i)
        else:
            key = lambda i: (-self.states[i].tip.depth, i)
        return min(range(len(self.states)), key=key)

    def _finalize(self, runtime_s: float) -> SimulationReport:
        cfg = self.config
        self.canonical = ledger.chain_of(self.states[self._best_node()].tip)
        canonical_ids = {b.id for b in self.canonical}
        stale = [b for b in self.blocks if b.parent is not None and b.id not in canonical_ids]
        self.stale_blocks = stale

        metrics = ledger.chain_metrics(self.blocks, self.canonical)

        scheme_doc = dict(cfg.reward_scheme)
        scheme = RewardScheme(
            kind=scheme_doc["kind"],
            block_reward=float(scheme_doc.get("block_reward", 0.0)),
            uncle_reward_fraction=float(scheme_doc.get("uncle_reward_fraction", 7 / 8)),
            fees_to_miner=bool(scheme_doc.get("fees_to_miner", True)),
        )
        if scheme.kind == "canonical_plus_uncles":
            self.accepted_uncles = ledger.select_accepted_uncles(self.canonical, stale)
        else:
            self.accepted_uncles = []
        rewards = distribute_rewards(self.canonical, self.accepted_uncles, scheme, self.pool)

        peak_mb = None
        try:
            import resource

            peak_mb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0
        except ImportError:
            pass

        return summarize(self.acc, metrics, rewards, runtime_s, peak_mb)


def run(config: SimulationConfig) -> SimulationReport:
    """Execute one simulation and return its report."""
    return Simulation(config).run()
