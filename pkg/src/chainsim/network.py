"""P2P topology generation and block propagation delay.

The generator interpolates between a ring lattice (beta = 0) and a uniform
random graph (beta = 1) from an average degree ``d`` and a control parameter
``beta``.  Block arrival delays are shortest-path delays (Dijkstra) over
per-edge link delays under one of three models:

* ``cbr``      - compact-block-relay style: D = 3 * L + pd * size
* ``ethwire``  - full block pushed to ~sqrt(M) of M peers (D = L + size * (1/B + pd)),
                 hash announcement to the rest (D = 5 * L + size * (1/B + pd))
* ``fixed``    - one independent exponential delay per (block, receiver),
                 ignoring the topology entirely
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

__all__ = [
    "TopologyParams",
    "RegionProfile",
    "RegionData",
    "DelayModel",
    "Topology",
    "get_probability",
    "generate_network",
    "assign_regions",
    "link_delay",
    "propagate",
    "load_region_data",
    "default_region_data",
]

# Extra fixed protocol waits before the header and body requests in the
# hash-announcement branch.  Off by default: the delay equation as used for
# validation counts latencies only.
ETHWIRE_ANNOUNCE_WAIT_S = 0.4 + 0.1


@dataclass(frozen=True)
class TopologyParams:
    node_count: int
    beta: float
    avg_degree: float

    def __post_init__(self):
        if self.node_count < 2:
            raise ValueError("node_count must be at least 2")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if not 0.0 < self.avg_degree < self.node_count:
            raise ValueError("avg_degree must lie in (0, node_count)")


@dataclass(frozen=True)
class RegionProfile:
    name: str
    node_share: float
    upload_bandwidth_mb_s: float

    def __post_init__(self):
        if not 0.0 <= self.node_share <= 1.0:
            raise ValueError(f"region {self.name}: node_share must lie in [0, 1]")
        if self.upload_bandwidth_mb_s <= 0:
            raise ValueError(f"region {self.name}: bandwidth must be positive")


@dataclass(frozen=True)
class RegionData:
    regions: tuple
    latency_s: np.ndarray  # symmetric region-to-region one-way latency matrix

    def __post_init__(self):
        k = len(self.regions)
        shares = sum(r.node_share for r in self.regions)
        if k == 0:
            raise ValueError("at least one region is required")
        if abs(shares - 1.0) > 1e-9:
            raise ValueError(f"region shares must sum to 1 (got {shares})")
        if self.latency_s.shape != (k, k):
            raise ValueError("latency matrix shape must match region count")
        if np.any(self.latency_s <= 0):
            raise ValueError("all latencies must be positive")


@dataclass(frozen=True)
class DelayModel:
    kind: str  # "cbr" | "ethwire" | "fixed"
    processing_delay_s_per_mb: float = 0.0
    fixed_mean_s: float = 0.0
    announce_waits: bool = False

    def __post_init__(self):
        if self.kind not in ("cbr", "ethwire", "fixed"):
            raise ValueError(f"unknown delay model: {self.kind!r}")
        if self.processing_delay_s_per_mb < 0:
            raise ValueError("processing delay must be non-negative")
        if self.kind == "fixed" and self.fixed_mean_s <= 0:
            raise ValueError("fixed delay mean must be positive")


def load_region_data(path) -> RegionData:
    with open(path) as fh:
        doc = json.load(fh)
    return _region_data_from_dict(doc)


def default_region_data() -> RegionData:
    """Bundled 6-region placeholder profile (not a measured dataset)."""
    raw = resources.files("chainsim.data").joinpath("regions_default.json").read_text()
    return _region_data_from_dict(json.loads(raw))


def _region_data_from_dict(doc: dict) -> RegionData:
    regions = tuple(
        RegionProfile(r["name"], float(r["node_share"]), float(r["upload_bandwidth_mb_s"]))
        for r in doc["regions"]
    )
    latency = np.asarray(doc["latency_s"], dtype=float)
    return RegionData(regions, latency)


class Topology:
    """Undirected connected graph with per-edge latency and per-node region."""

    def __init__(self, n, edges_u, edges_v, edge_latency_s, region_of, upload_bw_mb_s):
        self.n = int(n)
        self.edges_u = np.asarray(edges_u, dtype=np.int64)
        self.edges_v = np.asarray(edges_v, dtype=np.int64)
        self.edge_latency_s = np.asarray(edge_latency_s, dtype=float)
        self.region_of = np.asarray(region_of, dtype=np.int64)
        self.upload_bw_mb_s = np.asarray(upload_bw_mb_s, dtype=float)
        if np.any(self.edges_u == self.edges_v):
            raise ValueError("self-loops are not allowed")
        if np.any(self.edge_latency_s <= 0):
            raise ValueError("edge latencies must be positive")
        self.degrees = np.bincount(
            np.concatenate([self.edges_u, self.edges_v]), minlength=self.n
        )
        self._latency_by_pair = {}
        for u, v, lat in zip(self.edges_u, self.edges_v, self.edge_latency_s):
            self._latency_by_pair[(int(u), int(v))] = float(lat)
            self._latency_by_pair[(int(v), int(u))] = float(lat)
        self._build_directed_csr()

    def _build_directed_csr(self):
        # Both directions of every undirected edge, CSR-sorted by source node.
        src = np.concatenate([self.edges_u, self.edges_v])
        dst = np.concatenate([self.edges_v, self.edges_u])
        lat = np.concatenate([self.edge_latency_s, self.edge_latency_s])
        order = np.argsort(src, kind="stable")
        self._dir_src = src[order]
        self._dir_dst = dst[order].astype(np.int32)
        self._dir_lat = lat[order]
        counts = np.bincount(self._dir_src, minlength=self.n)
        self._indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int32)
        self._src_inv_bw = 1.0 / self.upload_bw_mb_s[self._dir_src]
        src_deg = self.degrees[self._dir_src].astype(float)
        # P(direct push) = sqrt(M) / M for a sender of degree M.
        self._direct_threshold = 1.0 / np.sqrt(src_deg)
        self._graph = csr_matrix(
            (self._dir_lat.copy(), self._dir_dst, self._indptr), shape=(self.n, self.n)
        )

    @property
    def edge_count(self) -> int:
        return len(self.edges_u)

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self._latency_by_pair

    def latency(self, u: int, v: int) -> float:
        return self._latency_by_pair[(u, v)]

    def mean_degree(self) -> float:
        return 2.0 * self.edge_count / self.n

    def adjacency_matrix(self) -> csr_matrix:
        data = np.ones(2 * self.edge_count)
        src = np.concatenate([self.edges_u, self.edges_v])
        dst = np.concatenate([self.edges_v, self.edges_u])
        return csr_matrix((data, (src, dst)), shape=(self.n, self.n))


def get_probability(params: TopologyParams, i: int, j: int) -> float:
    """Connection probability between nodes ``i`` and ``j``.

    With beta = 1 this is constant ``d / (N - 1)`` (uniform random graph);
    with beta = 0 it is 1 inside the ring-lattice neighborhood and 0 outside.
    """
    n, beta, d = params.node_count, params.beta, params.avg_degree
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError("node index out of range")
    dis = abs(i - j)
    edge_density = d / (n - 1)
    max_distance = n // 2
    if edge_density - min(dis, n - dis) / max_distance >= 0:
        p = beta * (edge_density - 1.0) + 1.0
    else:
        p = beta * edge_density
    return min(1.0, max(0.0, p))


def assign_regions(regions, n: int, rng: np.random.Generator) -> np.ndarray:
    """Assign each node independently to a region by node share."""
    if len(regions) == 0:
        raise ValueError("at least one region is required")
    shares = np.array([r.node_share for r in regions], dtype=float)
    shares = shares / shares.sum()
    return rng.choice(len(regions), size=n, p=shares)


def generate_network(
    params: TopologyParams, region_data: RegionData, rng: np.random.Generator
) -> Topology:
    """Sample a topology, assign regions/latencies and repair connectivity.

    Each unordered pair (i, j) gets an edge iff a uniform draw r satisfies
    ``r <= get_probability(i, j)``.  If the result is disconnected, one random
    edge is added between successive components until it is connected; repair
    edges count towards degree metrics like any other edge.
    """
    n, beta, d = params.node_count, params.beta, params.avg_degree
    p0 = d / (n - 1)
    max_distance = n // 2
    p_inner = min(1.0, max(0.0, beta * (p0 - 1.0) + 1.0))
    p_outer = min(1.0, max(0.0, beta * p0))

    us, vs = [], []
    for i in range(n - 1):
        j = np.arange(i + 1, n)
        dis = j - i
        ring_dis = np.minimum(dis, n - dis)
        p = np.where(p0 - ring_dis / max_distance >= 0, p_inner, p_outer)
        r = rng.random(n - 1 - i)
        hit = j[r <= p]
        if len(hit):
            us.append(np.full(len(hit), i, dtype=np.int64))
            vs.append(hit)
    edges_u = np.concatenate(us) if us else np.empty(0, dtype=np.int64)
    edges_v = np.concatenate(vs) if vs else np.empty(0, dtype=np.int64)

    region_of = assign_regions(region_data.regions, n, rng)

    # Connectivity repair: join successive components with one random edge each.
    adj = csr_matrix(
        (
            np.ones(2 * len(edges_u)),
            (np.concatenate([edges_u, edges_v]), np.concatenate([edges_v, edges_u])),
        ),
        shape=(n, n),
    )
    ncomp, labels = connected_components(adj, directed=False)
    if ncomp > 1:
        extra_u, extra_v = [], []
        members = [np.nonzero(labels == c)[0] for c in range(ncomp)]
        for c in range(1, ncomp):
            a = int(rng.choice(members[c - 1]))
            b = int(rng.choice(members[c]))
            extra_u.append(min(a, b))
            extra_v.append(max(a, b))
        edges_u = np.concatenate([edges_u, np.asarray(extra_u, dtype=np.int64)])
        edges_v = np.concatenate([edges_v, np.asarray(extra_v, dtype=np.int64)])

    latency = region_data.latency_s[region_of[edges_u], region_of[edges_v]]
    upload_bw = np.array(
        [region_data.regions[r].upload_bandwidth_mb_s for r in region_of]
    )
    return Topology(n, edges_u, edges_v, latency, region_of, upload_bw)


def link_delay(
    u: int,
    v: int,
    block_size_mb: float,
    model: DelayModel,
    topology: Topology,
    rng: np.random.Generator,
) -> float:
    """Delay for one block transfer over the edge (u, v), u the sender."""
    if block_size_mb < 0:
        raise ValueError("block size must be non-negative")
    if model.kind == "fixed":
        u_ = 1.0 - rng.random()
        return -model.fixed_mean_s * math.log(u_)
    if not topology.has_edge(u, v):
        raise ValueError(f"({u}, {v}) is not an edge")
    lat = topology.latency(u, v)
    pd = model.processing_delay_s_per_mb
    if model.kind == "cbr":
        return 3.0 * lat + pd * block_size_mb
    m = float(topology.degrees[u])
    transfer = block_size_mb * (1.0 / topology.upload_bw_mb_s[u] + pd)
    if rng.random() * m <= math.sqrt(m):
        return lat + transfer
    wait = ETHWIRE_ANNOUNCE_WAIT_S if model.announce_waits else 0.0
    return 5.0 * lat + transfer + wait


def propagate(
    sender: int,
    block_size_mb: float,
    topology: Topology | None,
    model: DelayModel,
    rng: np.random.Generator,
    node_count: int | None = None,
) -> np.ndarray:
    """Arrival delay of one block at every node, from the sender's viewpoint.

    For the topology-aware models, per-edge delays are sampled once per
    (block, edge) and the result is the Dijkstra shortest-path delay over
    them.  Unreachable nodes come back as ``inf`` (cannot happen after
    connectivity repair).  In ``fixed`` mode every receiver gets a single
    independent exponential draw with no multi-hop accumulation.
    """
    # The fixed model ignores the topology, so it only needs a node count.
    n = topology.n if topology is not None else node_count
    if n is None:
        raise ValueError("a topology or an explicit node_count is required")
    if not 0 <= sender < n:
        raise ValueError("sender out of range")
    if model.kind == "fixed":
        u = 1.0 - rng.random(n)
        delays = -model.fixed_mean_s * np.log(u)
        delays[sender] = 0.0
        return delays

    pd = model.processing_delay_s_per_mb
    if model.kind == "cbr":
        data = 3.0 * topology._dir_lat + pd * block_size_mb
    else:
        direct = rng.random(len(topology._dir_lat)) <= topology._direct_threshold
        mult = np.where(direct, 1.0, 5.0)
        data = mult * topology._dir_lat + block_size_mb * (topology._src_inv_bw + pd)
        if model.announce_waits:
            data = data + np.where(direct, 0.0, ETHWIRE_ANNOUNCE_WAIT_S)
    graph = topology._graph
    graph.data[:] = data
    return dijkstra(graph, directed=True, indices=sender)
