"""Per-cycle randomized tree routing with in-network additive aggregation."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import PartitionedNetworkError, RoutingError
from .graph_core import SensorField, WsnGraph
from .kernels import walk_packets

MAX_ROUTING_REDRAWS = 100
# fixed per-packet path-measurement size of the tomography marker
TOMOGRAPHY_OVERHEAD_BYTES = 4


class Scheme(str, enum.Enum):
    CSR = "CSR"
    CDG = "CDG"
    PATH_RECORDING = "PATH_RECORDING"


@dataclass(frozen=True, eq=False)
class RoutingState:
    cycle_id: int
    n: int
    sink_id: int
    alive_edges: tuple
    cost_to_sink: np.ndarray
    parent_candidates: tuple

    def candidate_csr(self):
        counts = np.array([len(c) for c in self.parent_candidates], dtype=np.int64)
        ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(counts, out=ptr[1:])
        idx = np.fromiter(
            (v for c in self.parent_candidates for v in c), dtype=np.int64, count=int(ptr[-1])
        )
        return ptr, idx

    @property
    def sensor_ids(self):
        return [v for v in range(self.n) if v != self.sink_id]


@dataclass(frozen=True, eq=False)
class CollectionCycle:
    cycle_id: int
    sink_id: int
    paths: tuple
    sources: tuple
    measurements: np.ndarray
    field: SensorField

    @property
    def M(self):
        return len(self.paths)

    def hop_counts(self):
        return [len(p) - 1 for p in self.paths]

    def to_dict(self):
        return {
            "cycle_id": self.cycle_id,
            "sink_id": self.sink_id,
            "sources": list(self.sources),
            "paths": [list(p) for p in self.paths],
            "measurements": self.measurements.tolist(),
            "field": self.field.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            cycle_id=int(d["cycle_id"]),
            sink_id=int(d["sink_id"]),
            paths=tuple(tuple(int(v) for v in p) for p in d["paths"]),
            sources=tuple(int(s) for s in d["sources"]),
            measurements=np.asarray(d["measurements"], dtype=np.float64),
            field=SensorField.from_dict(d["field"]),
        )


@dataclass(frozen=True)
class TransmissionReport:
    scheme: Scheme
    transmissions: int
    overhead_bytes: int
    max_hops: int


def build_cycle_routing(graph: WsnGraph, link_failure_prob, rand_pool, seed, cycle_id=0,
                        max_redraws=MAX_ROUTING_REDRAWS) -> RoutingState:
    """Drop links independently, then rank parents by hop distance to the sink.

    Redraw ``k`` uses ``default_rng(seed + k)``.  A node's candidates are its
    alive neighbours with strictly lower cost, ordered by (cost, id) and
    truncated to ``rand_pool``.
    """
    if not 0 <= link_failure_prob < 1:
        raise ValueError("link_failure_prob must lie in [0, 1)")
    if rand_pool < 1:
        raise ValueError("rand_pool must be >= 1")
    n, sink = graph.n, graph.sink_id
    edges = np.asarray(graph.edges, dtype=np.int64).reshape(-1, 2)
    for attempt in range(max_redraws):
        rng = np.random.default_rng(seed + attempt)
        alive_mask = rng.random(len(edges)) >= link_failure_prob
        alive = edges[alive_mask]
        mat = csr_matrix((np.ones(len(alive)), (alive[:, 0], alive[:, 1])), shape=(n, n))
        cost = shortest_path(mat, directed=False, unweighted=True, indices=sink)
        if not np.all(np.isfinite(cost)):
            continue
        nbrs = [[] for _ in range(n)]
        for a, b in alive.tolist():
            nbrs[a].append(b)
            nbrs[b].append(a)
        cands = []
        for v in range(n):
            lower = sorted((w for w in nbrs[v] if cost[w] < cost[v]), key=lambda w: (cost[w], w))
            cands.append(tuple(lower[:rand_pool]))
        cost.setflags(write=False)
        return RoutingState(
            cycle_id=cycle_id,
            n=n,
            sink_id=sink,
            alive_edges=tuple(map(tuple, alive.tolist())),
            cost_to_sink=cost,
            parent_candidates=tuple(cands),
        )
    raise PartitionedNetworkError(max_redraws)


def readings_by_node(field: SensorField, n, sink_id):
    out = np.zeros(n)
    mask = np.ones(n, dtype=bool)
    mask[sink_id] = False
    out[mask] = field.values
    return out


def collect_cycle(routing: RoutingState, field: SensorField, M, seed) -> CollectionCycle:
    """Send ``M`` packets from distinct random sources, aggregating source to sink.

    At every hop the next node is drawn uniformly among the current node's
    parent candidates.  ``y[i]`` is the float sum of readings along path ``i``
    in forwarding order.
    """
    sensors = routing.sensor_ids
    N = len(sensors)
    if field.N != N:
        raise ValueError(f"field has {field.N} readings, network has {N} sensors")
    if M > N:
        raise RoutingError(f"too many sources: M={M} > N={N}")
    if M < 1:
        raise RoutingError("M must be >= 1")
    rng = np.random.default_rng(seed)
    sources = rng.choice(np.asarray(sensors, dtype=np.int64), size=M, replace=False)
    depth = int(np.max(routing.cost_to_sink))
    uniforms = rng.random((M, max(depth, 1)))
    ptr, idx = routing.candidate_csr()
    readings = readings_by_node(field, routing.n, routing.sink_id)
    paths, lengths, y = walk_packets(ptr, idx, routing.sink_id, sources, uniforms, readings)
    y.setflags(write=False)
    return CollectionCycle(
        cycle_id=field.cycle_id,
        sink_id=routing.sink_id,
        paths=tuple(tuple(paths[i, : lengths[i]].tolist()) for i in range(M)),
        sources=tuple(int(s) for s in sources),
        measurements=y,
        field=field,
    )


def transmission_stats(cycle: CollectionCycle, scheme, N) -> TransmissionReport:
    scheme = Scheme(scheme)
    hops = cycle.hop_counts()
    max_hops = max(hops) if hops else 0
    if scheme is Scheme.CDG:
        return TransmissionReport(scheme, N * cycle.M, 0, max_hops)
    transmissions = sum(hops)
    if scheme is Scheme.CSR:
        overhead = TOMOGRAPHY_OVERHEAD_BYTES * cycle.M
    else:
        overhead = sum(path_recording_overhead(j) for j in hops)
    return TransmissionReport(scheme, transmissions, overhead, max_hops)


def path_recording_overhead(hops):
    """Bytes a packet spends recording a ``hops``-hop path (2 per relay)."""
    return 2 * (hops - 1)
