"""Deployment topology, synthetic sensor fields and undirected graph algebra."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DegenerateCovarianceError, DisconnectedTopologyError, GraphError

MAX_TOPOLOGY_ATTEMPTS = 100


def _norm_edge(a, b):
    a, b = int(a), int(b)
    if a == b:
        raise GraphError(f"self-loop at vertex {a}")
    return (a, b) if a < b else (b, a)


def _components(n, edges):
    if n == 0:
        return 0
    if not edges:
        return n
    e = np.asarray(edges, dtype=np.int64)
    mat = csr_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    count, _ = connected_components(mat, directed=False)
    return count


@dataclass(frozen=True, eq=False)
class WsnGraph:
    """Physical connectivity of a deployment: ``n`` nodes, one of them the sink.

    Sensor nodes map to measurement columns in id order with the sink skipped,
    see :meth:`column`.
    """

    n: int
    sink_id: int
    edges: tuple
    coords: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise GraphError("graph needs at least one node")
        if not 0 <= self.sink_id < self.n:
            raise GraphError(f"sink_id {self.sink_id} out of range")
        edges = sorted({_norm_edge(a, b) for a, b in self.edges})
        for a, b in edges:
            if b >= self.n:
                raise GraphError(f"edge ({a}, {b}) references unknown node")
        coords = np.array(self.coords, dtype=np.float64).reshape(self.n, 2)
        coords.setflags(write=False)
        object.__setattr__(self, "edges", tuple(edges))
        object.__setattr__(self, "coords", coords)
        if _components(self.n, edges) != 1:
            raise GraphError("graph is not connected")

    @property
    def N(self):
        return self.n - 1

    @property
    def sensor_ids(self):
        return [v for v in range(self.n) if v != self.sink_id]

    def column(self, node):
        """Measurement-matrix column of a sensor node id."""
        if node == self.sink_id:
            raise GraphError("the sink has no column")
        return node if node < self.sink_id else node - 1

    def node(self, column):
        return column if column < self.sink_id else column + 1

    def neighbors(self):
        adj = [[] for _ in range(self.n)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return [sorted(x) for x in adj]

    def mean_degree(self):
        return 2.0 * len(self.edges) / self.n

    def to_dict(self):
        return {
            "n": self.n,
            "sink_id": self.sink_id,
            "nodes": list(range(self.n)),
            "coords": self.coords.tolist(),
            "edges": [list(e) for e in self.edges],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            n=int(d["n"]),
            sink_id=int(d["sink_id"]),
            edges=tuple(tuple(e) for e in d["edges"]),
            coords=np.asarray(d["coords"], dtype=np.float64),
        )

    def __eq__(self, other):
        if not isinstance(other, WsnGraph):
            return NotImplemented
        return (
            self.n == other.n
            and self.sink_id == other.sink_id
            and self.edges == other.edges
            and np.array_equal(self.coords, other.coords)
        )


@dataclass(frozen=True, eq=False)
class SensorField:
    cycle_id: int
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("sensor field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def N(self):
        return self.values.shape[0]

    def to_dict(self):
        return {"cycle_id": self.cycle_id, "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["cycle_id"]), np.asarray(d["values"], dtype=np.float64))

    def __eq__(self, other):
        if not isinstance(other, SensorField):
            return NotImplemented
        return self.cycle_id == other.cycle_id and np.array_equal(self.values, other.values)


@dataclass(frozen=True)
class UGraph:
    """Simple undirected graph on an explicit vertex set."""

    vertices: tuple
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        verts = tuple(sorted({int(v) for v in self.vertices}))
        vset = set(verts)
        edges = frozenset(_norm_edge(a, b) for a, b in self.edges)
        for a, b in edges:
            if a not in vset or b not in vset:
                raise GraphError(f"edge ({a}, {b}) has an endpoint outside the vertex set")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_edges(cls, vertices: Iterable[int], edges: Iterable[tuple]) -> "UGraph":
        return cls(tuple(vertices), frozenset(edges))

    def adjacency_sets(self):
        adj = {v: set() for v in self.vertices}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def adjacency_matrix(self):
        """Dense boolean adjacency indexed by position in ``vertices``."""
        pos = {v: i for i, v in enumerate(self.vertices)}
        n = len(self.vertices)
        a = np.zeros((n, n), dtype=bool)
        for u, v in self.edges:
            a[pos[u], pos[v]] = a[pos[v], pos[u]] = True
        return a

    def is_connected(self):
        if len(self.vertices) <= 1:
            return True
        pos = {v: i for i, v in enumerate(self.vertices)}
        return _components(len(self.vertices), [(pos[a], pos[b]) for a, b in self.edges]) == 1

    def sorted_edges(self):
        return sorted(self.edges)


@dataclass(frozen=True)
class GraphMatrices:
    adjacency: np.ndarray
    degree: np.ndarray
    laplacian: np.ndarray


# --------------------------------------------------------------------------
# generators


def random_geometric_topology(n, radius, seed, sink_id=None, max_attempts=MAX_TOPOLOGY_ATTEMPTS):
    """Uniform random geometric graph in the unit square.

    Attempt ``k`` (0-based) draws positions from ``default_rng(seed + k)``;
    disconnected draws are rejected.  The sink is the node nearest (0, 0)
    unless ``sink_id`` is given.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not 0.0 < radius <= math.sqrt(2.0):
        raise ValueError("radius must lie in (0, sqrt(2)]")
    r2 = radius * radius
    for attempt in range(max_attempts):
        rng = np.random.default_rng(seed + attempt)
        coords = rng.random((n, 2))
        diff = coords[:, None, :] - coords[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        iu, ju = np.nonzero(np.triu(d2 <= r2, k=1))
        edges = list(zip(iu.tolist(), ju.tolist()))
        if _components(n, edges) != 1:
            continue
        sink = int(np.argmin(np.einsum("ij,ij->i", coords, coords))) if sink_id is None else sink_id
        return WsnGraph(n=n, sink_id=sink, edges=tuple(edges), coords=coords)
    raise DisconnectedTopologyError(max_attempts)


def _gp_factor(points, variance, length_scale):
    diff = points[:, None, :] - points[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    cov = variance * np.exp(-d2 / (2.0 * length_scale**2))
    eye = np.eye(len(points))
    for jitter in (1e-10, 1e-8, 1e-6, 1e-4):
        try:
            return np.linalg.cholesky(cov + jitter * variance * eye)
        except np.linalg.LinAlgError:
            continue
    raise DegenerateCovarianceError("degenerate covariance: Cholesky failed after jitter")


def synth_field_series(graph, mean, variance, length_scale, ar_coeff, cycles, seed):
    """Spatially correlated readings evolving as a first-order autoregression.

    Cycle 0 is a draw from a Gaussian process with squared-exponential
    covariance over the sensor coordinates.  Each later cycle is
    ``mean + a * (prev - mean) + sqrt(1 - a^2) * fresh``, where ``fresh`` is a
    new zero-mean GP draw, so the marginal covariance is stationary.
    """
    if not variance > 0:
        raise ValueError("variance must be > 0")
    if not length_scale > 0:
        raise ValueError("length_scale must be > 0")
    if not 0 <= ar_coeff < 1:
        raise ValueError("ar_coeff must lie in [0, 1)")
    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    points = graph.coords[graph.sensor_ids]
    chol = _gp_factor(points, variance, length_scale)
    rng = np.random.default_rng(seed)
    innov = math.sqrt(1.0 - ar_coeff**2)
    out = []
    dev = chol @ rng.standard_normal(len(points))
    out.append(SensorField(0, mean + dev))
    for c in range(1, cycles):
        dev = ar_coeff * dev + innov * (chol @ rng.standard_normal(len(points)))
        out.append(SensorField(c, mean + dev))
    return out


# --------------------------------------------------------------------------
# graph algebra


def union_graph(graphs: Sequence[UGraph]) -> UGraph:
    if not graphs:
        raise GraphError("union of an empty list of graphs")
    verts = graphs[0].vertices
    for g in graphs[1:]:
        if g.vertices != verts:
            raise GraphError("vertex set mismatch")
    edges = frozenset().union(*(g.edges for g in graphs))
    return UGraph(verts, edges)


def complement_graph(g: UGraph) -> UGraph:
    verts = g.vertices
    edges = frozenset(
        (a, b)
        for i, a in enumerate(verts)
        for b in verts[i + 1:]
        if (a, b) not in g.edges
    )
    return UGraph(verts, edges)


def graph_matrices(g: UGraph, unit_weights=True, weights=None) -> GraphMatrices:
    """Adjacency, degree and Laplacian, indexed by position in ``g.vertices``.

    With ``unit_weights=False`` the ``weights`` mapping ``(a, b) -> w > 0`` is
    required for every edge.
    """
    if not unit_weights and weights is None:
        raise ValueError("weights are required when unit_weights is False")
    pos = {v: i for i, v in enumerate(g.vertices)}
    n = len(g.vertices)
    adj = np.zeros((n, n))
    for a, b in g.edges:
        w = 1.0
        if not unit_weights:
            w = weights.get((a, b), weights.get((b, a)))
            if w is None or not w > 0:
                raise ValueError(f"edge ({a}, {b}) needs a positive weight")
        adj[pos[a], pos[b]] = adj[pos[b], pos[a]] = w
    deg = np.diag(adj.sum(axis=1))
    return GraphMatrices(adjacency=adj, degree=deg, laplacian=deg - adj)
