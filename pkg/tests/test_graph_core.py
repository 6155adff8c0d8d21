import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from csrwsn import io as aio
from csrwsn.errors import DegenerateCovarianceError, DisconnectedTopologyError, GraphError
from csrwsn.graph_core import (
    SensorField,
    UGraph,
    WsnGraph,
    complement_graph,
    graph_matrices,
    random_geometric_topology,
    synth_field_series,
    union_graph,
)

from oracles import random_connected_graph

# mean degree of random_geometric_topology(75, 0.18, 7), pinned from an
# independent all-pairs distance count over the generated coordinates
PINNED_MEAN_DEGREE_75_018_7 = 6.32
PINNED_EDGES_75_018_7 = 237


def test_two_nodes_max_radius_single_edge():
    g = random_geometric_topology(2, math.sqrt(2), 123)
    assert g.edges == ((0, 1),)


def test_topology_deterministic():
    a = random_geometric_topology(40, 0.3, 5)
    b = random_geometric_topology(40, 0.3, 5)
    assert a == b


def test_pinned_topology_fixture():
    g = random_geometric_topology(75, 0.18, 7)
    assert len(g.edges) == PINNED_EDGES_75_018_7
    assert g.mean_degree() == pytest.approx(PINNED_MEAN_DEGREE_75_018_7, abs=1e-12)
    # independent recount from coordinates
    c = g.coords
    d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(-1))
    adj = (d <= 0.18) & ~np.eye(75, dtype=bool)
    assert adj.sum() // 2 == len(g.edges)


def test_sink_is_corner_nearest():
    g = random_geometric_topology(60, 0.25, 3)
    norms = np.hypot(g.coords[:, 0], g.coords[:, 1])
    assert g.sink_id == int(np.argmin(norms))


def test_disconnected_topology_reports_attempts():
    with pytest.raises(DisconnectedTopologyError) as ei:
        random_geometric_topology(50, 0.01, 0, max_attempts=3)
    assert ei.value.attempts == 3
    assert "3" in str(ei.value)


@pytest.mark.parametrize("n,radius", [(1, 0.5), (5, 0.0), (5, 2.0)])
def test_topology_preconditions(n, radius):
    with pytest.raises(ValueError):
        random_geometric_topology(n, radius, 0)


def test_wsngraph_rejects_disconnected_and_self_loops():
    with pytest.raises(GraphError):
        WsnGraph(3, 0, ((0, 1),), np.zeros((3, 2)))
    with pytest.raises(GraphError):
        WsnGraph(2, 0, ((0, 0), (0, 1)), np.zeros((2, 2)))


def test_wsngraph_dedups_edges():
    g = WsnGraph(3, 0, ((1, 0), (0, 1), (2, 1)), np.zeros((3, 2)))
    assert g.edges == ((0, 1), (1, 2))


def test_column_mapping_skips_sink():
    g = WsnGraph(4, 1, ((0, 1), (1, 2), (2, 3)), np.zeros((4, 2)))
    assert [g.column(v) for v in g.sensor_ids] == [0, 1, 2]
    assert [g.node(c) for c in range(3)] == [0, 2, 3]
    with pytest.raises(GraphError):
        g.column(1)


def test_topology_and_fields_json_roundtrip_lossless():
    g = random_geometric_topology(30, 0.35, 11)
    fields = synth_field_series(g, 20.0, 3.0, 0.2, 0.5, 4, 9)
    g2 = aio.topology_from_dict(json.loads(aio.dumps(aio.topology_to_dict(g))))
    f2 = aio.fields_from_dict(json.loads(aio.dumps(aio.fields_to_dict(fields))))
    assert g2 == g
    assert all(a == b for a, b in zip(fields, f2))
    assert np.array_equal(g2.coords, g.coords)


# fields


@pytest.fixture(scope="module")
def small_graph():
    return random_geometric_topology(25, 0.4, 2)


def test_tiny_variance_gives_mean(small_graph):
    fs = synth_field_series(small_graph, 7.5, 1e-12, 0.3, 0.5, 3, 0)
    for f in fs:
        assert np.max(np.abs(f.values - 7.5)) < 1e-4


def test_field_series_deterministic(small_graph):
    a = synth_field_series(small_graph, 1.0, 2.0, 0.3, 0.7, 5, 4)
    b = synth_field_series(small_graph, 1.0, 2.0, 0.3, 0.7, 5, 4)
    assert all(x == y for x, y in zip(a, b))
    assert [f.cycle_id for f in a] == list(range(5))
    assert all(f.N == small_graph.N for f in a)


def test_ar0_cycles_uncorrelated(small_graph):
    fs = synth_field_series(small_graph, 0.0, 1.0, 0.3, 0.0, 500, 1)
    X = np.array([f.values for f in fs])
    node_rho = [np.corrcoef(X[:-1, j], X[1:, j])[0, 1] for j in range(X.shape[1])]
    assert abs(float(np.mean(node_rho))) < 0.1
    assert max(abs(r) for r in node_rho) < 0.25


def test_ar_coefficient_recovered(small_graph):
    fs = synth_field_series(small_graph, 0.0, 1.0, 0.3, 0.8, 2000, 1)
    X = np.array([f.values for f in fs])
    rho = np.mean([np.corrcoef(X[:-1, j], X[1:, j])[0, 1] for j in range(X.shape[1])])
    assert abs(rho - 0.8) < 0.05


def test_sample_mean_standard_error(small_graph):
    N, var, mean = small_graph.N, 4.0, 10.0
    fs = synth_field_series(small_graph, mean, var, 0.3, 0.0, 1000, 8)
    X = np.array([f.values for f in fs])
    assert abs(X.mean() - mean) < 3 * math.sqrt(var / 1000 * N)
    # marginal variance is stationary under the AR update
    fs = synth_field_series(small_graph, 0.0, var, 0.3, 0.9, 3000, 8)
    X = np.array([f.values for f in fs])
    assert X.var() == pytest.approx(var, rel=0.35)


def test_coincident_sensors_need_jitter_or_fail():
    coords = np.zeros((4, 2))
    g = WsnGraph(4, 0, ((0, 1), (1, 2), (2, 3)), coords)
    fs = synth_field_series(g, 0.0, 1.0, 0.3, 0.0, 2, 0)
    # all sensors share one location, so readings coincide up to the jitter
    assert np.ptp(fs[0].values) < 1e-3


def test_degenerate_covariance_error(monkeypatch):
    import csrwsn.graph_core as gc

    def always_fail(*a, **k):
        raise np.linalg.LinAlgError("not PD")

    monkeypatch.setattr(gc.np.linalg, "cholesky", always_fail)
    g = WsnGraph(3, 0, ((0, 1), (1, 2)), np.zeros((3, 2)))
    with pytest.raises(DegenerateCovarianceError):
        synth_field_series(g, 0.0, 1.0, 0.3, 0.0, 1, 0)


@pytest.mark.parametrize("kw", [dict(variance=0.0), dict(length_scale=-1.0), dict(ar_coeff=1.0),
                                dict(cycles=0)])
def test_field_preconditions(small_graph, kw):
    args = dict(mean=0.0, variance=1.0, length_scale=0.3, ar_coeff=0.5, cycles=2, seed=0)
    args.update(kw)
    with pytest.raises(ValueError):
        synth_field_series(small_graph, **args)


def test_sensor_field_rejects_nonfinite():
    with pytest.raises(ValueError):
        SensorField(0, np.array([1.0, np.nan]))


# union / complement


def test_union_definition():
    g1 = UGraph.from_edges([1, 2, 3], [(1, 2)])
    g2 = UGraph.from_edges([1, 2, 3], [(2, 3)])
    assert union_graph([g1, g2]).sorted_edges() == [(1, 2), (2, 3)]
    assert union_graph([g1, g1]) == g1


def test_union_vertex_mismatch():
    with pytest.raises(GraphError, match="vertex set mismatch"):
        union_graph([UGraph.from_edges([1, 2], []), UGraph.from_edges([1, 2, 3], [])])


def test_union_of_single_edges_matches_set_union():
    rng = np.random.default_rng(0)
    pairs = list(itertools.combinations(range(5), 2))
    chosen = [pairs[i] for i in rng.permutation(len(pairs))[:10]]
    graphs = [UGraph.from_edges(range(5), [e]) for e in chosen]
    u = union_graph(graphs)
    assert set(u.edges) == set().union(*({e} for e in chosen))
    assert len(u.edges) == 10


edge_sets = st.sets(st.tuples(st.integers(0, 6), st.integers(0, 6)).filter(lambda e: e[0] != e[1]),
                    max_size=15)


@given(edge_sets, edge_sets, edge_sets)
def test_union_algebra(e1, e2, e3):
    g1, g2, g3 = (UGraph.from_edges(range(7), e) for e in (e1, e2, e3))
    assert union_graph([g1, g2]) == union_graph([g2, g1])
    assert union_graph([union_graph([g1, g2]), g3]) == union_graph([g1, union_graph([g2, g3])])
    assert union_graph([g1, g1]) == g1


def test_complement_examples():
    k4 = UGraph.from_edges(range(1, 5), itertools.combinations(range(1, 5), 2))
    assert complement_graph(k4).edges == frozenset()
    g = UGraph.from_edges([1, 2, 3, 4], [(1, 2), (2, 3)])
    assert complement_graph(g).sorted_edges() == [(1, 3), (1, 4), (2, 4), (3, 4)]


def test_complement_involution_random():
    rng = np.random.default_rng(1)
    for _ in range(100):
        n = int(rng.integers(1, 12))
        edges = [e for e in itertools.combinations(range(n), 2) if rng.random() < 0.4]
        g = UGraph.from_edges(range(n), edges)
        cg = complement_graph(g)
        assert complement_graph(cg) == g
        assert len(g.edges) + len(cg.edges) == n * (n - 1) // 2
        assert not (g.edges & cg.edges)


# matrices


def test_path_laplacian():
    m = graph_matrices(UGraph.from_edges([1, 2, 3], [(1, 2), (2, 3)]))
    assert np.array_equal(m.laplacian, [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])


def test_empty_graph_laplacian():
    m = graph_matrices(UGraph.from_edges(range(4), []))
    assert not m.laplacian.any()


def test_laplacian_null_vector_connected():
    rng = np.random.default_rng(3)
    for _ in range(10):
        edges = random_connected_graph(rng, 8, 0.3)
        L = graph_matrices(UGraph.from_edges(range(8), edges)).laplacian
        vals, vecs = np.linalg.eigh(L)
        assert abs(vals[0]) < 1e-10
        assert vals[1] > 1e-8  # connected: simple zero eigenvalue
        v = vecs[:, 0] / vecs[0, 0]
        assert np.allclose(v, 1.0)


@given(edge_sets)
def test_laplacian_properties(edges):
    m = graph_matrices(UGraph.from_edges(range(7), edges))
    A, D, L = m.adjacency, m.degree, m.laplacian
    assert np.array_equal(A, A.T) and not np.diag(A).any()
    assert set(np.unique(A)) <= {0.0, 1.0}
    assert np.array_equal(L, D - A)
    assert np.allclose(L.sum(axis=1), 0.0)
    x = np.random.default_rng(len(edges)).standard_normal((7, 5))
    assert np.all(np.einsum("ij,ik,kj->j", x, L, x) >= -1e-10)


def test_weighted_laplacian():
    g = UGraph.from_edges([0, 1, 2], [(0, 1), (1, 2)])
    m = graph_matrices(g, unit_weights=False, weights={(0, 1): 2.0, (2, 1): 0.5})
    assert np.allclose(m.laplacian, [[2, -2, 0], [-2, 2.5, -0.5], [0, -0.5, 0.5]])
    with pytest.raises(ValueError):
        graph_matrices(g, unit_weights=False)
