import json

import numpy as np
import pytest

from csrwsn import io as aio
from csrwsn.errors import PartitionedNetworkError, RoutingError
from csrwsn.graph_core import SensorField, WsnGraph, random_geometric_topology, synth_field_series
from csrwsn.kernels import walk_packets
from csrwsn.routing_sim import (
    CollectionCycle,
    Scheme,
    build_cycle_routing,
    collect_cycle,
    path_recording_overhead,
    transmission_stats,
)

from conftest import TOY_PATHS, TOY_READINGS, TOY_SINK
from oracles import ordered_path_sum


def _toy_cycle():
    field = SensorField(0, TOY_READINGS)
    readings = np.append(TOY_READINGS, 0.0)
    y = np.array([ordered_path_sum(p, readings, TOY_SINK) for p in TOY_PATHS])
    return CollectionCycle(0, TOY_SINK, tuple(TOY_PATHS), (1, 3, 4), y, field)


def test_toy_aggregation_through_kernel():
    # candidates: u2->u1, u1->S, u4->u3, u3->{u1, S}, u5->u3
    cands = {0: [5], 1: [0], 2: [0, 5], 3: [2], 4: [2], 5: []}
    ptr = np.zeros(7, dtype=np.int64)
    ptr[1:] = np.cumsum([len(cands[v]) for v in range(6)])
    idx = np.array([c for v in range(6) for c in cands[v]], dtype=np.int64)
    uniforms = np.array([[0.0, 0.0, 0.0], [0.0, 0.1, 0.0], [0.0, 0.9, 0.0]])
    readings = np.append(TOY_READINGS, 0.0)
    paths, lengths, y = walk_packets(ptr, idx, TOY_SINK, np.array([1, 3, 4]), uniforms, readings)
    got = [tuple(paths[i, : lengths[i]]) for i in range(3)]
    assert got == TOY_PATHS
    assert y.tolist() == [7.0, 13.0, 10.0]


def test_toy_transmissions():
    cyc = _toy_cycle()
    assert transmission_stats(cyc, Scheme.CSR, 5).transmissions == 7
    assert transmission_stats(cyc, "CSR", 5).overhead_bytes == 12
    assert transmission_stats(cyc, Scheme.PATH_RECORDING, 5).overhead_bytes == 2 + 4 + 2


def test_cdg_transmissions_default_scale():
    g = random_geometric_topology(76, 0.2, 1)
    f = synth_field_series(g, 0.0, 1.0, 0.3, 0.0, 1, 0)[0]
    cyc = collect_cycle(build_cycle_routing(g, 0.2, 3, 0), f, 12, 0)
    rep = transmission_stats(cyc, Scheme.CDG, 75)
    assert rep.transmissions == 900
    assert rep.overhead_bytes == 0


def test_path_recording_overhead_eight_hops():
    assert path_recording_overhead(8) == 14
    path = tuple(range(8, -1, -1))  # 8 hops ending at sink 0
    f = SensorField(0, np.ones(8))
    cyc = CollectionCycle(0, 0, (path,), (8,), np.array([8.0]), f)
    assert transmission_stats(cyc, Scheme.PATH_RECORDING, 8).overhead_bytes == 14
    assert transmission_stats(cyc, Scheme.CSR, 8).overhead_bytes == 4
    assert transmission_stats(cyc, Scheme.CSR, 8).max_hops == 8


def test_single_hop_source_reports_own_reading(toy_graph):
    routing = build_cycle_routing(toy_graph, 0.0, 1, 0)
    f = SensorField(0, TOY_READINGS)
    # M = N forces every sensor to be a source; u1 (id 0) neighbours the sink
    cyc = collect_cycle(routing, f, 5, 3)
    i = cyc.sources.index(0)
    assert cyc.paths[i] == (0, 5)
    assert cyc.measurements[i] == TOY_READINGS[0]


def _tree():
    # 0 is the sink; a tree with depth 3
    edges = ((0, 1), (0, 2), (1, 3), (1, 4), (2, 5), (5, 6))
    return WsnGraph(7, 0, edges, np.zeros((7, 2)))


def test_tree_has_unique_parents():
    r = build_cycle_routing(_tree(), 0.0, 3, 0)
    parents = {1: 0, 2: 0, 3: 1, 4: 1, 5: 2, 6: 5}
    for v, p in parents.items():
        assert r.parent_candidates[v] == (p,)
    assert r.parent_candidates[0] == ()


def test_costs_strictly_decrease_random_graphs():
    for seed in range(200):
        g = random_geometric_topology(20, 0.4, seed)
        r = build_cycle_routing(g, 0.3, 3, seed)
        alive = set(r.alive_edges)
        for v in g.sensor_ids:
            cands = r.parent_candidates[v]
            assert 1 <= len(cands) <= 3
            for c in cands:
                assert r.cost_to_sink[c] < r.cost_to_sink[v]
                assert (min(c, v), max(c, v)) in alive
            keys = [(r.cost_to_sink[c], c) for c in cands]
            assert keys == sorted(keys)


def test_alive_edge_fraction_binomial():
    g = random_geometric_topology(50, 0.3, 4)
    p = 0.2
    E = len(g.edges)
    alive = 0
    # count only first draws (no redraw) so the binomial model is exact
    for c in range(1000):
        rng = np.random.default_rng(10_000 + c)
        alive += int(np.sum(rng.random(E) >= p))
    frac = alive / (1000 * E)
    sigma = np.sqrt(p * (1 - p) / (1000 * E))
    assert abs(frac - (1 - p)) < 3 * sigma
    # the routing draw uses exactly that stream when no redraw is needed
    r = build_cycle_routing(g, p, 3, 10_000)
    rng = np.random.default_rng(10_000)
    mask = rng.random(E) >= p
    expected = tuple(e for e, m in zip(g.edges, mask) if m)
    assert r.alive_edges == expected


def test_partitioned_network():
    with pytest.raises(PartitionedNetworkError):
        build_cycle_routing(_tree(), 0.99, 3, 0, max_redraws=5)


@pytest.mark.parametrize("p,pool", [(-0.1, 3), (1.0, 3), (0.1, 0)])
def test_routing_preconditions(p, pool):
    with pytest.raises(ValueError):
        build_cycle_routing(_tree(), p, pool, 0)


def test_too_many_sources():
    r = build_cycle_routing(_tree(), 0.0, 3, 0)
    with pytest.raises(RoutingError, match="too many sources"):
        collect_cycle(r, SensorField(0, np.ones(6)), 7, 0)


@pytest.fixture(scope="module")
def deployment():
    g = random_geometric_topology(76, 0.2, 1)
    fields = synth_field_series(g, 50.0, 4.0, 0.3, 0.9, 40, 2)
    return g, fields


def test_paths_valid_and_measurements_exact(deployment):
    g, fields = deployment
    for c, f in enumerate(fields):
        r = build_cycle_routing(g, 0.2, 3, 100 + c)
        cyc = collect_cycle(r, f, 12, c)
        alive = set(r.alive_edges)
        readings = np.zeros(g.n)
        readings[g.sensor_ids] = f.values
        assert len(set(cyc.sources)) == 12
        for path, y, src in zip(cyc.paths, cyc.measurements, cyc.sources):
            assert path[0] == src and path[-1] == g.sink_id
            assert len(set(path)) == len(path)
            for a, b in zip(path, path[1:]):
                assert (min(a, b), max(a, b)) in alive
            assert y == ordered_path_sum(path, readings, g.sink_id)
            # dot product with the path indicator agrees to rounding
            ind = np.zeros(g.n)
            ind[list(path[:-1])] = 1.0
            assert y == pytest.approx(float(ind @ readings), rel=1e-14)


def test_collect_deterministic(deployment):
    g, fields = deployment
    r = build_cycle_routing(g, 0.2, 3, 5)
    a = collect_cycle(r, fields[0], 12, 9)
    b = collect_cycle(r, fields[0], 12, 9)
    assert a.paths == b.paths and np.array_equal(a.measurements, b.measurements)


def test_csr_transmissions_equal_hops(deployment):
    g, fields = deployment
    r = build_cycle_routing(g, 0.2, 3, 5)
    cyc = collect_cycle(r, fields[1], 20, 1)
    rep = transmission_stats(cyc, Scheme.CSR, g.N)
    walked = sum(sum(1 for _ in zip(p, p[1:])) for p in cyc.paths)
    assert rep.transmissions == walked >= cyc.M
    assert rep.overhead_bytes == 4 * cyc.M
    pr = transmission_stats(cyc, Scheme.PATH_RECORDING, g.N)
    assert pr.overhead_bytes == sum(2 * (len(p) - 2) for p in cyc.paths)


def test_cycle_json_roundtrip(deployment):
    g, fields = deployment
    cyc = collect_cycle(build_cycle_routing(g, 0.2, 3, 5), fields[2], 12, 4)
    d = json.loads(aio.dumps(aio.cycles_to_dict([cyc], [[0, 2]])))
    back, kept = aio.cycles_from_dict(d)
    assert kept == [[0, 2]]
    assert back[0].paths == cyc.paths
    assert np.array_equal(back[0].measurements, cyc.measurements)
    assert back[0].field == cyc.field
