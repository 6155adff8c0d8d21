"""Time the compiled loop kernels against their pure-numpy counterparts.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Run with ``CSRWSN_DISABLE_NUMBA=1`` to time the interpreted loops instead.
"""

import argparse
import timeit

import numpy as np

from csrwsn.graph_core import random_geometric_topology, synth_field_series
from csrwsn.kernels import (
    NUMBA_ENABLED,
    gle_walk_loop,
    gle_walk_numpy,
    walk_packets_loop,
    walk_packets_numpy,
)
from csrwsn.routing_sim import build_cycle_routing, readings_by_node


def packet_inputs(n=301, M=300, seed=0):
    g = random_geometric_topology(n, 0.12, seed)
    routing = build_cycle_routing(g, 0.2, 3, seed)
    field = synth_field_series(g, 50.0, 4.0, 0.3, 0.9, 1, seed)[0]
    rng = np.random.default_rng(seed)
    sensors = np.asarray(routing.sensor_ids, dtype=np.int64)
    sources = rng.choice(sensors, size=M, replace=False)
    depth = int(np.max(routing.cost_to_sink))
    uniforms = rng.random((M, depth))
    ptr, idx = routing.candidate_csr()
    readings = readings_by_node(field, g.n, g.sink_id)
    return ptr, idx, np.int64(g.sink_id), sources, uniforms, readings


def gle_inputs(n=200, seed=0):
    rng = np.random.default_rng(seed)
    adj = rng.random((n, n)) < 0.5
    adj = np.triu(adj, 1)
    adj = adj | adj.T
    return adj, np.int64(0)


def bench(name, loop_fn, np_fn, args, repeat):
    loop_fn(*args)  # compile
    a = loop_fn(*args)
    b = np_fn(*args)
    same = all(np.array_equal(x, y) for x, y in zip(a, b)) if isinstance(a, tuple) \
        else np.array_equal(a, b)
    t_loop = min(timeit.repeat(lambda: loop_fn(*args), number=1, repeat=repeat))
    t_np = min(timeit.repeat(lambda: np_fn(*args), number=1, repeat=repeat))
    label = "numba" if NUMBA_ENABLED else "python"
    print(f"{name:14s} {label}: {t_loop * 1e3:9.3f} ms   numpy: {t_np * 1e3:9.3f} ms   "
          f"ratio {t_np / t_loop:7.2f}   identical={same}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    bench("walk_packets", walk_packets_loop, walk_packets_numpy, packet_inputs(), args.repeat)
    bench("gle_walk", gle_walk_loop, gle_walk_numpy, gle_inputs(), args.repeat)


if __name__ == "__main__":
    main()
