"""Sink-side path recovery and routing-matrix construction."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import UnknownNodeError
from .graph_core import UGraph, union_graph
from .routing_sim import CollectionCycle

# measured mean per-packet path recovery ratio of a deployed network
TESTBED_RECOVERY_RATIO = 0.9838


@dataclass(frozen=True)
class PathRecoveryModel:
    recovery_prob: float = TESTBED_RECOVERY_RATIO

    def __post_init__(self):
        if not 0.0 <= self.recovery_prob <= 1.0:
            raise ValueError("recovery_prob must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class MeasurementMatrix:
    """Binary routing matrix; row ``i`` marks the sensor columns on path ``i``."""

    rows: np.ndarray
    row_paths: tuple
    y_kept: np.ndarray
    sink: int

    @property
    def shape(self):
        return self.rows.shape

    def apply_in_path_order(self, x):
        """``Phi @ x`` summed along each path from source to sink.

        This is the summation order the network uses, so the result equals
        ``y_kept`` exactly for noiseless data.
        """
        out = []
        for path in self.row_paths:
            cols = [_column(v, self.sink) for v in path if v != self.sink]
            out.append(_ordered_sum(x, cols))
        return np.array(out, dtype=np.float64)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for r in self.rows.astype(np.int64):
            w.writerow(r.tolist())
        return buf.getvalue()

    def to_support_json(self):
        return json.dumps(
            {
                "n_columns": int(self.rows.shape[1]),
                "rows": [np.flatnonzero(r).tolist() for r in self.rows],
                "paths": [list(p) for p in self.row_paths],
                "y": self.y_kept.tolist(),
            }
        )


def _ordered_sum(x, cols):
    acc = x[cols[0]]
    for c in cols[1:]:
        acc = acc + x[c]
    return acc


def recover_paths(cycle: CollectionCycle, model: PathRecoveryModel, seed):
    """Keep each packet's path independently with probability ``recovery_prob``.

    Returns ``(paths, kept_indices)``; dropped packets lose their measurement.
    """
    rng = np.random.default_rng(seed)
    ok = rng.random(cycle.M) < model.recovery_prob
    kept = [i for i in range(cycle.M) if ok[i]]
    return [cycle.paths[i] for i in kept], kept


def build_measurement_matrix(paths: Sequence[Sequence[int]], y, N, sink=None) -> MeasurementMatrix:
    """Rows in arrival order; column of node ``v`` is ``v`` if ``v < sink`` else ``v - 1``.

    ``sink`` defaults to ``N``, i.e. sensors are ``0..N-1``.
    """
    sink = N if sink is None else sink
    y = np.asarray(y, dtype=np.float64)
    if len(y) != len(paths):
        raise ValueError("one measurement per path is required")
    rows = np.zeros((len(paths), N), dtype=np.float64)
    for i, path in enumerate(paths):
        cols = []
        for v in path:
            if v == sink:
                continue
            c = _column(v, sink)
            if not 0 <= c < N:
                raise UnknownNodeError(f"unknown node {v} on path {i}")
            cols.append(c)
        if not cols:
            raise ValueError(f"path {i} carries no sensor node")
        rows[i, cols] = 1.0
    return MeasurementMatrix(
        rows=rows, row_paths=tuple(tuple(p) for p in paths), y_kept=y.copy(), sink=sink
    )


def measurement_matrix_for(cycle: CollectionCycle, model: PathRecoveryModel, seed, N):
    paths, kept = recover_paths(cycle, model, seed)
    return build_measurement_matrix(paths, cycle.measurements[kept], N, sink=cycle.sink_id)


def _column(v, sink):
    return v if v < sink else v - 1


def urtg_from_paths(paths, N, sink) -> UGraph:
    """Undirected routing topology over sensor columns; sink hops are dropped."""
    edges = set()
    for p in paths:
        for a, b in zip(p[:-1], p[1:]):
            if a == sink or b == sink:
                continue
            ca, cb = _column(a, sink), _column(b, sink)
            edges.add((min(ca, cb), max(ca, cb)))
    return UGraph(tuple(range(N)), frozenset(edges))


def urtg(cycles: Sequence[CollectionCycle], N, recovered=None) -> UGraph:
    """Union of per-cycle URTGs.

    ``recovered`` optionally supplies, per cycle, the list of recovered paths;
    by default every path of the cycle is used.
    """
    if not cycles:
        raise ValueError("urtg needs at least one cycle")
    per_cycle = []
    for i, c in enumerate(cycles):
        paths = c.paths if recovered is None else recovered[i]
        per_cycle.append(urtg_from_paths(paths, N, c.sink_id))
    return union_graph(per_cycle)
