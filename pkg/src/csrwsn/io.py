"""JSON and CSV serialization of pipeline artifacts.

Floats are written with ``repr`` precision, so every round trip is lossless.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .basis import Embedding, LiftedWavelets, assemble_basis
from .graph_core import SensorField, WsnGraph
from .routing_sim import CollectionCycle


def dumps(obj):
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def read_json(path):
    return json.loads(Path(path).read_text())


def matrix_to_csv(mat):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in np.atleast_2d(np.asarray(mat, dtype=np.float64)):
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def matrix_from_csv(text):
    rows = [[float(v) for v in r] for r in csv.reader(io.StringIO(text)) if r]
    return np.array(rows, dtype=np.float64)


# topology and fields


def topology_to_dict(graph: WsnGraph):
    return graph.to_dict()


def topology_from_dict(d) -> WsnGraph:
    return WsnGraph.from_dict(d)


def fields_to_dict(fields):
    return {"fields": [f.to_dict() for f in fields]}


def fields_from_dict(d):
    return [SensorField.from_dict(f) for f in d["fields"]]


# cycles


def cycles_to_dict(cycles, kept=None):
    """``kept[i]`` lists the packet indices whose paths the sink recovered."""
    out = []
    for i, c in enumerate(cycles):
        rec = c.to_dict()
        if kept is not None:
            rec["recovered"] = [int(k) for k in kept[i]]
        out.append(rec)
    return {"cycles": out}


def cycles_from_dict(d):
    cycles = [CollectionCycle.from_dict(c) for c in d["cycles"]]
    kept = [c.get("recovered") for c in d["cycles"]]
    return cycles, kept


# learned basis


def wavelets_to_dict(basis):
    return {
        "name": basis.name,
        "wavelets": basis.wavelets.to_dict(),
        "embedding": basis.embedding.to_dict(),
    }


def basis_from_dict(d):
    w = LiftedWavelets.from_dict(d["wavelets"])
    emb = Embedding.from_dict(d["embedding"])
    return assemble_basis(w, emb, name=d.get("name", "learned"))
