"""Graph linear embedding: order graph vertices along a similarity-guided walk."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import GraphError
from ..graph_core import UGraph
from ..kernels import gle_walk


@dataclass(frozen=True)
class Embedding:
    """``order[p]`` is the vertex placed at position ``p`` of the line.

    ``walk`` is the raw visit sequence, backtracking revisits included.
    """

    order: tuple
    walk: tuple

    def to_dict(self):
        return {"order": list(self.order), "walk": list(self.walk)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(int(v) for v in d["order"]), tuple(int(v) for v in d["walk"]))


def similarity(g: UGraph, u, v, normalized=False):
    """Neighbourhood similarity of ``u`` and ``v``.

    The default form is ``|(Adj(u) & Adj(v)) | {u, v}| / |Adj(u) | Adj(v)|``,
    which can exceed 1 for non-adjacent pairs.  ``normalized=True`` adds
    ``{u, v}`` to the denominator as well, bounding the value by 1.  Both forms
    agree when ``u`` and ``v`` are adjacent.  Returns 0 if the denominator is
    empty.
    """
    if u == v:
        raise ValueError("similarity needs two distinct vertices")
    adj = g.adjacency_sets()
    if u not in adj or v not in adj:
        raise GraphError("vertex not in graph")
    num = len((adj[u] & adj[v]) | {u, v})
    den_set = adj[u] | adj[v]
    if normalized:
        den_set = den_set | {u, v}
    if not den_set:
        return 0.0
    return num / len(den_set)


def gle_embed(g: UGraph) -> Embedding:
    """Walk the graph greedily from its lowest-degree vertex.

    At each step move to the unvisited neighbour of the current vertex with
    the highest similarity; when none is left, pop the stack and revisit the
    vertex below.  Ties (initial degree sort and similarity) go to the lowest
    vertex id.  The line order is the sequence of first visits.
    """
    verts = g.vertices
    if not verts:
        raise GraphError("empty graph")
    if not g.is_connected():
        raise GraphError("graph not connected")
    adj = g.adjacency_matrix()
    deg = adj.sum(axis=1)
    # lexsort: last key is primary
    first = int(np.lexsort((np.arange(len(verts)), deg))[0])
    walk_pos = gle_walk(adj, first)
    seen = set()
    order = []
    for p in walk_pos.tolist():
        if p not in seen:
            seen.add(p)
            order.append(verts[p])
    walk = tuple(verts[p] for p in walk_pos.tolist())
    return Embedding(tuple(order), walk)
