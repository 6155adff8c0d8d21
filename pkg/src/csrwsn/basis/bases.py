"""Representation bases: learned graph wavelets and fixed baselines."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..graph_core import complement_graph, graph_matrices
from ..tomography import urtg
from .gle import Embedding, gle_embed
from .wavelets import LiftedWavelets, dyadic_partition, lift_forward, lift_inverse, train_lifting

BASIS_KINDS = ("learned", "haar", "dct", "diff")


class RepresentationBasis:
    """Invertible ``N x N`` basis ``psi`` (node-column order) with its analysis map.

    ``x == psi @ forward(x)`` for any ``x``.
    """

    def __init__(self, name, psi, forward, wavelets=None, embedding=None):
        self.name = name
        self.psi = np.asarray(psi, dtype=np.float64)
        self.psi.setflags(write=False)
        self._forward = forward
        self.wavelets = wavelets
        self.embedding = embedding

    @property
    def N(self):
        return self.psi.shape[0]

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self.N:
            raise ValueError(f"signal length {x.shape[0]} != basis size {self.N}")
        return self._forward(x)

    def synthesize(self, s):
        s = np.asarray(s, dtype=np.float64)
        if s.shape[0] != self.N:
            raise ValueError(f"coefficient length {s.shape[0]} != basis size {self.N}")
        return self.psi @ s

    def __repr__(self):
        return f"RepresentationBasis({self.name!r}, N={self.N})"


def assemble_basis(w: LiftedWavelets, embedding: Embedding, name="learned") -> RepresentationBasis:
    """Synthesis matrix from the inverse lifting transform of unit coefficients."""
    order = np.asarray(embedding.order, dtype=np.int64)
    N = w.partition.N
    if sorted(order.tolist()) != list(range(N)):
        raise ValueError("embedding order is not a permutation of 0..N-1")
    psi = np.empty((N, N))
    psi[order, :] = lift_inverse(w, np.eye(N))

    def forward(x):
        return lift_forward(w, x[order])

    return RepresentationBasis(name, psi, forward, wavelets=w, embedding=embedding)


def dct_matrix(N):
    """Orthonormal DCT-II analysis matrix, ``C @ x`` gives the coefficients."""
    k = np.arange(N)[:, None]
    n = np.arange(N)[None, :]
    C = np.cos(math.pi * (2 * n + 1) * k / (2 * N))
    C[0] *= math.sqrt(1.0 / N)
    C[1:] *= math.sqrt(2.0 / N)
    return C


def baseline_basis(kind, N) -> RepresentationBasis:
    if N < 1:
        raise ValueError("N must be >= 1")
    if kind == "haar":
        w = LiftedWavelets.zeros(dyadic_partition(N))
        ident = Embedding(tuple(range(N)), tuple(range(N)))
        return assemble_basis(w, ident, name="haar")
    if kind == "dct":
        C = dct_matrix(N)
        return RepresentationBasis("dct", C.T.copy(), lambda x: C @ x)
    if kind == "diff":
        psi = np.tril(np.ones((N, N)))

        def forward(x):
            return np.diff(x, axis=0, prepend=np.zeros((1,) + x.shape[1:]))

        return RepresentationBasis("diff", psi, forward)
    raise ValueError(f"unknown basis kind {kind!r}")


def k_term_approx(s, k):
    """Keep the ``k`` largest-magnitude entries; ties keep the lower index."""
    s = np.asarray(s, dtype=np.float64)
    if not 0 <= k <= s.shape[0]:
        raise ValueError("k must lie in [0, len(s)]")
    out = np.zeros_like(s)
    keep = np.argsort(-np.abs(s), kind="stable")[:k]
    out[keep] = s[keep]
    return out


@dataclass
class LearnedBasisArtifacts:
    basis: RepresentationBasis
    union_graph: object
    complement: object
    laplacian_cg: np.ndarray


def learn_basis(training_cycles, training_fields, N, recovered=None, epsilon=1e-4, step=1.0,
                iters=200) -> LearnedBasisArtifacts:
    """Full construction: URTG union -> complement -> GLE -> dyadic partition -> lifting.

    ``training_fields`` are node-column-order vectors; ``recovered`` optionally
    gives the recovered paths per training cycle.
    """
    g_u = urtg(training_cycles, N, recovered=recovered)
    g_cg = complement_graph(g_u)
    emb = gle_embed(g_cg)
    order = np.asarray(emb.order, dtype=np.int64)
    part = dyadic_partition(N)
    fields = [np.asarray(f, dtype=np.float64)[order] for f in training_fields]
    w = train_lifting(part, fields, epsilon=epsilon, step=step, iters=iters)
    basis = assemble_basis(w, emb)
    lap = graph_matrices(g_cg).laplacian
    return LearnedBasisArtifacts(basis, g_u, g_cg, lap)


def make_basis(kind, N, learned=None) -> RepresentationBasis:
    if kind == "learned":
        if learned is None:
            raise ValueError("the learned basis must be trained first")
        return learned
    return baseline_basis(kind, N)
