"""Hierarchical partition of a line, unbalanced Haar transform and its lifting.

Signals are vectors in embedding order (or 2-D arrays, one signal per
column).  Coefficients use the layout ``[a_0, d_0, d_1, ..., d_{lmax-1}]``
where level 0 is the coarsest (one segment) and ``lmax`` has singletons.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingDivergedError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class _Stage:
    # merge of level l+1 (fine) into level l (coarse)
    left: np.ndarray
    right: np.ndarray
    parent: np.ndarray
    w_left: np.ndarray
    w_right: np.ndarray
    promo_src: np.ndarray
    promo_dst: np.ndarray
    n_coarse: int
    n_fine: int

    @property
    def n_details(self):
        return self.left.shape[0]


@dataclass(frozen=True)
class HierarchicalPartition:
    """``levels[l]`` lists the ``(start, stop)`` segments of level ``l``."""

    levels: tuple
    stages: tuple = field(repr=False, compare=False)

    @property
    def l_max(self):
        return len(self.levels) - 1

    @property
    def N(self):
        return self.levels[-1][-1][1]

    def detail_counts(self):
        return [s.n_details for s in self.stages]

    def segment_counts(self):
        return [len(seg) for seg in self.levels]

    def to_dict(self):
        return {"levels": [[list(s) for s in lvl] for lvl in self.levels]}

    @classmethod
    def from_dict(cls, d):
        return dyadic_partition(d["levels"][-1][-1][1])


def dyadic_partition(N) -> HierarchicalPartition:
    """Pair consecutive segments left to right until one remains.

    An odd trailing segment is carried up unchanged and contributes no detail
    coefficient at that level.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    fine = [(i, i + 1) for i in range(N)]
    levels = [fine]
    stages = []
    while len(fine) > 1:
        coarse = []
        left, right, parent, promo_src, promo_dst = [], [], [], [], []
        wl, wr = [], []
        i = 0
        while i < len(fine):
            if i + 1 < len(fine):
                n1 = fine[i][1] - fine[i][0]
                n2 = fine[i + 1][1] - fine[i + 1][0]
                left.append(i)
                right.append(i + 1)
                parent.append(len(coarse))
                wl.append(math.sqrt(n1 / (n1 + n2)))
                wr.append(math.sqrt(n2 / (n1 + n2)))
                coarse.append((fine[i][0], fine[i + 1][1]))
                i += 2
            else:
                promo_src.append(i)
                promo_dst.append(len(coarse))
                coarse.append(fine[i])
                i += 1
        stages.append(
            _Stage(
                left=np.array(left, dtype=np.int64),
                right=np.array(right, dtype=np.int64),
                parent=np.array(parent, dtype=np.int64),
                w_left=np.array(wl),
                w_right=np.array(wr),
                promo_src=np.array(promo_src, dtype=np.int64),
                promo_dst=np.array(promo_dst, dtype=np.int64),
                n_coarse=len(coarse),
                n_fine=len(fine),
            )
        )
        levels.append(coarse)
        fine = coarse
    levels.reverse()
    stages.reverse()
    return HierarchicalPartition(
        levels=tuple(tuple(lvl) for lvl in levels), stages=tuple(stages)
    )


# --------------------------------------------------------------------------
# Haar stage


def _ht_split(stage: _Stage, a_fine):
    """One Haar merge: fine approximations -> (coarse approximations, details).

    Approximations carry ``sqrt(size) * mean``; each merge is a 2x2 rotation so
    the full transform is orthonormal.
    """
    a_l, a_r = a_fine[stage.left], a_fine[stage.right]
    wl, wr = stage.w_left, stage.w_right
    if a_fine.ndim == 2:
        wl, wr = wl[:, None], wr[:, None]
    coarse = np.empty((stage.n_coarse,) + a_fine.shape[1:])
    coarse[stage.parent] = wl * a_l + wr * a_r
    coarse[stage.promo_dst] = a_fine[stage.promo_src]
    detail = wr * a_l - wl * a_r
    return coarse, detail


def _ht_merge(stage: _Stage, a_coarse, detail):
    wl, wr = stage.w_left, stage.w_right
    if a_coarse.ndim == 2:
        wl, wr = wl[:, None], wr[:, None]
    fine = np.empty((stage.n_fine,) + a_coarse.shape[1:])
    ap = a_coarse[stage.parent]
    fine[stage.left] = wl * ap + wr * detail
    fine[stage.right] = wr * ap - wl * detail
    fine[stage.promo_src] = a_coarse[stage.promo_dst]
    return fine


def _check_len(partition, x):
    if x.shape[0] != partition.N:
        raise ValueError(f"signal length {x.shape[0]} != partition size {partition.N}")


def haar_forward(partition: HierarchicalPartition, x):
    """Returns ``(approx, details)``: ``approx[l]`` for every level and
    ``details[l]`` for ``l < l_max``."""
    x = np.asarray(x, dtype=np.float64)
    _check_len(partition, x)
    approx = [None] * len(partition.levels)
    details = [None] * partition.l_max
    approx[-1] = x
    a = x
    for l in range(partition.l_max - 1, -1, -1):
        a, d = _ht_split(partition.stages[l], a)
        approx[l] = a
        details[l] = d
    return approx, details


def haar_inverse(partition: HierarchicalPartition, a0, details):
    a = np.asarray(a0, dtype=np.float64)
    for l in range(partition.l_max):
        a = _ht_merge(partition.stages[l], a, np.asarray(details[l], dtype=np.float64))
    return a


def pack(a0, details):
    return np.concatenate([np.asarray(a0)] + [np.asarray(d) for d in details], axis=0)


def unpack(partition: HierarchicalPartition, s):
    s = np.asarray(s, dtype=np.float64)
    _check_len(partition, s)
    a0 = s[:1]
    details = []
    pos = 1
    for cnt in partition.detail_counts():
        details.append(s[pos:pos + cnt])
        pos += cnt
    return a0, details


def haar_coefficients(partition, x):
    approx, details = haar_forward(partition, x)
    return pack(approx[0], details)


def haar_matrix(partition):
    """Rows are analysis functions: ``haar_matrix(p) @ x == haar_coefficients(p, x)``."""
    return haar_coefficients(partition, np.eye(partition.N))


# --------------------------------------------------------------------------
# lifting


@dataclass(frozen=True, eq=False)
class LiftedWavelets:
    """Haar transform with per-level update ``U[l]`` and predict ``P[l]``.

    ``U[l]`` has shape (segments at l, details at l) and ``P[l]`` the
    transpose shape.  ``history[l]`` holds the accepted training objectives.
    """

    partition: HierarchicalPartition
    update_ops: tuple
    predict_ops: tuple
    history: tuple = ()

    @classmethod
    def zeros(cls, partition):
        U, P = [], []
        for st in partition.stages:
            U.append(np.zeros((st.n_coarse, st.n_details)))
            P.append(np.zeros((st.n_details, st.n_coarse)))
        return cls(partition, tuple(U), tuple(P))

    @property
    def layout(self):
        return ["a0"] + [f"d{l}" for l in range(self.partition.l_max)]

    def to_dict(self):
        return {
            "N": self.partition.N,
            "partition": self.partition.to_dict(),
            "layout": self.layout,
            "update_ops": [u.tolist() for u in self.update_ops],
            "predict_ops": [p.tolist() for p in self.predict_ops],
            "history": [list(h) for h in self.history],
        }

    @classmethod
    def from_dict(cls, d):
        part = dyadic_partition(int(d["N"]))
        U = tuple(np.asarray(u, dtype=np.float64).reshape(st.n_coarse, st.n_details)
                  for u, st in zip(d["update_ops"], part.stages))
        P = tuple(np.asarray(p, dtype=np.float64).reshape(st.n_details, st.n_coarse)
                  for p, st in zip(d["predict_ops"], part.stages))
        hist = tuple(tuple(h) for h in d.get("history", []))
        return cls(part, U, P, hist)


def _lift_level(stage, U, P, a_fine):
    a_t, d_t = _ht_split(stage, a_fine)
    a = a_t + U @ d_t
    d = d_t - P @ a
    return a, d


def lift_forward(w: LiftedWavelets, x):
    """Analysis transform; ``x`` in embedding order, one signal per column if 2-D."""
    x = np.asarray(x, dtype=np.float64)
    part = w.partition
    _check_len(part, x)
    details = [None] * part.l_max
    a = x
    for l in range(part.l_max - 1, -1, -1):
        a, details[l] = _lift_level(part.stages[l], w.update_ops[l], w.predict_ops[l], a)
    return pack(a, details)


def lift_inverse(w: LiftedWavelets, s):
    part = w.partition
    a, details = unpack(part, s)
    for l in range(part.l_max):
        d_t = details[l] + w.predict_ops[l] @ a
        a_t = a - w.update_ops[l] @ d_t
        a = _ht_merge(part.stages[l], a_t, d_t)
    return a


def sparse_penalty(t, epsilon):
    return np.sqrt(t * t + epsilon)


def _level_objective(resid, epsilon):
    return float(np.sum(sparse_penalty(resid, epsilon)))


def operator_masks(stage, bandwidth):
    """Sparsity patterns ``(U_mask, P_mask)`` for one level.

    Detail ``i`` sits under coarse segment ``parent[i]``; it may interact with
    coarse segments whose index differs by at most ``bandwidth``.  ``None``
    leaves the operators dense.
    """
    if bandwidth is None:
        return (np.ones((stage.n_coarse, stage.n_details), dtype=bool),
                np.ones((stage.n_details, stage.n_coarse), dtype=bool))
    dist = np.abs(stage.parent[:, None] - np.arange(stage.n_coarse)[None, :])
    P_mask = dist <= bandwidth
    return P_mask.T.copy(), P_mask


def train_lifting(partition: HierarchicalPartition, training_fields, epsilon=1e-4, step=1.0,
                  iters=200, bandwidth=None, max_halvings=60, growth=1.25) -> LiftedWavelets:
    """Learn ``U[l], P[l]`` greedily from the finest level to the coarsest.

    Level ``l`` minimises ``sum sqrt(d_l**2 + epsilon)`` over the training set,
    where ``d_l = d~ - P (a~ + U d~)`` and ``(a~, d~)`` is the Haar split of
    the already-lifted level ``l + 1`` approximations.  Full-batch gradient
    descent starts from zero operators; a step that raises the objective is
    halved and retried, an accepted step is grown by ``growth``.  ``step`` is
    relative to a curvature bound of the level objective.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    X = np.column_stack([np.asarray(f, dtype=np.float64) for f in training_fields])
    _check_len(partition, X)
    U_ops, P_ops = [None] * partition.l_max, [None] * partition.l_max
    history = [None] * partition.l_max
    a_fine = X
    sqrt_eps = math.sqrt(epsilon)
    for l in range(partition.l_max - 1, -1, -1):
        stage = partition.stages[l]
        A_t, D_t = _ht_split(stage, a_fine)
        U = np.zeros((stage.n_coarse, stage.n_details))
        P = np.zeros((stage.n_details, stage.n_coarse))
        U_mask, P_mask = operator_masks(stage, bandwidth)

        def resid(U, P):
            return D_t - P @ (A_t + U @ D_t)

        R = resid(U, P)
        obj = _level_objective(R, epsilon)
        hist = [obj]
        curv = (np.sum(A_t**2) + np.sum(D_t**2)) / sqrt_eps
        t = step / max(curv, 1e-300)
        for _ in range(iters):
            G = R / sparse_penalty(R, epsilon)
            feat = A_t + U @ D_t
            gP = -(G @ feat.T) * P_mask
            gU = -((P.T @ G) @ D_t.T) * U_mask
            if not (np.all(np.isfinite(gP)) and np.all(np.isfinite(gU))):
                raise TrainingDivergedError(l)
            gnorm2 = float(np.sum(gP**2) + np.sum(gU**2))
            if gnorm2 == 0.0:
                break
            for _h in range(max_halvings):
                U_new = U - t * gU
                P_new = P - t * gP
                R_new = resid(U_new, P_new)
                obj_new = _level_objective(R_new, epsilon)
                if np.isfinite(obj_new) and obj_new <= obj:
                    break
                t *= 0.5
            else:
                break
            U, P, R, obj = U_new, P_new, R_new, obj_new
            hist.append(obj)
            t *= growth
        U_ops[l], P_ops[l] = U, P
        history[l] = tuple(hist)
        a_fine = A_t + U @ D_t
        log.debug("level %d: objective %.6g -> %.6g", l, hist[0], hist[-1])
    return LiftedWavelets(partition, tuple(U_ops), tuple(P_ops), tuple(history))
