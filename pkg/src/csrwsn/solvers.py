"""Sparse recovery of ``s`` from ``y = A s`` (``A = Phi @ Psi``) and field synthesis."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .kernels import admm_basis_pursuit

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Sl0Params:
    sigma_decrease: float = 0.7
    mu: float = 2.0
    inner_iters: int = 3
    sigma_min_ratio: float = 1e-4

    def __post_init__(self):
        if not 0 < self.sigma_decrease < 1:
            raise ValueError("sigma_decrease must lie in (0, 1)")
        if not self.mu > 0:
            raise ValueError("mu must be > 0")
        if self.inner_iters < 1:
            raise ValueError("inner_iters must be >= 1")
        if not self.sigma_min_ratio > 0:
            raise ValueError("sigma_min_ratio must be > 0")


@dataclass(frozen=True, eq=False)
class SparseSolution:
    s: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    degenerate: bool = False

    def recompute_residual(self, A, y):
        return float(np.linalg.norm(A @ self.s - y))

    @property
    def l1(self):
        return float(np.sum(np.abs(self.s)))


def _pseudo_inverse(A):
    """``A^T (A A^T)^-1``, falling back to ``pinv`` when ``A A^T`` is singular.

    Routing matrices repeat rows whenever two packets share a path.
    """
    m = A.shape[0]
    if np.linalg.matrix_rank(A) < m:
        return np.linalg.pinv(A), True
    gram = A @ A.T
    try:
        L = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        return np.linalg.pinv(A), True
    Z = np.linalg.solve(L.T, np.linalg.solve(L, A))
    return Z.T, False


def _prepare(A, y):
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if A.shape[0] != y.shape[0]:
        raise ValueError("A and y disagree on the number of measurements")
    if A.shape[0] < 1:
        raise ValueError("at least one measurement is required")
    return A, y


def sl0_solve(A, y, params=None) -> SparseSolution:
    """Smoothed-l0 minimisation with graduated sigma and feasibility projection."""
    params = params or Sl0Params()
    A, y = _prepare(A, y)
    A_pinv, degenerate = _pseudo_inverse(A)
    if degenerate:
        log.warning("degenerate measurement operator: using pseudo-inverse")
    s = A_pinv @ y
    if not np.any(s):
        return SparseSolution(s, float(np.linalg.norm(A @ s - y)), 0, True, degenerate)
    sigma0 = 2.0 * np.max(np.abs(s))
    sigma = sigma0
    outer = 0
    while sigma >= params.sigma_min_ratio * sigma0:
        two_s2 = 2.0 * sigma * sigma
        for _ in range(params.inner_iters):
            s = s - params.mu * (s * np.exp(-(s * s) / two_s2))
            s = s - A_pinv @ (A @ s - y)
        sigma *= params.sigma_decrease
        outer += 1
    resid = float(np.linalg.norm(A @ s - y))
    return SparseSolution(s, resid, outer, True, degenerate)


def _l1_certificate(A, s, support, tol=1e-9):
    """Dual certificate for basis-pursuit optimality of ``s``.

    Looks for ``nu`` with ``A_S^T nu = sign(s_S)`` and ``|A^T nu| <= 1``; a
    least-squares ``nu`` is tried, so a failed check is inconclusive.
    """
    if support.size == 0:
        return True
    sgn = np.sign(s[support])
    nu, *_ = np.linalg.lstsq(A[:, support].T, sgn, rcond=None)
    if np.max(np.abs(A[:, support].T @ nu - sgn)) > 1e-8:
        return False
    return bool(np.max(np.abs(A.T @ nu)) <= 1.0 + tol)


def _polish(A, y, z, feas_tol):
    """Best feasible least-squares refit over candidate supports of ``z``.

    Candidates are the thresholded support and the top-``r`` entries by
    magnitude for ``r = 1..rows``; basis-pursuit optima are attained on a
    support of at most ``rows`` columns.
    """
    scale = np.max(np.abs(z))
    if scale == 0:
        return None
    by_mag = np.argsort(-np.abs(z), kind="stable")
    cands = [np.flatnonzero(np.abs(z) > 1e-7 * scale)]
    cands += [np.sort(by_mag[:r]) for r in range(1, min(A.shape) + 1)]
    best = None
    for support in cands:
        if support.size == 0 or support.size > A.shape[0]:
            continue
        coef, *_ = np.linalg.lstsq(A[:, support], y, rcond=None)
        s = np.zeros(A.shape[1])
        s[support] = coef
        if np.linalg.norm(A @ s - y) > feas_tol:
            continue
        if best is None or np.sum(np.abs(s)) < np.sum(np.abs(best)):
            best = s
    if best is None:
        return None
    return best, np.flatnonzero(best)


def l1_solve(A, y, tol=1e-6, max_iters=20000) -> SparseSolution:
    """Basis pursuit ``min ||s||_1 s.t. A s = y`` by ADMM plus support polishing.

    ADMM alternates an exact projection onto ``{s : A s = y}`` with
    soft-thresholding.  The support of the thresholded iterate is then
    re-fit by least squares; the polished point replaces the ADMM iterate
    when it is feasible and no worse in l1.  ``converged`` is set when ADMM
    met its stopping rule or the polished point carries a dual optimality
    certificate.
    """
    if not tol > 0:
        raise ValueError("tol must be > 0")
    A, y = _prepare(A, y)
    K = A.shape[1]
    A_pinv, degenerate = _pseudo_inverse(A)
    scale = max(1.0, float(np.linalg.norm(y)))
    feas_tol = tol * scale
    x_ls = A_pinv @ y
    if not np.any(x_ls):
        s = np.zeros(K)
        return SparseSolution(s, float(np.linalg.norm(A @ s - y)), 0, True, degenerate)
    proj = np.eye(K) - A_pinv @ A
    rho = 1.0 / max(float(np.mean(np.abs(x_ls))), 1e-300)
    abstol = 1e-3 * tol * float(np.max(np.abs(x_ls)))
    x, z, iters, converged = admm_basis_pursuit(proj, x_ls, rho, max_iters, abstol, 1e-2 * tol)
    best = x
    pol = _polish(A, y, z, feas_tol)
    if pol is not None:
        s_pol, support = pol
        if np.sum(np.abs(s_pol)) <= np.sum(np.abs(best)) * (1 + 1e-12) or np.linalg.norm(
            A @ best - y
        ) > feas_tol:
            best = s_pol
            if _l1_certificate(A, s_pol, support):
                converged = True
    resid = float(np.linalg.norm(A @ best - y))
    return SparseSolution(best, resid, int(iters), bool(converged), degenerate)


def solve(name, A, y, sl0_params=None, tol=1e-6, max_iters=20000) -> SparseSolution:
    if name == "sl0":
        return sl0_solve(A, y, sl0_params)
    if name == "l1":
        return l1_solve(A, y, tol=tol, max_iters=max_iters)
    raise ValueError(f"unknown solver {name!r}")


def recover_field(basis, s):
    """``x' = Psi s`` in node-column order."""
    return basis.synthesize(s)
