import numpy as np
import pytest

from csrwsn.basis import baseline_basis
from csrwsn.solvers import Sl0Params, l1_solve, recover_field, sl0_solve, solve

from oracles import bp_vertex_oracle, support


def test_sl0_identity():
    y = np.array([3.0, -1.0, 0.0, 2.5])
    sol = sl0_solve(np.eye(4), y)
    assert np.allclose(sol.s, y, atol=1e-12)
    assert sol.converged and not sol.degenerate


def test_zero_measurements_give_zero():
    A = np.random.default_rng(0).standard_normal((3, 6))
    for fn in (sl0_solve, l1_solve):
        sol = fn(A, np.zeros(3))
        assert not sol.s.any()


def test_sl0_feasibility_and_residual_contract():
    rng = np.random.default_rng(1)
    for _ in range(50):
        A = rng.standard_normal((8, 20))
        y = rng.standard_normal(8)
        sol = sl0_solve(A, y)
        assert np.linalg.norm(A @ sol.s - y) <= 1e-8 * np.linalg.norm(y)
        assert abs(sol.recompute_residual(A, y) - sol.residual_norm) <= 1e-12


def test_sl0_support_recovery_gaussian():
    # K=20, M'=10, 2-sparse, unit-norm columns, amplitudes +-[1, 2]
    # pinned after the oracle run on these seeds: 95/100
    hits = 0
    for i in range(100):
        rng = np.random.default_rng(i)
        A = rng.standard_normal((10, 20))
        A /= np.linalg.norm(A, axis=0)
        s0 = np.zeros(20)
        sup = rng.choice(20, 2, replace=False)
        s0[sup] = rng.choice([-1, 1], 2) * (1 + rng.random(2))
        hits += support(sl0_solve(A, A @ s0).s) == frozenset(sup.tolist())
    assert hits >= 95


def test_sl0_degenerate_operator_flagged():
    A = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0]])
    sol = sl0_solve(A, np.array([2.0, 2.0]))
    assert sol.degenerate
    assert np.allclose(A @ sol.s, [2.0, 2.0])


def test_sl0_params_validation():
    for kw in (dict(sigma_decrease=1.0), dict(mu=0.0), dict(inner_iters=0),
               dict(sigma_min_ratio=0.0)):
        with pytest.raises(ValueError):
            Sl0Params(**kw)


def test_l1_identity():
    y = np.array([1.0, -2.0, 0.5])
    sol = l1_solve(np.eye(3), y)
    assert np.allclose(sol.s, y, atol=1e-9)
    assert sol.converged


def test_l1_one_row_example():
    sol = l1_solve(np.array([[1.0, 2.0]]), np.array([2.0]))
    assert np.allclose(sol.s, [0.0, 1.0], atol=1e-8)
    assert sol.l1 == pytest.approx(1.0, abs=1e-8)


def test_l1_matches_vertex_oracle():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        K = int(rng.integers(2, 9))
        M = int(rng.integers(1, min(4, K - 1) + 1))
        A = rng.standard_normal((M, K))
        y = rng.standard_normal(M)
        opt, _ = bp_vertex_oracle(A, y)
        sol = l1_solve(A, y)
        assert sol.residual_norm <= 1e-6 * max(1.0, np.linalg.norm(y))
        worst = max(worst, abs(sol.l1 - opt) / opt)
    assert worst <= 1e-6


def test_l1_binary_routing_operator():
    # 0/1 path rows with a repeated row (two packets on one path)
    A = np.array([[1, 1, 0, 0, 0], [1, 0, 1, 1, 0], [1, 1, 0, 0, 0], [0, 0, 1, 0, 1]], float)
    y = A @ np.array([0.0, 2.0, 0.0, 0.0, -1.0])
    sol = l1_solve(A, y)
    assert sol.degenerate
    opt, _ = bp_vertex_oracle(A[[0, 1, 3]], y[[0, 1, 3]])
    assert sol.l1 == pytest.approx(opt, rel=1e-6)


def test_l1_tol_validation():
    with pytest.raises(ValueError):
        l1_solve(np.eye(2), np.ones(2), tol=0.0)


def test_solvers_deterministic():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((6, 15))
    y = rng.standard_normal(6)
    for name in ("l1", "sl0"):
        a, b = solve(name, A, y), solve(name, A, y)
        assert np.array_equal(a.s, b.s)
    with pytest.raises(ValueError):
        solve("omp", A, y)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        l1_solve(np.eye(3), np.ones(2))


def test_recover_field():
    b = baseline_basis("dct", 6)
    x = np.random.default_rng(0).standard_normal(6)
    assert np.allclose(recover_field(b, b.forward(x)), x, atol=1e-8)
    assert not recover_field(b, np.zeros(6)).any()
    ident = baseline_basis("diff", 1)
    assert recover_field(ident, np.array([4.0])).tolist() == [4.0]
    with pytest.raises(ValueError):
        recover_field(b, np.zeros(5))
