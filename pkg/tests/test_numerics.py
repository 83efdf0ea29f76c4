import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import lp_vertex_oracle, nnls_sign_oracle, simplex_grid_min
from trackkit.errors import ContractViolation, InfeasibleError
from trackkit.numerics import (
    ExactEnumerate,
    LinearProgram,
    LpStatus,
    QuadraticProgram,
    RelaxSelectReoptimize,
    SwapLocalSearch,
    constraint_violation,
    nnls,
    parse_strategy,
    project_simplex,
    search_support,
    solve_lp,
    solve_qp,
    sym_eigen,
)


# -- LP -----------------------------------------------------------------------

def test_lp_vertex_by_inspection():
    sol = solve_lp(LinearProgram([1.0, 0.0], eq_lhs=[[1.0, 1.0]], eq_rhs=[1.0]))
    assert sol.status == LpStatus.OPTIMAL
    assert sol.objective == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(sol.x, [0.0, 1.0], atol=1e-12)


def test_lp_bound_active():
    sol = solve_lp(LinearProgram([-1.0], ub_lhs=[[1.0]], ub_rhs=[2.0]))
    assert sol.optimal
    assert sol.objective == pytest.approx(-2.0, abs=1e-12)


def test_lp_infeasible_and_unbounded():
    infeasible = LinearProgram([1.0, 1.0], eq_lhs=[[1.0, 1.0]], eq_rhs=[-1.0])
    assert solve_lp(infeasible).status == LpStatus.INFEASIBLE
    unbounded = LinearProgram([-1.0, 0.0], ub_lhs=[[0.0, 1.0]], ub_rhs=[1.0])
    assert solve_lp(unbounded).status == LpStatus.UNBOUNDED


def test_lp_free_and_boxed_variables():
    # min x - y  s.t. x + y = 1, -2 <= x <= 3, y free -> x = -2, y = 3
    lp = LinearProgram([1.0, -1.0], eq_lhs=[[1.0, 1.0]], eq_rhs=[1.0], lo=[-2.0, -np.inf], hi=[3.0, 5.0])
    sol = solve_lp(lp)
    assert sol.optimal
    np.testing.assert_allclose(sol.x, [-2.0, 3.0], atol=1e-10)


def random_lp(rng):
    n = int(rng.integers(2, 7))
    m_eq = int(rng.integers(0, 3))
    m_ub = int(rng.integers(1, 7 - m_eq))  # the bounding row is one of these
    A_ub = rng.normal(size=(m_ub, n))
    A_ub[-1] = np.abs(A_ub[-1]) + 0.1  # positive row keeps the polytope bounded
    A_eq = rng.normal(size=(m_eq, n)) if m_eq else None
    if rng.random() < 0.8:
        x0 = rng.random(n) * rng.integers(0, 2, size=n)
        b_ub = A_ub @ x0 + rng.random(m_ub) * rng.integers(0, 2, size=m_ub)
        b_eq = A_eq @ x0 if m_eq else None
    else:
        b_ub = rng.normal(size=m_ub)
        b_ub[-1] = abs(b_ub[-1])
        b_eq = rng.normal(size=m_eq) if m_eq else None
    c = rng.normal(size=n)
    return c, A_ub, b_ub, A_eq, b_eq


def run_lp_oracle_suite(n_instances=100, seed=2024):
    rng = np.random.default_rng(seed)
    checked = mismatches = 0
    for _ in range(n_instances):
        c, A_ub, b_ub, A_eq, b_eq = random_lp(rng)
        want, _ = lp_vertex_oracle(c, A_ub, b_ub, A_eq, b_eq)
        sol = solve_lp(LinearProgram(c, eq_lhs=A_eq, eq_rhs=b_eq, ub_lhs=A_ub, ub_rhs=b_ub))
        if want is None:
            mismatches += sol.status != LpStatus.INFEASIBLE
            continue
        checked += 1
        if not (sol.optimal and abs(sol.objective - want) <= 1e-8 * max(1.0, abs(want))):
            mismatches += 1
    return checked, mismatches


def test_lp_matches_vertex_enumeration():
    checked, mismatches = run_lp_oracle_suite()
    assert checked >= 60
    assert mismatches == 0


def test_lp_solution_feasible_to_tolerance():
    rng = np.random.default_rng(5)
    for _ in range(30):
        c, A_ub, b_ub, A_eq, b_eq = random_lp(rng)
        lp = LinearProgram(c, eq_lhs=A_eq, eq_rhs=b_eq, ub_lhs=A_ub, ub_rhs=b_ub)
        sol = solve_lp(lp)
        if sol.optimal:
            assert constraint_violation(lp, sol.x) <= 1e-8


def test_lp_degenerate_problem_terminates():
    # many redundant constraints through the optimal vertex
    A = np.array([[1.0, 1.0], [1.0, 2.0], [2.0, 1.0], [1.0, 1.0], [3.0, 3.0]])
    b = np.array([1.0, 2.0, 2.0, 1.0, 3.0])
    sol = solve_lp(LinearProgram([-1.0, -1.0], ub_lhs=A, ub_rhs=b))
    assert sol.optimal
    assert sol.objective == pytest.approx(-1.0, abs=1e-12)


# -- simplex projection and QP ------------------------------------------------

def test_project_simplex_examples():
    np.testing.assert_allclose(project_simplex([0.5, 0.5, 0.5]), [1 / 3] * 3, atol=1e-12)
    np.testing.assert_allclose(project_simplex([1.0, 0.0, 0.0]), [1.0, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(project_simplex([2.0, -1.0]), [1.0, 0.0], atol=1e-12)


def test_project_simplex_grid_oracle():
    # dense grid over the feasible segment {(a, 1 - a)}
    v = np.array([0.9, 0.4])
    grid = np.linspace(0, 1, 100001)
    d = (grid - v[0]) ** 2 + (1 - grid - v[1]) ** 2
    a = grid[np.argmin(d)]
    np.testing.assert_allclose(project_simplex(v), [a, 1 - a], atol=1e-5)


def test_project_simplex_infeasible_box():
    with pytest.raises(InfeasibleError):
        project_simplex([0.2, 0.2], lo=0.0, hi=0.3)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=8),
       st.floats(0.0, 0.1), st.floats(0.5, 1.0))
def test_project_simplex_properties(v, lo, hi):
    n = len(v)
    if lo * n > 1 or hi * n < 1:
        return
    w = project_simplex(np.array(v), lo, hi)
    assert abs(w.sum() - 1) <= 1e-10
    assert np.all(w >= lo) and np.all(w <= hi)
    # optimality: (v - w) is constant on the free coordinates
    free = (w > lo + 1e-9) & (w < hi - 1e-9)
    if free.sum() > 1:
        g = np.asarray(v)[free] - w[free]
        assert np.ptp(g) <= 1e-7


def test_qp_symmetric_uniform():
    res = solve_qp(QuadraticProgram(2 * np.eye(4), np.zeros(4)))
    np.testing.assert_allclose(res.x, 0.25, atol=1e-8)


def test_qp_diag_closed_form():
    res = solve_qp(QuadraticProgram(np.diag([1.0, 4.0]), np.zeros(2)))
    np.testing.assert_allclose(res.x, [0.8, 0.2], atol=1e-8)


def random_psd3(rng):
    r = int(rng.integers(1, 4))
    A = rng.normal(size=(3, r))
    return A @ A.T, rng.normal(size=3)


def test_qp_matches_simplex_grid():
    rng = np.random.default_rng(11)
    for _ in range(10):
        Q, q = random_psd3(rng)
        res = solve_qp(QuadraticProgram(Q, q))
        grid, _ = simplex_grid_min(Q, q)
        assert res.objective <= grid + 1e-10
        assert grid - res.objective <= 1e-5


def test_qp_support_restriction_and_feasibility():
    rng = np.random.default_rng(3)
    Q, q = random_psd3(rng)
    Q5 = np.eye(5)
    res = solve_qp(QuadraticProgram(Q5, -np.arange(5.0), support=np.array([0, 2])))
    assert res.x[[1, 3, 4]].sum() == 0.0
    assert abs(res.x.sum() - 1) <= 1e-10


def test_qp_non_psd_flagged():
    assert not QuadraticProgram(np.diag([1.0, -1.0]), np.zeros(2)).check_psd()
    assert QuadraticProgram(np.diag([1.0, 0.0]), np.zeros(2)).check_psd()


# -- NNLS ------------------------------------------------------------------------

def test_nnls_examples():
    np.testing.assert_allclose(nnls(np.eye(2), [1.0, -1.0]), [1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(nnls([[1.0], [1.0]], [1.0, 1.0]), [1.0], atol=1e-12)


def test_nnls_matches_sign_enumeration():
    rng = np.random.default_rng(99)
    for _ in range(30):
        A = rng.normal(size=(6, 3))
        b = rng.normal(size=6)
        np.testing.assert_allclose(nnls(A, b), nnls_sign_oracle(A, b), atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_nnls_kkt(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(8, 4))
    b = rng.normal(size=8)
    x = nnls(A, b)
    g = A.T @ (b - A @ x)
    assert np.all(x >= 0)
    assert np.all(g[x == 0] <= 1e-8)
    assert np.all(np.abs(g[x > 0]) <= 1e-8)


def test_nnls_dimension_mismatch():
    with pytest.raises(ContractViolation):
        nnls(np.eye(3), [1.0, 2.0])


# -- eigen ------------------------------------------------------------------------

def test_eigen_examples():
    vals, _ = sym_eigen(np.diag([3.0, 1.0]))
    np.testing.assert_allclose(vals, [3.0, 1.0])
    vals, vecs = sym_eigen(np.array([[2.0, 1.0], [1.0, 2.0]]))
    np.testing.assert_allclose(vals, [3.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(np.abs(vecs[:, 0]), [2 ** -0.5] * 2, atol=1e-12)


def test_eigen_reconstruction():
    rng = np.random.default_rng(0)
    for n in (5, 12):
        A = rng.normal(size=(n, n))
        M = A + A.T
        vals, V = sym_eigen(M)
        assert np.linalg.norm(V @ np.diag(vals) @ V.T - M) <= 1e-8
        np.testing.assert_allclose(V.T @ V, np.eye(n), atol=1e-10)
        np.testing.assert_allclose(M @ V, V * vals, atol=1e-8)
        assert np.all(np.diff(vals) <= 1e-12)


def test_eigen_rejects_asymmetric():
    with pytest.raises(ContractViolation):
        sym_eigen(np.array([[1.0, 2.0], [0.0, 1.0]]))


# -- cardinality selection ----------------------------------------------------

def _mse_solve_on(R, I):
    T, n = R.shape
    Q = (2 / T) * R.T @ R
    q = -(2 / T) * R.T @ I

    def solve_on(support):
        res = solve_qp(QuadraticProgram(Q, q, support=np.asarray(support), constant=I @ I / T))
        return res.objective, res.x
    return solve_on


def _sparse_instance(seed=0):
    rng = np.random.default_rng(seed)
    R = rng.normal(0, 0.01, size=(60, 6))
    I = 0.3 * R[:, 0] + 0.7 * R[:, 2]
    return R, I


def test_select_full_support_when_k_covers_universe():
    R, I = _sparse_instance()
    res = search_support(3, 3, _mse_solve_on(R[:, :3], I))
    assert res.status == "degenerate"
    np.testing.assert_array_equal(res.support, [0, 1, 2])


def test_exact_enumerate_finds_true_pair():
    R, I = _sparse_instance()
    res = search_support(6, 2, _mse_solve_on(R, I), ExactEnumerate())
    np.testing.assert_array_equal(res.support, [0, 2])
    assert res.objective <= 1e-14


def test_relax_select_finds_true_pair():
    R, I = _sparse_instance()
    res = search_support(6, 2, _mse_solve_on(R, I), RelaxSelectReoptimize())
    np.testing.assert_array_equal(res.support, [0, 2])


def test_strategy_ordering_on_random_instances():
    rng = np.random.default_rng(4)
    for trial in range(5):
        R = rng.normal(0, 0.01, size=(40, 8))
        I = R @ rng.dirichlet(np.ones(8)) + rng.normal(0, 0.002, 40)
        f = _mse_solve_on(R, I)
        ex = search_support(8, 3, f, ExactEnumerate())
        rsr = search_support(8, 3, f, RelaxSelectReoptimize())
        sw = search_support(8, 3, f, SwapLocalSearch(), seed=trial)
        assert ex.objective <= rsr.objective + 1e-12
        assert ex.objective <= sw.objective + 1e-12
        assert sw.objective <= rsr.objective + 1e-12


def test_selection_deterministic_given_seed():
    R, I = _sparse_instance(7)
    f = _mse_solve_on(R, I)
    a = search_support(6, 3, f, SwapLocalSearch(), seed=5)
    b = search_support(6, 3, f, SwapLocalSearch(), seed=5)
    np.testing.assert_array_equal(a.support, b.support)
    assert a.objective == b.objective


def test_branch_and_bound_agrees_with_brute_force():
    rng = np.random.default_rng(12)
    R = rng.normal(0, 0.01, size=(50, 14))
    I = R @ rng.dirichlet(np.ones(14)) + rng.normal(0, 0.001, 50)
    f = _mse_solve_on(R, I)
    brute = search_support(14, 4, f, ExactEnumerate(brute_limit=10**6))
    bnb = search_support(14, 4, f, ExactEnumerate(brute_limit=10))
    assert math.comb(14, 4) > 10
    assert bnb.objective == pytest.approx(brute.objective, rel=1e-9, abs=1e-15)


def test_parse_strategy():
    assert isinstance(parse_strategy(None), RelaxSelectReoptimize)
    assert parse_strategy({"name": "SwapLocalSearch", "max_sweeps": 3}).max_sweeps == 3
    assert isinstance(parse_strategy("ExactEnumerate"), ExactEnumerate)
    with pytest.raises(ContractViolation):
        parse_strategy("Annealing")
