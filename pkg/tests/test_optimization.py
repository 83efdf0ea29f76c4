import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from trackkit.core import TrackingProblem, check_portfolio
from trackkit.errors import ContractViolation
from trackkit.models.optimization import (
    TmcvarParams,
    cvar,
    dminmax_objective,
    estimate_benchmark_weights,
    mad_objective,
    mad_primal_lp,
    madd_objective,
    minmax_objective,
    mse_objective,
    ses_objective,
    solve_dminmax,
    solve_mad,
    solve_madd,
    solve_minmax,
    solve_mse,
    solve_ses,
    solve_tev,
    solve_tmcvar,
    tmcvar_objective,
    tmcvar_primal_lp,
)
from trackkit.numerics import ExactEnumerate, solve_lp

EXACT = ExactEnumerate()
SOLVERS = {
    "MSE": (solve_mse, mse_objective),
    "SES": (solve_ses, ses_objective),
    "MAD": (solve_mad, mad_objective),
    "MADD": (solve_madd, madd_objective),
    "MinMax": (solve_minmax, minmax_objective),
    "DMinMax": (solve_dminmax, dminmax_objective),
}


def random_problem(seed, T=40, n=6, K=3, noise=0.002):
    rng = np.random.default_rng(seed)
    R = rng.normal(0.0005, 0.01, size=(T, n))
    I = R @ rng.dirichlet(np.ones(n)) + rng.normal(0, noise, T)
    return TrackingProblem(R, I, K)


def replicating_problem(seed=0, n=5, T=30):
    rng = np.random.default_rng(seed)
    R = rng.normal(0, 0.01, size=(T, n))
    return TrackingProblem(R, R[:, 0].copy(), 2)


@pytest.mark.parametrize("name", list(SOLVERS))
def test_replicating_asset_gives_zero(name):
    p = replicating_problem()
    port = SOLVERS[name][0](p, strategy=EXACT)
    check_portfolio(port, p.K)
    assert port.objective <= 1e-12
    if name in ("MSE", "MAD", "MinMax"):
        np.testing.assert_allclose(port.weights, np.eye(5)[0], atol=1e-8)


def test_tev_and_tmcvar_replication():
    p = replicating_problem()
    port = solve_tmcvar(p, strategy=EXACT)
    assert port.objective <= 1e-12
    port = solve_tev(p, b=np.eye(5)[0], strategy=EXACT)
    np.testing.assert_allclose(port.weights, np.eye(5)[0], atol=1e-8)
    assert port.objective <= 1e-14


def test_mse_two_asset_mix():
    rng = np.random.default_rng(1)
    R = rng.normal(0, 0.01, size=(50, 5))
    I = 0.6 * R[:, 1] + 0.4 * R[:, 3]
    port = solve_mse(TrackingProblem(R, I, 2), strategy=EXACT)
    np.testing.assert_allclose(port.weights, [0, 0.6, 0, 0.4, 0], atol=1e-7)
    assert port.objective <= 1e-14


def test_ses_linear_equation():
    R = np.array([[0.2, 0.05], [0.1, 0.05]])  # column sums 0.3 and 0.1
    I = np.array([0.15, 0.05])                # sum 0.2
    port = solve_ses(TrackingProblem(R, I, 2))
    np.testing.assert_allclose(port.weights, [0.5, 0.5], atol=1e-8)
    assert port.objective <= 1e-14


def test_ses_single_asset_matching_sum():
    rng = np.random.default_rng(2)
    R = rng.normal(0, 0.01, size=(20, 3))
    I = R[:, 2] + rng.normal(0, 0.001, 20)
    I += (R[:, 2].sum() - I.sum()) / 20
    port = solve_ses(TrackingProblem(R, I, 1), strategy=EXACT)
    assert port.objective <= 1e-14


def test_downside_models_zero_when_dominating():
    rng = np.random.default_rng(3)
    R = rng.normal(0, 0.01, size=(25, 4))
    I = R[:, 1] - np.abs(rng.normal(0, 0.002, 25))  # asset 1 beats the index every day
    p = TrackingProblem(R, I, 1)
    madd = solve_madd(p, strategy=EXACT)
    dmm = solve_dminmax(p, strategy=EXACT)
    assert madd.objective <= 1e-12 and dmm.objective <= 1e-12
    assert solve_mad(p, strategy=EXACT).objective > 1e-4
    assert solve_minmax(p, strategy=EXACT).objective > 1e-4


def _linprog_oracle(R, I, K, downside_only=False):
    """Brute-force supports, re-solve each primal LP with HiGHS."""
    n = R.shape[1]
    best = np.inf
    for S in itertools.combinations(range(n), K):
        lp = mad_primal_lp(R[:, S], I, np.zeros(K), np.ones(K), downside_only)
        res = linprog(lp.objective, A_ub=lp.ub_lhs, b_ub=lp.ub_rhs, A_eq=lp.eq_lhs, b_eq=lp.eq_rhs,
                      bounds=list(zip(lp.lo, lp.hi)), method="highs")
        best = min(best, res.fun)
    return best


@pytest.mark.parametrize("seed", range(5))
def test_mad_brute_force_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    R = rng.normal(0, 0.01, size=(4, 3))
    I = rng.normal(0, 0.01, size=4)
    p = TrackingProblem(R, I, 2)
    assert solve_mad(p, strategy=EXACT).objective == pytest.approx(_linprog_oracle(R, I, 2), abs=1e-10)
    assert solve_madd(p, strategy=EXACT).objective == pytest.approx(_linprog_oracle(R, I, 2, True), abs=1e-10)


@pytest.mark.parametrize("seed", range(3))
def test_minmax_grid_oracle(seed):
    rng = np.random.default_rng(200 + seed)
    R = rng.normal(0, 0.01, size=(3, 2))
    I = rng.normal(0, 0.01, size=3)
    p = TrackingProblem(R, I, 2)
    a = np.linspace(0, 1, 100001)
    W = np.column_stack([a, 1 - a])
    dev = W @ R.T - I
    assert solve_minmax(p).objective == pytest.approx(np.abs(dev).max(axis=1).min(), abs=1e-4)
    assert solve_dminmax(p).objective == pytest.approx(np.maximum(-dev, 0).max(axis=1).min(), abs=1e-4)


def test_tev_fixed_points():
    rng = np.random.default_rng(4)
    R = rng.normal(0, 0.01, size=(60, 4))
    b = np.array([0.4, 0.0, 0.6, 0.0])
    port = solve_tev(TrackingProblem(R, R @ b, 2), b=b, strategy=EXACT)
    np.testing.assert_allclose(port.weights, b, atol=1e-8)
    # identity covariance: whitened returns, uniform benchmark, K = n
    Z = rng.normal(size=(400, 3))
    Z -= Z.mean(axis=0)
    L = np.linalg.cholesky(np.cov(Z, rowvar=False))
    Z = Z @ np.linalg.inv(L).T
    np.testing.assert_allclose(np.cov(Z, rowvar=False), np.eye(3), atol=1e-12)
    port = solve_tev(TrackingProblem(Z, Z.mean(axis=1), 3), b=np.full(3, 1 / 3))
    np.testing.assert_allclose(port.weights, 1 / 3, atol=1e-8)


def test_tev_rejects_bad_benchmark():
    p = random_problem(0)
    with pytest.raises(ContractViolation):
        solve_tev(p, b=np.full(6, 0.5))


def test_benchmark_weights():
    rng = np.random.default_rng(5)
    R = rng.normal(0, 0.01, size=(200, 5))
    b, fb = estimate_benchmark_weights(TrackingProblem(R, R[:, 0].copy(), 2))
    np.testing.assert_allclose(b, np.eye(5)[0], atol=1e-10)
    assert not fb
    I = 0.5 * R[:, 1] + 0.5 * R[:, 2]
    b, _ = estimate_benchmark_weights(TrackingProblem(R, I, 2))
    np.testing.assert_allclose(b, [0, 0.5, 0.5, 0, 0], atol=1e-10)
    b, fb = estimate_benchmark_weights(TrackingProblem(R, np.zeros(200), 2))
    np.testing.assert_allclose(b, 0.2)
    assert fb


def test_tmcvar_symmetric_two_scenario():
    d = 0.013
    params = TmcvarParams(alphas=(0.5,), delta=0.5)
    p = TrackingProblem(np.zeros((2, 1)), [d, -d], 1)
    port = solve_tmcvar(p, params)
    assert port.objective == pytest.approx(d, abs=1e-12)
    assert cvar([d, -d], 0.5) == pytest.approx(d, abs=1e-15)


def test_cvar_matches_definition():
    rng = np.random.default_rng(6)
    L = rng.normal(size=17)
    betas = np.linspace(-4, 4, 200001)
    for a in (0.1, 0.5, 0.9):
        brute = np.min(betas + np.maximum(L[:, None] - betas, 0).sum(axis=0) / ((1 - a) * L.size))
        assert cvar(L, a) <= brute + 1e-12
        assert brute - cvar(L, a) <= 1e-4


def test_tmcvar_params_validation():
    assert TmcvarParams().alphas == (0.9, 0.75, 0.5, 0.1, 0.01)
    assert TmcvarParams().delta == 0.5
    with pytest.raises(ContractViolation):
        TmcvarParams(alphas=(1.0,))
    with pytest.raises(ContractViolation):
        TmcvarParams(alphas=(0.5, 0.6), lambdas_up=(0.2, 0.2))
    with pytest.raises(ContractViolation):
        TmcvarParams(delta=1.0)


def test_tmcvar_dual_matches_primal_program():
    rng = np.random.default_rng(7)
    R = rng.normal(0, 0.01, size=(15, 3))
    I = rng.normal(0, 0.01, size=15)
    params = TmcvarParams()
    lp = tmcvar_primal_lp(R, I, np.zeros(3), np.ones(3), params)
    ref = linprog(lp.objective, A_ub=lp.ub_lhs, b_ub=lp.ub_rhs, A_eq=lp.eq_lhs, b_eq=lp.eq_rhs,
                  bounds=list(zip(lp.lo, lp.hi)), method="highs")
    ours = solve_lp(lp)
    assert ours.objective == pytest.approx(ref.fun, abs=1e-10)
    port = solve_tmcvar(TrackingProblem(R, I, 3), params)
    assert port.objective == pytest.approx(ref.fun, abs=1e-10)


@pytest.mark.parametrize("seed", range(4))
def test_objective_consistency_and_dominance(seed):
    p = random_problem(seed)
    ports = {k: f(p, strategy=EXACT) for k, (f, _) in SOLVERS.items()}
    for k, (_, obj) in SOLVERS.items():
        check_portfolio(ports[k], p.K)
        assert ports[k].objective == pytest.approx(obj(p.R, p.I, ports[k].weights), abs=1e-8)
    params = TmcvarParams()
    port = solve_tmcvar(p, params, strategy=EXACT)
    assert port.objective == pytest.approx(tmcvar_objective(p.R, p.I, port.weights, params), abs=1e-8)
    # on a fixed support MAD >= MADD and MinMax >= DMinMax
    w = ports["MAD"].weights
    assert mad_objective(p.R, p.I, w) >= madd_objective(p.R, p.I, w)
    w = ports["MinMax"].weights
    assert minmax_objective(p.R, p.I, w) >= dminmax_objective(p.R, p.I, w)
    assert ports["MAD"].objective >= ports["MADD"].objective - 1e-12
    assert ports["MinMax"].objective >= ports["DMinMax"].objective - 1e-12


@pytest.mark.parametrize("name,power", [("MSE", 2), ("SES", 2), ("MAD", 1), ("MADD", 1),
                                        ("MinMax", 1), ("DMinMax", 1)])
def test_scale_equivariance(name, power):
    p = random_problem(11, T=30, n=5, K=2)
    c = 3.7
    a = SOLVERS[name][0](p, strategy=EXACT)
    b = SOLVERS[name][0](p.scaled(c), strategy=EXACT)
    assert b.objective == pytest.approx(c ** power * a.objective, rel=1e-7, abs=1e-15)
    if name == "SES":
        return  # rank-one objective: the minimiser set is a whole face, not a point
    np.testing.assert_array_equal(a.support, b.support)
    np.testing.assert_allclose(a.weights, b.weights, atol=1e-7)


def test_exact_attains_zero_on_sparse_instance():
    rng = np.random.default_rng(12)
    R = rng.normal(0, 0.01, size=(40, 8))
    I = R[:, [1, 4, 6]] @ np.array([0.2, 0.5, 0.3])
    p = TrackingProblem(R, I, 3)
    for name in ("MSE", "MAD", "MinMax"):
        assert SOLVERS[name][0](p, strategy=EXACT).objective <= 1e-12


def test_holding_bounds_respected():
    p = random_problem(13)
    p = TrackingProblem(p.R, p.I, 3, lo=0.0, hi=0.4)
    port = solve_mse(p, strategy=EXACT)
    assert port.weights.max() <= 0.4 + 1e-9
