"""Regression, sparse-regression, cointegration and factor trackers."""

from dataclasses import dataclass, field

import numpy as np

from ..core import Portfolio, finalize_weights, uniform_on
from ..errors import ContractViolation, InfeasibleError, SolverError
from ..numerics import (
    LinearProgram,
    QuadraticProgram,
    nnls,
    search_support,
    solve_lp,
    solve_qp,
    sym_eigen,
)
from ..numerics import tolerances
from .adf import adf_test
from .optimization import mse_objective


# -- regression lines -----------------------------------------------------------

@dataclass
class RegressionLine:
    alpha: np.ndarray
    beta: np.ndarray
    tau: object = "mean"


def fit_lines_ols(R, I):
    """Per-asset OLS of ``r_it`` on ``I_t`` with intercept."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    I = np.asarray(I, dtype=float).ravel()
    Ic = I - I.mean()
    sxx = Ic @ Ic
    if sxx == 0:
        raise ContractViolation("index returns have no variation")
    beta = Ic @ (R - R.mean(axis=0)) / sxx
    alpha = R.mean(axis=0) - beta * I.mean()
    return RegressionLine(alpha, beta, "mean")


def quantile_line(r, I, tau=0.5):
    """Quantile regression of ``r`` on ``I`` via the LP dual.

    The dual is ``max r'a  s.t.  sum a = 0, I'a = 0, tau - 1 <= a <= tau``
    (two rows, T bounded columns); the intercept and slope are minus its
    row multipliers.
    """
    r = np.asarray(r, dtype=float)
    T = r.size
    lp = LinearProgram(-r, eq_lhs=np.vstack([np.ones(T), I]), eq_rhs=[0.0, 0.0],
                       lo=np.full(T, tau - 1.0), hi=np.full(T, tau))
    sol = solve_lp(lp)
    if not sol.optimal:
        raise SolverError(f"quantile LP ended with status {sol.status.value}", model="QR")
    a, b = -sol.eq_duals
    return float(a), float(b)


def check_loss(u, tau):
    u = np.asarray(u, dtype=float)
    return float(np.sum(np.where(u >= 0, tau * u, (tau - 1.0) * u)))


def fit_lines_quantile(R, I, tau=0.5):
    """Per-asset tau-quantile lines of asset returns on index returns."""
    if not 0 < tau < 1:
        raise ContractViolation("tau must lie in (0, 1)")
    R = np.atleast_2d(np.asarray(R, dtype=float))
    I = np.asarray(I, dtype=float).ravel()
    if np.ptp(I) == 0:
        raise ContractViolation("index returns have no variation")
    coef = np.array([quantile_line(R[:, i], I, tau) for i in range(R.shape[1])])
    return RegressionLine(coef[:, 0], coef[:, 1], tau)


# -- two-stage intercept/slope programs ----------------------------------------

def _stage1_lp(alpha, lo, hi):
    k = alpha.size
    c = np.zeros(k + 1)
    c[k] = 1.0
    ub = np.array([np.append(alpha, -1.0), np.append(-alpha, -1.0)])
    return LinearProgram(c, eq_lhs=np.append(np.ones(k), 0.0)[None, :], eq_rhs=[1.0],
                         ub_lhs=ub, ub_rhs=[0.0, 0.0], lo=np.append(lo, 0.0), hi=np.append(hi, np.inf))


def _stage2_lp(alpha, beta, alpha_opt, lo, hi):
    k = alpha.size
    c = np.zeros(k + 1)
    c[k] = 1.0
    ub = np.array([np.append(beta, -1.0), np.append(-beta, -1.0)])
    eq = np.array([np.append(np.ones(k), 0.0), np.append(alpha, 0.0)])
    return LinearProgram(c, eq_lhs=eq, eq_rhs=[1.0, alpha_opt], ub_lhs=ub, ub_rhs=[1.0, -1.0],
                         lo=np.append(lo, 0.0), hi=np.append(hi, np.inf))


def _two_stage(lines, K, model, strategy, seed, lo, hi):
    alpha, beta = np.asarray(lines.alpha, float), np.asarray(lines.beta, float)
    n = alpha.size
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,))

    def stage1(support):
        if lo[support].sum() > 1 + 1e-12 or hi[support].sum() < 1 - 1e-12:
            raise InfeasibleError("bounds cannot reach the budget")
        sol = solve_lp(_stage1_lp(alpha[support], lo[support], hi[support]))
        if not sol.optimal:
            raise InfeasibleError(f"stage-1 LP status {sol.status.value}")
        w = np.zeros(n)
        w[support] = sol.x[:-1]
        return abs(float(w @ alpha)), w

    try:
        res = search_support(n, K, stage1, strategy, seed, zero_lower=bool(np.all(lo == 0)))
    except InfeasibleError as exc:
        raise SolverError(str(exc), model=model, status="Infeasible") from None
    w1 = finalize_weights(res.weights, K)
    support = np.flatnonzero(w1)
    alpha_opt = float(w1 @ alpha)
    sol = solve_lp(_stage2_lp(alpha[support], beta[support], alpha_opt, lo[support], hi[support]))
    if sol.optimal:
        w = np.zeros(n)
        w[support] = sol.x[:-1]
        w = finalize_weights(w, K)
    else:
        w = w1
    return Portfolio(w, abs(float(w @ beta) - 1.0), model, status=res.status,
                     info={"d": abs(float(w @ alpha)), "alpha_opt": alpha_opt, "stage1_support": support.tolist()})


def lsr_two_stage(lines, K, strategy=None, seed=0, lo=0.0, hi=1.0):
    """Least-squares lines: minimise |portfolio intercept|, then |slope - 1|.

    Stage 2 keeps the stage-1 support and pins the intercept to its stage-1
    value; the reported objective is the stage-2 slope gap ``e``.
    """
    return _two_stage(lines, K, "LSR", strategy, seed, lo, hi)


def qr_two_stage(lines, K, strategy=None, seed=0, lo=0.0, hi=1.0):
    """Quantile-regression lines through the same two-stage programme."""
    return _two_stage(lines, K, "QR", strategy, seed, lo, hi)


# -- non-negative lasso / elastic net --------------------------------------------

def _lipschitz(G):
    v = np.ones(G.shape[0]) / np.sqrt(G.shape[0])
    lam = 0.0
    for _ in range(200):
        u = G @ v
        nu = np.linalg.norm(u)
        if nu == 0:
            return 0.0
        v = u / nu
        if abs(nu - lam) <= 1e-10 * nu:
            break
        lam = nu
    return nu


def penalized_nonneg(G, c, lam1, lam2=0.0, w0=None, L=None, tol=1e-13, max_iter=50_000):
    """``min w'Gw - 2c'w + lam1 sum(w) + lam2 w'w  s.t.  w >= 0`` by accelerated
    proximal gradient with adaptive restart.

    With ``G = R'R/T`` and ``c = R'I/T`` the smooth part is the mean squared
    tracking error up to a constant; the prox of the l1 term on the
    nonnegative orthant is a one-sided soft threshold.
    """
    n = c.size
    if L is None:
        L = _lipschitz(G)
    step = 1.0 / (2.0 * (1.01 * L + lam2) + 1e-300)
    w = np.zeros(n) if w0 is None else np.maximum(np.asarray(w0, float), 0.0)
    z, t = w.copy(), 1.0
    for _ in range(max_iter):
        grad = 2.0 * (G @ z - c) + 2.0 * lam2 * z
        w_new = np.maximum(z - step * (grad + lam1), 0.0)
        delta = w_new - w
        if np.max(np.abs(delta)) <= tol * max(1.0, np.max(np.abs(w_new))):
            w = w_new
            break
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        if (z - w_new) @ delta > 0:
            # momentum points uphill: restart
            t_new, z = 1.0, w_new.copy()
        else:
            z = w_new + ((t - 1.0) / t_new) * delta
        w, t = w_new, t_new
    return w


def _active(w):
    return np.flatnonzero(w > tolerances.SUPPORT)


def _bisect_lambda(G, c, K, lam2=0.0, lam_max=100.0, iters=60):
    L = _lipschitz(G)
    path = []

    def support_at(lam, w0=None):
        w = penalized_nonneg(G, c, lam, lam2, w0=w0, L=L)
        s = _active(w)
        path.append((lam, int(s.size)))
        return s, w

    hi = float(lam_max)
    s_hi, w_hi = support_at(hi)
    while s_hi.size > K:
        hi *= 2.0
        if hi > 1e300:
            raise SolverError("lambda bracket overflowed", model="NNL")
        s_hi, w_hi = support_at(hi)
    lo = 0.0
    best = (hi, s_hi)
    w_warm = w_hi
    for _ in range(iters):
        if best[1].size == K:
            break
        mid = 0.5 * (lo + hi)
        s, w = support_at(mid, w_warm)
        if s.size <= K:
            hi, w_warm = mid, w
            if s.size >= best[1].size:
                best = (mid, s)
        else:
            lo = mid
    return best[1], best[0], path


def _gram(R, I):
    T = R.shape[0]
    return R.T @ R / T, R.T @ I / T


def nnl_select(R, I, K, lam_max=100.0):
    """Support of at most K assets from the non-negative lasso, lambda by bisection.

    Returns ``(support, lambda, path)`` where ``path`` lists every evaluated
    ``(lambda, support size)``.
    """
    R = np.atleast_2d(np.asarray(R, float))
    I = np.asarray(I, float).ravel()
    if K >= R.shape[1]:
        return np.arange(R.shape[1]), 0.0, []
    G, c = _gram(R, I)
    return _bisect_lambda(G, c, K, 0.0, lam_max)


def refit_nnls_weights(R, I, support, model="NNL"):
    """NNLS on the support columns, normalised; uniform on the support if the fit vanishes."""
    R = np.atleast_2d(np.asarray(R, float))
    I = np.asarray(I, float).ravel()
    support = np.asarray(support, dtype=int)
    n = R.shape[1]
    if support.size == 0:
        raise SolverError("empty support", model=model)
    beta = nnls(R[:, support], I)
    status = "ok"
    if beta.sum() <= 1e-12:
        w = uniform_on(support, n)
        status = "uniform-fallback"
    else:
        w = np.zeros(n)
        w[support] = beta / beta.sum()
        w = finalize_weights(w)
    return Portfolio(w, mse_objective(R, I, w), model, status=status)


def nnen_select(R, I, K, lambda2_grid=(0.0, 0.01, 0.1, 1.0), lam_max=100.0):
    """Elastic-net support: bisection over lambda1 for each lambda2 in the grid.

    The pair whose NNLS refit has the lowest in-sample MSE wins (first in grid
    order on ties).  Returns ``(support, lambda1, lambda2)``.
    """
    R = np.atleast_2d(np.asarray(R, float))
    I = np.asarray(I, float).ravel()
    if K >= R.shape[1]:
        return np.arange(R.shape[1]), 0.0, float(lambda2_grid[0])
    G, c = _gram(R, I)
    best = None
    for lam2 in lambda2_grid:
        s, lam1, _ = _bisect_lambda(G, c, K, float(lam2), lam_max)
        if s.size == 0:
            continue
        err = refit_nnls_weights(R, I, s).objective
        if best is None or err < best[0]:
            best = (err, s, lam1, float(lam2))
    if best is None:
        raise SolverError("every lambda2 produced an empty support", model="NNEN")
    return best[1], best[2], best[3]


def track_nnl(R, I, K, lam_max=100.0):
    s, lam, path = nnl_select(R, I, K, lam_max)
    port = refit_nnls_weights(R, I, s, "NNL")
    port.info.update(lambda1=lam, path_length=len(path))
    return port


def track_nnen(R, I, K, lambda2_grid=(0.0, 0.01, 0.1, 1.0), lam_max=100.0):
    s, lam1, lam2 = nnen_select(R, I, K, lambda2_grid, lam_max)
    port = refit_nnls_weights(R, I, s, "NNEN")
    port.info.update(lambda1=lam1, lambda2=lam2, lambda2_grid=list(lambda2_grid))
    return port


# -- cointegration ----------------------------------------------------------------

@dataclass
class CointFit:
    beta0: float
    beta: np.ndarray
    residuals: np.ndarray
    ssr: float
    support: np.ndarray


def coint_regression(log_prices, log_index, support):
    """OLS of log-index on a constant and the support's log-prices."""
    X = np.column_stack([np.ones(log_index.size), log_prices[:, support]])
    coef, *_ = np.linalg.lstsq(X, log_index, rcond=None)
    resid = log_index - X @ coef
    beta = np.zeros(log_prices.shape[1])
    beta[support] = coef[1:]
    return CointFit(float(coef[0]), beta, resid, float(resid @ resid), np.asarray(support))


def _beta_weights(beta, support):
    b = np.clip(beta, 0.0, None)
    if b.sum() <= 1e-12:
        return uniform_on(support, beta.size), True
    return finalize_weights(b), False


def coint_simulate(log_prices, log_index, K, iters=10_000, seed=0, max_lag=1, criterion="AIC"):
    """Random K-subsets, keep ADF-stationary residuals, pick the smallest SSR.

    Negative coefficients are clipped to zero before normalising.  When no
    subset passes, the smallest-SSR subset is returned with status
    ``no-cointegration``.
    """
    X = np.asarray(log_prices, float)
    y = np.asarray(log_index, float).ravel()
    n = X.shape[1]
    rng = np.random.default_rng(seed)
    best_pass, best_any = None, None
    passed = 0
    for _ in range(int(iters)):
        S = np.arange(n) if K >= n else np.sort(rng.choice(n, K, replace=False))
        fit = coint_regression(X, y, S)
        try:
            ok = adf_test(fit.residuals, max_lag, criterion).reject_unit_root
        except Exception:
            ok = False
        if best_any is None or fit.ssr < best_any.ssr:
            best_any = fit
        if ok:
            passed += 1
            if best_pass is None or fit.ssr < best_pass.ssr:
                best_pass = fit
    fit = best_pass if best_pass is not None else best_any
    w, fallback = _beta_weights(fit.beta, fit.support)
    status = "cointegrated" if best_pass is not None else "no-cointegration"
    return Portfolio(w, fit.ssr, "CointSim", status=status,
                     info={"subsets_passed": passed, "iters": int(iters), "beta0": fit.beta0,
                           "uniform_fallback": fallback})


def _box_ls(Xc, yc, support):
    """``min ||yc - Xc b||^2`` over ``0 <= b <= 1`` on the support columns."""
    A = Xc[:, support]
    b = nnls(A, yc)
    if b.max(initial=0.0) <= 1.0 + 1e-12:
        b = np.minimum(b, 1.0)
    else:
        qp = QuadraticProgram(2.0 * A.T @ A, -2.0 * A.T @ yc, 0.0, 1.0, budget=False, constant=float(yc @ yc))
        b = solve_qp(qp, tol=1e-12, x0=np.clip(b, 0, 1)).x
    r = yc - A @ b
    return float(r @ r), b


def coint_convex(log_prices, log_index, K, strategy=None, seed=0):
    """Nonnegative, capped cointegration regression with at most K names.

    ``beta_0`` is free (handled by centring), ``0 <= beta_i <= 1``, and the
    support search is delegated to the selection strategy.  Weights are the
    normalised coefficients.
    """
    X = np.asarray(log_prices, float)
    y = np.asarray(log_index, float).ravel()
    n = X.shape[1]
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()

    def solve_on(support):
        ssr, b = _box_ls(Xc, yc, support)
        beta = np.zeros(n)
        beta[support] = b
        return ssr, beta

    res = search_support(n, min(K, n), solve_on, strategy, seed)
    beta = res.weights
    support = np.flatnonzero(beta > tolerances.SUPPORT)
    if support.size == 0:
        corr = np.array([abs(np.corrcoef(Xc[:, i], yc)[0, 1]) if np.ptp(Xc[:, i]) > 0 else 0.0 for i in range(n)])
        support = np.sort(np.argsort(-corr, kind="stable")[:K])
    w, fallback = _beta_weights(beta, support)
    beta0 = float(y.mean() - X.mean(axis=0) @ beta)
    return Portfolio(w, res.objective, "CvxCoInt", status=res.status,
                     info={"beta0": beta0, "beta_sum": float(beta.sum()), "uniform_fallback": fallback,
                           "evaluations": res.evaluations})


# -- factor model -------------------------------------------------------------------

@dataclass
class FactorDecomposition:
    factors: np.ndarray
    loadings: np.ndarray
    r2: np.ndarray
    eigenvalues: np.ndarray = field(default=None)


def pca_factors(log_prices, k=5):
    """Principal factors of standardised log-prices and per-asset OLS R^2.

    Columns are centred and scaled to unit variance so each asset's R^2 is
    unchanged by rescaling its own log-price.  Constant columns get R^2 = 0.
    """
    X = np.asarray(log_prices, float)
    T, n = X.shape
    Xc = X - X.mean(axis=0)
    sd = Xc.std(axis=0, ddof=1) if T > 1 else np.zeros(n)
    live = sd > 0
    Z = np.zeros_like(Xc)
    Z[:, live] = Xc[:, live] / sd[live]
    C = Z.T @ Z / max(T - 1, 1)
    vals, vecs = sym_eigen(0.5 * (C + C.T))
    k = int(min(k, n))
    L = vecs[:, :k]
    F = Z @ L
    # OLS of each standardised column on F; F has orthogonal columns
    norms = np.einsum("ij,ij->j", F, F)
    keep = norms > 1e-12 * max(1.0, norms.max(initial=0.0))
    coef = np.zeros((k, n))
    coef[keep] = (F[:, keep].T @ Z) / norms[keep, None]
    fitted = F @ coef
    sst = np.einsum("ij,ij->j", Z, Z)
    sse = np.einsum("ij,ij->j", Z - fitted, Z - fitted)
    r2 = np.zeros(n)
    r2[live] = np.clip(1.0 - sse[live] / sst[live], 0.0, 1.0)
    return FactorDecomposition(F, coef.T, r2, vals[:k])


def factor_track(log_prices, R, I, k=5, K=45, qp_tol=1e-10):
    """Top-K assets by factor R^2 (ties to the lower index), then MSE weights."""
    R = np.atleast_2d(np.asarray(R, float))
    I = np.asarray(I, float).ravel()
    n = R.shape[1]
    dec = pca_factors(log_prices, k)
    # rounding keeps exact ties from being split by floating-point noise
    order = np.lexsort((np.arange(n), -np.round(dec.r2, 10)))
    S = np.sort(order[:min(K, n)])
    T = R.shape[0]
    qp = QuadraticProgram((2.0 / T) * R.T @ R, -(2.0 / T) * R.T @ I, 0.0, 1.0, support=S,
                          constant=float(I @ I) / T)
    w = finalize_weights(solve_qp(qp, tol=qp_tol).x, K)
    return Portfolio(w, mse_objective(R, I, w), "FBM", info={"selected": S.tolist(), "r2_min": float(dec.r2[S].min())})
