"""The eight optimisation-based tracking models on one training window.

Each model builds ``solve_on(support)``, the continuous problem restricted to a
candidate support, and hands it to :func:`search_support` for the cardinality
constraint.  Reported objectives are always re-evaluated from the closed-form
tracking-error definitions at the final weights.
"""

from dataclasses import dataclass, field

import numpy as np

from ..core import Portfolio, finalize_weights, uniform_on
from ..errors import ContractViolation, InfeasibleError, SolverError
from ..numerics import LinearProgram, QuadraticProgram, nnls, search_support, solve_lp, solve_qp


# -- closed-form objectives ---------------------------------------------------

def mse_objective(R, I, w):
    e = I - R @ w
    return float(e @ e / e.size)


def ses_objective(R, I, w):
    return float(np.sum(I - R @ w) ** 2 / I.size)


def mad_objective(R, I, w):
    return float(np.mean(np.abs(R @ w - I)))


def madd_objective(R, I, w):
    return float(np.mean(np.maximum(I - R @ w, 0.0)))


def minmax_objective(R, I, w):
    return float(np.max(np.abs(R @ w - I)))


def dminmax_objective(R, I, w):
    return float(max(np.max(I - R @ w), 0.0))


def tev_objective(cov, b, w):
    x = w - b
    return float(x @ cov @ x)


def cvar(losses, alpha):
    """``min_beta beta + sum((L - beta)+) / ((1 - alpha) T)``, evaluated exactly.

    The function is piecewise linear in beta with kinks at the data, so the
    minimum sits at one of the observed losses.
    """
    L = np.sort(np.asarray(losses, dtype=float))[::-1]
    T = L.size
    csum = np.concatenate([[0.0], np.cumsum(L)])
    k = np.arange(T)
    excess = csum[k] - k * L          # sum of (L_i - L_k) over the k larger losses
    return float(np.min(L + excess / ((1.0 - alpha) * T)))


# -- parameters ---------------------------------------------------------------

@dataclass
class TmcvarParams:
    """Two-tail mixed CVaR settings; ``None`` lambdas mean uniform 1/m."""

    alphas: tuple = (0.9, 0.75, 0.5, 0.1, 0.01)
    delta: float = 0.5
    lambdas_up: tuple | None = None
    lambdas_down: tuple | None = None
    alphas_down: tuple | None = None

    def __post_init__(self):
        self.alphas = tuple(float(a) for a in self.alphas)
        m = len(self.alphas)
        if self.alphas_down is None:
            self.alphas_down = self.alphas
        self.alphas_down = tuple(float(a) for a in self.alphas_down)
        if self.lambdas_up is None:
            self.lambdas_up = (1.0 / m,) * m
        if self.lambdas_down is None:
            self.lambdas_down = (1.0 / len(self.alphas_down),) * len(self.alphas_down)
        self.lambdas_up = tuple(float(x) for x in self.lambdas_up)
        self.lambdas_down = tuple(float(x) for x in self.lambdas_down)
        for a in self.alphas + self.alphas_down:
            if not 0 < a < 1:
                raise ContractViolation(f"CVaR level {a} outside (0, 1)")
        for lam in (self.lambdas_up, self.lambdas_down):
            if min(lam) < 0 or abs(sum(lam) - 1.0) > 1e-9:
                raise ContractViolation("tail weights must be nonnegative and sum to 1")
        if len(self.lambdas_up) != m or len(self.lambdas_down) != len(self.alphas_down):
            raise ContractViolation("one tail weight per confidence level")
        if not 0 < self.delta < 1:
            raise ContractViolation("delta must lie in (0, 1)")


def tmcvar_objective(R, I, w, params):
    X = I - R @ w
    up = sum(l * cvar(X, a) for l, a in zip(params.lambdas_up, params.alphas))
    down = sum(l * cvar(-X, a) for l, a in zip(params.lambdas_down, params.alphas_down))
    return float(params.delta * up + (1.0 - params.delta) * down)


# -- plumbing -----------------------------------------------------------------

def _full(n, support, x):
    w = np.zeros(n)
    w[support] = x
    return w


def _check_box(p, support):
    if p.lo[support].sum() > 1 + 1e-12 or p.hi[support].sum() < 1 - 1e-12:
        raise InfeasibleError("holding bounds cannot reach a unit budget on this support")


def _track(p, model, solve_on, objective, strategy, seed, time_limit):
    try:
        res = search_support(p.n, p.K, solve_on, strategy, seed, time_limit, p.zero_floor)
    except InfeasibleError as exc:
        raise SolverError(str(exc), model=model, status="Infeasible") from None
    if res.weights is None:
        raise SolverError("no feasible support found", model=model, status="Infeasible")
    w = finalize_weights(res.weights, p.K)
    return Portfolio(w, objective(w), model, status=res.status,
                     info={"evaluations": res.evaluations, "search_objective": res.objective})


def _qp_solve_on(p, Q, q, const, model, tol=1e-10):
    def solve_on(support):
        _check_box(p, support)
        qp = QuadraticProgram(Q, q, p.lo, p.hi, support=support, constant=const)
        res = solve_qp(qp, tol=tol)
        return res.objective, res.x
    return solve_on


def _asset_dual_lp(R, I, lo, hi, blocks, extra_eq=(), extra_ub=()):
    """Dual of a tracking LP whose only coupling rows are per-period deviations.

    Every model below has primal rows of the form ``sign * (R_t w - I_t) + ...``
    whose multipliers live in boxes.  Dualising turns the T period rows into T
    bounded columns and leaves one row per asset (plus a few scalar rows), so
    the simplex basis is tiny.  ``blocks`` lists ``(sign, lower, upper, row)``
    per family of T columns; ``row`` indexes an extra scalar row (equality rows
    first, then <= rows) or is None.  Column order: blocks, budget multiplier,
    lower-bound multipliers, finite upper-bound multipliers.  The primal
    weights are minus the asset-row duals.
    """
    T, k = R.shape
    extra_eq = np.asarray(extra_eq, dtype=float)
    extra_ub = np.asarray(extra_ub, dtype=float)
    ne, nu = extra_eq.size, extra_ub.size
    finite_hi = np.isfinite(hi)
    nh = int(finite_hi.sum())
    n_cols = T * len(blocks) + 1 + k + nh
    A = np.zeros((k + ne + nu, n_cols))
    c = np.zeros(n_cols)
    lo_b = np.zeros(n_cols)
    hi_b = np.full(n_cols, np.inf)
    col = 0
    for sign, lower, upper, row in blocks:
        A[:k, col:col + T] = sign * R.T
        if row is not None:
            A[k + row, col:col + T] = 1.0
        c[col:col + T] = -sign * I
        lo_b[col:col + T] = lower
        hi_b[col:col + T] = upper
        col += T
    A[:k, col] = 1.0
    c[col] = -1.0
    lo_b[col] = -np.inf
    col += 1
    A[:k, col:col + k] = np.eye(k)
    c[col:col + k] = -lo
    col += k
    A[np.flatnonzero(finite_hi), col + np.arange(nh)] = -1.0
    c[col:col + nh] = hi[finite_hi]
    eq_rows = k + ne
    return LinearProgram(c, eq_lhs=A[:eq_rows], eq_rhs=np.concatenate([np.zeros(k), extra_eq]),
                         ub_lhs=A[eq_rows:] if nu else None, ub_rhs=extra_ub if nu else None,
                         lo=lo_b, hi=hi_b)


def _dual_solve_on(p, model, dual_builder, primal_builder, objective):
    """``solve_on`` for an LP model: dual simplex solve, primal fallback.

    The weights read off the dual are accepted only if they sit on the simplex
    and their closed-form objective closes the duality gap.
    """
    def solve_on(support):
        _check_box(p, support)
        k = support.size
        sol = solve_lp(dual_builder(p.R[:, support], p.lo[support], p.hi[support]))
        if sol.optimal:
            x = np.clip(-sol.eq_duals[:k], p.lo[support], p.hi[support])
            w = _full(p.n, support, x)
            value = objective(w)
            if abs(x.sum() - 1.0) <= 1e-9 and value + sol.objective <= 1e-9 * max(1.0, abs(sol.objective)):
                return value, w
        elif sol.status.value == "Unbounded":
            raise InfeasibleError(f"{model} infeasible on support")
        lp = primal_builder(p.R[:, support], p.lo[support], p.hi[support])
        psol = solve_lp(lp)
        if not psol.optimal:
            if psol.status.value == "Infeasible":
                raise InfeasibleError(f"{model} infeasible on support")
            raise SolverError(f"LP ended with status {psol.status.value}", model=model, status=psol.status.value)
        w = _full(p.n, support, psol.x[:k])
        return objective(w), w
    return solve_on


# -- quadratic models ---------------------------------------------------------

def solve_mse(p, strategy=None, seed=0, time_limit=None):
    """Minimise ``(1/T) ||I - R w||^2`` over the simplex with at most K names."""
    T = p.T
    Q = (2.0 / T) * (p.R.T @ p.R)
    q = -(2.0 / T) * (p.R.T @ p.I)
    solve_on = _qp_solve_on(p, Q, q, float(p.I @ p.I) / T, "MSE")
    return _track(p, "MSE", solve_on, lambda w: mse_objective(p.R, p.I, w), strategy, seed, time_limit)


def solve_ses(p, strategy=None, seed=0, time_limit=None):
    """Minimise ``(1/T) (sum_t I_t - R_t w)^2``; a rank-one QP."""
    T = p.T
    s = p.R.sum(axis=0)
    tot = float(p.I.sum())
    Q = (2.0 / T) * np.outer(s, s)
    q = -(2.0 / T) * tot * s
    solve_on = _qp_solve_on(p, Q, q, tot * tot / T, "SES")
    return _track(p, "SES", solve_on, lambda w: ses_objective(p.R, p.I, w), strategy, seed, time_limit)


def estimate_benchmark_weights(p):
    """NNLS of the index on the asset returns, normalised onto the simplex.

    Returns ``(b, fallback)``; ``fallback`` is True when the fit vanished and
    uniform weights were used instead.
    """
    b = nnls(p.R, p.I)
    if b.sum() <= 1e-12:
        return np.full(p.n, 1.0 / p.n), True
    return b / b.sum(), False


def solve_tev(p, b=None, strategy=None, seed=0, time_limit=None):
    """Minimise ``(w - b)' Sigma (w - b)`` with Sigma the sample covariance."""
    fallback = False
    if b is None:
        b, fallback = estimate_benchmark_weights(p)
    b = np.asarray(b, dtype=float)
    if b.size != p.n or np.any(b < -1e-12) or abs(b.sum() - 1) > 1e-9:
        raise ContractViolation("benchmark weights must lie on the simplex")
    cov = np.atleast_2d(np.cov(p.R, rowvar=False, ddof=1))
    Q = 2.0 * cov
    q = -2.0 * cov @ b
    solve_on = _qp_solve_on(p, Q, q, float(b @ cov @ b), "TEV")
    port = _track(p, "TEV", solve_on, lambda w: tev_objective(cov, b, w), strategy, seed, time_limit)
    port.info["benchmark_fallback"] = fallback
    return port


# -- linear models ------------------------------------------------------------

def mad_primal_lp(R, I, lo, hi, downside_only=False):
    """MAD (or MADD) with deviation splits; variables ``(w, y+, y-)`` or ``(w, y-)``."""
    T, k = R.shape
    if downside_only:
        # R w + y- >= I  written as  -R w - y- <= -I
        c = np.concatenate([np.zeros(k), np.full(T, 1.0 / T)])
        return LinearProgram(c, eq_lhs=np.concatenate([np.ones(k), np.zeros(T)])[None, :], eq_rhs=[1.0],
                             ub_lhs=np.hstack([-R, -np.eye(T)]), ub_rhs=-I,
                             lo=np.concatenate([lo, np.zeros(T)]),
                             hi=np.concatenate([hi, np.full(T, np.inf)]))
    c = np.concatenate([np.zeros(k), np.full(2 * T, 1.0 / T)])
    eq = np.zeros((T + 1, k + 2 * T))
    eq[:T, :k] = R
    eq[:T, k:k + T] = -np.eye(T)
    eq[:T, k + T:] = np.eye(T)
    eq[T, :k] = 1.0
    return LinearProgram(c, eq_lhs=eq, eq_rhs=np.concatenate([I, [1.0]]),
                         lo=np.concatenate([lo, np.zeros(2 * T)]),
                         hi=np.concatenate([hi, np.full(2 * T, np.inf)]))


def minmax_primal_lp(R, I, lo, hi, downside_only=False):
    """MinMax (or DMinMax): variables ``(w, xi)`` with ``xi >= 0``."""
    T, k = R.shape
    c = np.zeros(k + 1)
    c[k] = 1.0
    rows, rhs = [np.hstack([-R, -np.ones((T, 1))])], [-I]
    if not downside_only:
        rows.append(np.hstack([R, -np.ones((T, 1))]))
        rhs.append(I)
    return LinearProgram(c, eq_lhs=np.concatenate([np.ones(k), [0.0]])[None, :], eq_rhs=[1.0],
                         ub_lhs=np.vstack(rows), ub_rhs=np.concatenate(rhs),
                         lo=np.concatenate([lo, [0.0]]), hi=np.concatenate([hi, [np.inf]]))


def _linear_model(p, model, downside_only, minmax, objective):
    I, T = p.I, p.T
    if minmax:
        blocks = [(1.0, 0.0, np.inf, 0)] + ([] if downside_only else [(-1.0, 0.0, np.inf, 0)])
        dual = lambda R, lo, hi: _asset_dual_lp(R, I, lo, hi, blocks, extra_ub=[1.0])
        primal = lambda R, lo, hi: minmax_primal_lp(R, I, lo, hi, downside_only)
    else:
        lower = 0.0 if downside_only else -1.0 / T
        dual = lambda R, lo, hi: _asset_dual_lp(R, I, lo, hi, [(1.0, lower, 1.0 / T, None)])
        primal = lambda R, lo, hi: mad_primal_lp(R, I, lo, hi, downside_only)
    return _dual_solve_on(p, model, dual, primal, objective)


def solve_mad(p, strategy=None, seed=0, time_limit=None):
    """Mean absolute deviation ``(1/T) sum |R_t w - I_t|``."""
    obj = lambda w: mad_objective(p.R, p.I, w)
    return _track(p, "MAD", _linear_model(p, "MAD", False, False, obj), obj, strategy, seed, time_limit)


def solve_madd(p, strategy=None, seed=0, time_limit=None):
    """Mean absolute downside deviation ``(1/T) sum (I_t - R_t w)+``."""
    obj = lambda w: madd_objective(p.R, p.I, w)
    return _track(p, "MADD", _linear_model(p, "MADD", True, False, obj), obj, strategy, seed, time_limit)


def solve_minmax(p, strategy=None, seed=0, time_limit=None):
    """Minimise the worst absolute deviation ``max_t |R_t w - I_t|``."""
    obj = lambda w: minmax_objective(p.R, p.I, w)
    return _track(p, "MinMax", _linear_model(p, "MinMax", False, True, obj), obj, strategy, seed, time_limit)


def solve_dminmax(p, strategy=None, seed=0, time_limit=None):
    """Minimise the worst shortfall ``max_t (I_t - R_t w)+``."""
    obj = lambda w: dminmax_objective(p.R, p.I, w)
    return _track(p, "DMinMax", _linear_model(p, "DMinMax", True, True, obj), obj, strategy, seed, time_limit)


# -- two-tail mixed CVaR --------------------------------------------------------

def _tmcvar_coefficients(params, T):
    aU = params.delta * np.array(params.lambdas_up)
    aD = (1.0 - params.delta) * np.array(params.lambdas_down)
    gU = aU / ((1.0 - np.array(params.alphas)) * T)
    gD = aD / ((1.0 - np.array(params.alphas_down)) * T)
    return aU, aD, gU, gD


def tmcvar_dual_lp(R, I, lo, hi, params):
    """Dual of the linearised two-tail CVaR program on the columns of ``R``.

    The primal's ``2 m T`` inequality rows become bounded columns (upside tail
    first, level-major) and its ``u`` variables become their upper bounds.
    """
    T = R.shape[0]
    aU, aD, gU, gD = _tmcvar_coefficients(params, T)
    blocks = [(1.0, 0.0, g, j) for j, g in enumerate(gU)]
    blocks += [(-1.0, 0.0, g, aU.size + j) for j, g in enumerate(gD)]
    return _asset_dual_lp(R, I, lo, hi, blocks, extra_eq=np.concatenate([aU, aD]))


def tmcvar_primal_lp(R, I, lo, hi, params):
    """The linearised program as displayed: variables (w, beta_U, beta_D, u_U, u_D)."""
    T, k = R.shape
    aU, aD, gU, gD = _tmcvar_coefficients(params, T)
    mU, mD = aU.size, aD.size
    nv = k + mU + mD + T * (mU + mD)
    c = np.zeros(nv)
    c[k:k + mU] = aU
    c[k + mU:k + mU + mD] = aD
    off = k + mU + mD
    rows, rhs = [], []
    for j in range(mU):
        # -(u + R w - I + beta) <= 0
        blk = np.zeros((T, nv))
        blk[:, :k] = -R
        blk[:, k + j] = -1.0
        blk[:, off + j * T + np.arange(T)] = -np.eye(T)
        c[off + j * T: off + (j + 1) * T] = gU[j]
        rows.append(blk)
        rhs.append(-I)
    base = off + mU * T
    for j in range(mD):
        blk = np.zeros((T, nv))
        blk[:, :k] = R
        blk[:, k + mU + j] = -1.0
        blk[:, base + j * T + np.arange(T)] = -np.eye(T)
        c[base + j * T: base + (j + 1) * T] = gD[j]
        rows.append(blk)
        rhs.append(I)
    lo_b = np.concatenate([lo, np.full(mU + mD, -np.inf), np.zeros(T * (mU + mD))])
    hi_b = np.concatenate([hi, np.full(mU + mD + T * (mU + mD), np.inf)])
    eq = np.zeros((1, nv))
    eq[0, :k] = 1.0
    return LinearProgram(c, eq_lhs=eq, eq_rhs=[1.0], ub_lhs=np.vstack(rows), ub_rhs=np.concatenate(rhs),
                         lo=lo_b, hi=hi_b)


def solve_tmcvar(p, params=None, strategy=None, seed=0, time_limit=None):
    """Two-tail mixed CVaR tracking, solved through its LP dual."""
    params = TmcvarParams() if params is None else params
    obj = lambda w: tmcvar_objective(p.R, p.I, w, params)
    solve_on = _dual_solve_on(p, "TMCVaR", lambda R, lo, hi: tmcvar_dual_lp(R, p.I, lo, hi, params),
                              lambda R, lo, hi: tmcvar_primal_lp(R, p.I, lo, hi, params), obj)
    return _track(p, "TMCVaR", solve_on, obj, strategy, seed, time_limit)


def select_support(p, objective="MSE", strategy=None, seed=0, **kwargs):
    """Support chosen for ``objective`` under ``strategy``; see :func:`search_support`."""
    table = {"MSE": solve_mse, "SES": solve_ses, "MAD": solve_mad, "MADD": solve_madd,
             "MinMax": solve_minmax, "DMinMax": solve_dminmax, "TEV": solve_tev, "TMCVaR": solve_tmcvar}
    if objective not in table:
        raise ContractViolation(f"unknown objective {objective!r}")
    port = table[objective](p, strategy=strategy, seed=seed, **kwargs)
    return port.support, port
