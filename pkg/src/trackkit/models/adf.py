"""Augmented Dickey-Fuller test, constant-only specification.

Critical values follow MacKinnon's (2010) response surfaces for one series
with a constant and no trend, ``c0 + c1/T + c2/T^2 + c3/T^3`` with T the
effective sample size.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolation, InsufficientDataError

_SURFACE = {
    "1%": (-3.43035, -6.5393, -16.786, -79.433),
    "5%": (-2.86154, -2.8903, -4.234, -40.040),
    "10%": (-2.56677, -1.5384, -2.809, 0.0),
}


def critical_values(nobs):
    """1/5/10% critical values at effective sample size ``nobs``."""
    x = 1.0 / nobs
    return {k: c[0] + c[1] * x + c[2] * x * x + c[3] * x ** 3 for k, c in _SURFACE.items()}


def interpolate_pvalue(stat, crit):
    """Log-linear interpolation of the p-value through the tabulated points.

    ``log p`` is taken linear in the statistic between neighbouring points and
    extended along the end segments, then clipped to [0, 1].
    """
    xs = np.array([crit["1%"], crit["5%"], crit["10%"]])
    ys = np.log([0.01, 0.05, 0.10])
    i = 0 if stat <= xs[1] else 1
    slope = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
    return float(np.clip(np.exp(ys[i] + slope * (stat - xs[i])), 0.0, 1.0))


@dataclass
class AdfResult:
    statistic: float
    lags_used: int
    reject_unit_root: bool
    pvalue: float
    nobs: int
    critical_values: dict


def _design(y, lag, start):
    """Regression ``dy_t ~ 1 + y_{t-1} + dy_{t-1..t-lag}`` for t >= start."""
    dy = np.diff(y)
    rows = np.arange(start, dy.size)
    cols = [np.ones(rows.size), y[rows]]
    for j in range(1, lag + 1):
        cols.append(dy[rows - j])
    return np.column_stack(cols), dy[rows]


def _ols(X, z):
    coef, _, rank, _ = np.linalg.lstsq(X, z, rcond=None)
    resid = z - X @ coef
    return coef, resid, rank


def adf_test(series, max_lag=1, criterion="AIC"):
    """ADF unit-root test returning an :class:`AdfResult`.

    With ``criterion="AIC"`` every lag in ``0..max_lag`` is fitted on the
    common sample that the largest lag allows and the AIC minimiser is refitted
    on its own full sample; with ``criterion=None`` ``max_lag`` is used as is.
    """
    y = np.asarray(series, dtype=float).ravel()
    if max_lag < 0:
        raise ContractViolation("max_lag must be nonnegative")
    if y.size < max_lag + 3 + 1:
        raise InsufficientDataError(f"series of length {y.size} too short for lag {max_lag}")
    if np.all(np.diff(y) == 0):
        raise InsufficientDataError("series has no variation; ADF regression is degenerate")

    if criterion is None:
        lag = max_lag
    elif str(criterion).upper() == "AIC":
        best = None
        for L in range(max_lag + 1):
            X, z = _design(y, L, max_lag)
            _, resid, _ = _ols(X, z)
            n = z.size
            ssr = float(resid @ resid)
            aic = n * np.log(max(ssr, 1e-300) / n) + 2 * X.shape[1]
            if best is None or aic < best[0] - 1e-12:
                best = (aic, L)
        lag = best[1]
    else:
        raise ContractViolation(f"unknown lag criterion {criterion!r}")

    X, z = _design(y, lag, lag)
    if X.shape[0] <= X.shape[1]:
        raise InsufficientDataError("too few observations for the ADF regression")
    coef, resid, rank = _ols(X, z)
    if rank < X.shape[1]:
        raise InsufficientDataError("ADF regression is rank deficient (insufficient variation)")
    n, k = X.shape
    s2 = float(resid @ resid) / (n - k)
    cov = s2 * np.linalg.inv(X.T @ X)
    se = np.sqrt(cov[1, 1])
    if se == 0:
        raise InsufficientDataError("ADF regression has zero residual variance")
    stat = float(coef[1] / se)
    crit = critical_values(n)
    return AdfResult(stat, lag, bool(stat < crit["5%"]), interpolate_pvalue(stat, crit), n, crit)
