"""Out-of-sample performance metrics and pairwise paired t-tests on tracking error.

Ratios whose excess-return precondition fails are returned as ``None`` so
that averages across windows cannot silently absorb them.
"""

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import betainc

from .errors import ContractViolation


def _pair(rp, rb):
    rp = np.asarray(rp, dtype=float).ravel()
    rb = np.asarray(rb, dtype=float).ravel()
    if rp.shape != rb.shape:
        raise ContractViolation("portfolio and benchmark series differ in length")
    return rp, rb


def tracking_error(rp, rb):
    """Sample standard deviation (H - 1 denominator) of the active return."""
    rp, rb = _pair(rp, rb)
    if rp.size < 2:
        return float("nan")
    return float(np.std(rp - rb, ddof=1))


def correlation(rp, rb):
    rp, rb = _pair(rp, rb)
    a, b = rp - rp.mean(), rb - rb.mean()
    den = np.sqrt((a @ a) * (b @ b))
    if den == 0:
        return float("nan")
    return float(np.clip((a @ b) / den, -1.0, 1.0))


def return_stats(rp):
    rp = np.asarray(rp, dtype=float).ravel()
    return float(rp.mean()), float(rp.min()), float(rp.max())


def volatility(rp):
    rp = np.asarray(rp, dtype=float).ravel()
    return float(np.std(rp, ddof=1)) if rp.size > 1 else float("nan")


def drawdowns(rp):
    """Proportional drawdowns ``(W_t - max_s W_s) / max_s W_s`` of the wealth path."""
    wealth = np.cumprod(1.0 + np.asarray(rp, dtype=float).ravel())
    peak = np.maximum.accumulate(wealth)
    return (wealth - peak) / peak


def avg_drawdown(rp):
    dd = drawdowns(rp)
    return float(np.mean(np.abs(dd))) if dd.size else 0.0


def sharpe(rp, rf=0.0):
    rp = np.asarray(rp, dtype=float).ravel()
    ex = rp.mean() - rf
    sd = volatility(rp)
    if not ex > 0 or not sd > 0:
        return None
    return float(ex / sd)


def sortino(rp, rf=0.0):
    """Excess mean over the sample sd of the negative returns only."""
    rp = np.asarray(rp, dtype=float).ravel()
    ex = rp.mean() - rf
    neg = rp[rp < 0]
    if not ex > 0 or neg.size < 2:
        return None
    sd = float(np.std(neg, ddof=1))
    return float(ex / sd) if sd > 0 else None


def beta(rp, rb):
    rp, rb = _pair(rp, rb)
    var = np.var(rb, ddof=1)
    if not var > 0:
        return float("nan")
    return float(np.cov(rp, rb, ddof=1)[0, 1] / var)


def treynor(rp, rb, rf=0.0):
    rp, rb = _pair(rp, rb)
    ex = rp.mean() - rf
    b = beta(rp, rb)
    if not ex > 0 or not np.isfinite(b) or b == 0:
        return None
    return float(ex / b)


def information_ratio(rp, rb, te=None):
    rp, rb = _pair(rp, rb)
    active = rp.mean() - rb.mean()
    te = tracking_error(rp, rb) if te is None else te
    if not active > 0 or not te > 0:
        return None
    return float(active / te)


def turnover(weights):
    """Mean L1 change between consecutive windows' weight vectors; None for one window."""
    W = np.atleast_2d(np.asarray(weights, dtype=float))
    if W.shape[0] < 2:
        return None
    return float(np.abs(np.diff(W, axis=0)).sum() / (W.shape[0] - 1))


@dataclass
class MetricReport:
    te: float
    correlation: float
    avg_return: float
    min_return: float
    max_return: float
    volatility: float
    avg_drawdown: float
    sharpe: object
    sortino: object
    treynor: object
    information_ratio: object
    n_assets: float = float("nan")
    turnover: object = None
    solve_time: float = float("nan")

    def as_dict(self):
        return asdict(self)


METRIC_FIELDS = tuple(MetricReport.__dataclass_fields__)


def metric_report(rp, rb, rf=0.0, n_assets=float("nan"), solve_time=float("nan")):
    """All per-series metrics for one out-of-sample segment."""
    rp, rb = _pair(rp, rb)
    te = tracking_error(rp, rb)
    mean, lo, hi = return_stats(rp)
    return MetricReport(
        te=te,
        correlation=correlation(rp, rb),
        avg_return=mean,
        min_return=lo,
        max_return=hi,
        volatility=volatility(rp),
        avg_drawdown=avg_drawdown(rp),
        sharpe=sharpe(rp, rf),
        sortino=sortino(rp, rf),
        treynor=treynor(rp, rb, rf),
        information_ratio=information_ratio(rp, rb, te),
        n_assets=float(n_assets),
        solve_time=float(solve_time),
    )


def average_reports(reports, turnover_value=None):
    """Field-wise mean over windows; null ratios are skipped, all-null stays null."""
    out = {}
    for name in METRIC_FIELDS:
        vals = [getattr(r, name) for r in reports]
        vals = [v for v in vals if v is not None and np.isfinite(v)]
        out[name] = float(np.mean(vals)) if vals else None
    out["turnover"] = turnover_value
    return MetricReport(**out)


# -- paired t-tests -------------------------------------------------------------

def t_cdf(t, df):
    """Student-t CDF through the regularised incomplete beta function."""
    t = float(t)
    df = float(df)
    if df <= 0:
        raise ContractViolation("degrees of freedom must be positive")
    if np.isinf(t):
        return 1.0 if t > 0 else 0.0
    x = df / (df + t * t)
    tail = 0.5 * betainc(0.5 * df, 0.5, x)
    return float(1.0 - tail) if t > 0 else float(tail)


@dataclass
class TTestMatrix:
    """``pvalues[i, j]`` tests ``H_A: TE_i < TE_j`` (small p favours model i)."""

    models: list
    pvalues: np.ndarray
    df: int
    tstats: np.ndarray = None
    degenerate: list = field(default_factory=list)


def paired_t(d):
    """One-sided p for ``mean(d) < 0`` with ``d = TE_i - TE_j``: ``P(T_{N-1} <= t)``.

    Returns ``(t, p, flag)`` where ``flag`` marks zero-variance differences.
    """
    d = np.asarray(d, dtype=float).ravel()
    N = d.size
    if N < 2:
        return float("nan"), float("nan"), "too-few-windows"
    m = d.mean()
    sd = np.std(d, ddof=1)
    if sd == 0 or sd <= 1e-15 * max(np.abs(d).max(), 1e-300):
        if m == 0:
            return float("nan"), 0.5, "degenerate"
        return (float("inf") if m > 0 else float("-inf")), (1.0 if m > 0 else 0.0), "zero-variance"
    t = m / (sd / np.sqrt(N))
    return float(t), t_cdf(t, N - 1), None


def paired_t_matrix(te, models=None):
    """P-value matrix from a (models x windows) array or a ``{name: series}`` dict."""
    if isinstance(te, dict):
        models = list(te) if models is None else list(models)
        arr = np.array([np.asarray(te[m], dtype=float) for m in models])
    else:
        arr = np.atleast_2d(np.asarray(te, dtype=float))
        models = list(models) if models is not None else [str(i) for i in range(arr.shape[0])]
    k, N = arr.shape
    P = np.full((k, k), np.nan)
    Tm = np.full((k, k), np.nan)
    flags = []
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            t, p, flag = paired_t(arr[i] - arr[j])
            P[i, j], Tm[i, j] = p, t
            if flag and i < j:
                flags.append((models[i], models[j], flag))
    return TTestMatrix(models, P, N - 1, Tm, flags)
