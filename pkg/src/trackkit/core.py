"""Problem and portfolio containers shared by every tracking model."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, InsufficientDataError
from .numerics import tolerances


@dataclass
class TrackingProblem:
    """One training window: returns ``R`` (T x n), index returns ``I``, cardinality ``K``.

    ``lo``/``hi`` are holding bounds that apply to selected assets only.
    """

    R: np.ndarray
    I: np.ndarray
    K: int
    lo: float | np.ndarray = 0.0
    hi: float | np.ndarray = 1.0

    def __post_init__(self):
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        self.I = np.asarray(self.I, dtype=float).ravel()
        T, n = self.R.shape
        if self.I.size != T:
            raise ContractViolation(f"R has {T} rows but I has {self.I.size}")
        if T < 2:
            raise InsufficientDataError("a tracking problem needs at least two periods")
        if not (np.all(np.isfinite(self.R)) and np.all(np.isfinite(self.I))):
            raise ContractViolation("returns must be finite")
        self.K = int(self.K)
        if self.K < 1:
            raise ContractViolation("K must be positive")
        self.lo = np.broadcast_to(np.asarray(self.lo, dtype=float), (n,)).copy()
        self.hi = np.broadcast_to(np.asarray(self.hi, dtype=float), (n,)).copy()
        if np.any(self.lo < 0) or np.any(self.lo > self.hi):
            raise ContractViolation("holding bounds need 0 <= lo <= hi")

    @property
    def T(self):
        return self.R.shape[0]

    @property
    def n(self):
        return self.R.shape[1]

    @property
    def zero_floor(self):
        return bool(np.all(self.lo == 0))

    def scaled(self, c):
        return TrackingProblem(self.R * c, self.I * c, self.K, self.lo, self.hi)


@dataclass
class Portfolio:
    """Long-only weights plus the training objective that produced them."""

    weights: np.ndarray
    objective: float
    model: str
    status: str = "ok"
    info: dict = field(default_factory=dict)

    @property
    def support(self):
        return np.flatnonzero(self.weights > tolerances.SUPPORT)

    @property
    def n_assets(self):
        return int(self.support.size)


def finalize_weights(w, K=None):
    """Clip tiny/negative entries, keep at most K names, renormalise to one.

    The largest entry absorbs the final rounding residual so ``sum == 1`` holds
    to machine precision.
    """
    w = np.asarray(w, dtype=float).copy()
    w[~np.isfinite(w)] = 0.0
    w[w <= tolerances.SUPPORT] = 0.0
    if K is not None:
        idx = np.flatnonzero(w)
        if idx.size > K:
            keep = idx[np.lexsort((idx, -w[idx]))[:K]]
            mask = np.zeros(w.size, dtype=bool)
            mask[keep] = True
            w[~mask] = 0.0
    total = w.sum()
    if total <= 0:
        raise ContractViolation("weights vanish; cannot normalise")
    w /= total
    w[w <= tolerances.SUPPORT] = 0.0
    w /= w.sum()
    j = int(np.argmax(w))
    w[j] += 1.0 - w.sum()
    return w


def uniform_on(support, n):
    w = np.zeros(n)
    support = np.asarray(support, dtype=int)
    w[support] = 1.0 / support.size
    return w


def check_portfolio(port, K, tol=1e-9):
    """Raise ContractViolation unless ``port`` is on the simplex with at most K names."""
    w = np.asarray(port.weights, dtype=float)
    if not np.all(np.isfinite(w)):
        raise ContractViolation(f"{port.model}: non-finite weights")
    if abs(w.sum() - 1.0) > tol:
        raise ContractViolation(f"{port.model}: weights sum to {w.sum():.12g}")
    if np.any(w < 0):
        raise ContractViolation(f"{port.model}: negative weight {w.min():.3g}")
    if port.support.size > K:
        raise ContractViolation(f"{port.model}: {port.support.size} names exceed K={K}")
