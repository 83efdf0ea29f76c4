"""Projected-gradient QP over the (boxed) probability simplex.

Minimises ``0.5 * w @ Q @ w + q @ w`` over ``{w : sum(w) = 1, lo <= w <= hi}``
(or over the box alone when ``budget=False``) with the spectral projected
gradient method: Barzilai-Borwein steps safeguarded by a non-monotone
Armijo line search over the last ``memory`` objective values.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolation, InfeasibleError
from . import tolerances


def project_simplex(v, lo=0.0, hi=1.0):
    """Euclidean projection of ``v`` onto ``{w : sum(w) = 1, lo <= w <= hi}``.

    The projection is ``clip(v - tau, lo, hi)`` for the scalar shift ``tau``
    that restores the budget; ``tau`` is bracketed and bisected, then solved
    exactly on the final free set.
    """
    v = np.asarray(v, dtype=float)
    n = v.size
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,))
    if np.any(lo > hi) or lo.sum() > 1 + 1e-12 or hi.sum() < 1 - 1e-12:
        raise InfeasibleError(f"box [sum lo={lo.sum():.6g}, sum hi={hi.sum():.6g}] cannot hold a unit budget")

    def excess(tau):
        return np.clip(v - tau, lo, hi).sum() - 1.0

    finite_hi = np.where(np.isfinite(hi), hi, lo + 1.0)
    a = float(np.min(v - finite_hi)) - 1.0
    b = float(np.max(v - lo)) + 1.0
    for _ in range(200):
        mid = 0.5 * (a + b)
        if excess(mid) > 0:
            a = mid
        else:
            b = mid
        if b - a <= 1e-15 * max(1.0, abs(a), abs(b)):
            break
    tau = 0.5 * (a + b)
    w = np.clip(v - tau, lo, hi)
    free = (w > lo) & (w < hi)
    if free.any():
        fixed_sum = w[~free].sum()
        tau = (v[free].sum() - (1.0 - fixed_sum)) / free.sum()
        w_free = np.clip(v[free] - tau, lo[free], hi[free])
        w[free] = w_free
    # distribute any residual rounding over coordinates with room to move
    gap = 1.0 - w.sum()
    if gap != 0.0:
        room = (hi - w) if gap > 0 else (w - lo)
        idx = np.flatnonzero(room > abs(gap))
        if idx.size:
            w[idx[0]] += gap
    return w


def project_box(v, lo, hi):
    return np.clip(v, lo, hi)


@dataclass
class QuadraticProgram:
    """``min 0.5 w'Qw + q'w (+ constant)`` over the simplex/box, optionally on a support."""

    Q: np.ndarray
    q: np.ndarray
    lo: np.ndarray | float = 0.0
    hi: np.ndarray | float = 1.0
    support: np.ndarray | None = None
    budget: bool = True
    constant: float = 0.0

    def __post_init__(self):
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        n = self.Q.shape[0]
        self.q = np.asarray(self.q, dtype=float).ravel()
        if self.Q.shape != (n, n) or self.q.size != n:
            raise ContractViolation("Q must be square and match q")
        if np.abs(self.Q - self.Q.T).max(initial=0.0) > tolerances.SYMMETRY * max(1.0, np.abs(self.Q).max(initial=0.0)):
            raise ContractViolation("Q is not symmetric")
        self.lo = np.broadcast_to(np.asarray(self.lo, dtype=float), (n,)).copy()
        self.hi = np.broadcast_to(np.asarray(self.hi, dtype=float), (n,)).copy()
        if self.support is not None:
            self.support = np.asarray(self.support, dtype=int)

    @property
    def n(self):
        return self.q.size

    def value(self, w):
        return float(0.5 * w @ self.Q @ w + self.q @ w + self.constant)

    def check_psd(self):
        from .eigen import sym_eigen
        vals, _ = sym_eigen(self.Q)
        return vals.min(initial=0.0) >= -1e-8 * max(1.0, np.abs(vals).max(initial=0.0))


@dataclass
class QpResult:
    x: np.ndarray
    objective: float
    iterations: int
    converged: bool
    pg_norm: float

    @property
    def status(self):
        return "Optimal" if self.converged else "IterLimit"


def solve_qp(qp, tol=1e-10, max_iter=100_000, x0=None, memory=10):
    """Minimise ``qp`` by spectral projected gradient.

    ``tol`` bounds the infinity norm of the unit-step projected gradient after
    the problem has been rescaled so that ``max|diag Q| = 1``.  Returns a
    :class:`QpResult` whose ``converged`` flag is False at the iteration limit.
    """
    n = qp.n
    idx = np.arange(n) if qp.support is None else qp.support
    Q = qp.Q[np.ix_(idx, idx)]
    q = qp.q[idx]
    lo, hi = qp.lo[idx], qp.hi[idx]
    scale = max(np.abs(np.diag(Q)).max(initial=0.0), np.abs(q).max(initial=0.0), 1e-300)
    Qs, qs = Q / scale, q / scale

    if qp.budget:
        def proj(v):
            return project_simplex(v, lo, hi)
    else:
        def proj(v):
            return np.clip(v, lo, hi)

    if x0 is None:
        start = np.full(idx.size, 1.0 / max(idx.size, 1))
    else:
        start = np.asarray(x0, dtype=float)[idx] if np.asarray(x0).size == n else np.asarray(x0, dtype=float)
    x = proj(start)

    def f(z):
        return 0.5 * z @ Qs @ z + qs @ z

    g = Qs @ x + qs
    fx = f(x)
    history = [fx]
    pg = np.abs(proj(x - g) - x).max(initial=0.0)
    alpha = 1.0 / max(pg, 1e-12)
    alpha = min(max(alpha, 1e-10), 1e10)
    it = 0
    gamma = 1e-4
    while pg > tol and it < max_iter:
        it += 1
        d = proj(x - alpha * g) - x
        gd = g @ d
        if gd >= 0:
            # numerically stationary along the feasible direction
            break
        f_ref = max(history[-memory:])
        lam = 1.0
        Qd = Qs @ d
        dQd = d @ Qd
        while True:
            f_new = fx + lam * gd + 0.5 * lam * lam * dQd
            if f_new <= f_ref + gamma * lam * gd or lam < 1e-12:
                break
            # exact minimiser of the quadratic along d, safeguarded
            lam_q = -gd / dQd if dQd > 0 else 0.5 * lam
            lam = min(max(lam_q, 0.1 * lam), 0.5 * lam)
        s = lam * d
        x = x + s
        g_new = g + lam * Qd
        y = g_new - g
        g = g_new
        fx = f_new
        history.append(fx)
        sy = s @ y
        alpha = (s @ s) / sy if sy > 0 else 1e10
        alpha = min(max(alpha, 1e-10), 1e10)
        pg = np.abs(proj(x - g) - x).max(initial=0.0)
    x = proj(x)
    full = np.zeros(n)
    full[idx] = x
    return QpResult(full, qp.value(full), it, bool(pg <= tol), float(pg))
