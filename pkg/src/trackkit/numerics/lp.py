"""Two-phase bounded-variable revised simplex.

Problems are stated as::

    minimize    c @ x
    subject to  A_eq @ x == b_eq
                A_ub @ x <= b_ub
                lo <= x <= hi          (entries of lo/hi may be -inf/+inf)

Internally every variable is shifted/split onto ``[0, u]`` and inequality rows
receive slacks, giving ``min c'z  s.t.  A'z = b', 0 <= z <= u``.  Nonbasic
columns sit at either bound, so finite upper bounds never become rows.  Phase 1
starts from a crash basis of positive singleton columns and only adds
artificials for rows that lack one.  Pricing is Dantzig's rule, switching to
Bland's rule while pivots are degenerate.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..errors import ContractViolation
from . import tolerances


class LpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITER_LIMIT = "IterLimit"


@dataclass
class LinearProgram:
    objective: np.ndarray
    eq_lhs: np.ndarray | None = None
    eq_rhs: np.ndarray | None = None
    ub_lhs: np.ndarray | None = None
    ub_rhs: np.ndarray | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).ravel()
        n = c.size
        self.objective = c
        self.eq_lhs, self.eq_rhs = _rows(self.eq_lhs, self.eq_rhs, n, "equality")
        self.ub_lhs, self.ub_rhs = _rows(self.ub_lhs, self.ub_rhs, n, "inequality")
        self.lo = np.zeros(n) if self.lo is None else np.broadcast_to(np.asarray(self.lo, dtype=float), (n,)).copy()
        self.hi = np.full(n, np.inf) if self.hi is None else np.broadcast_to(np.asarray(self.hi, dtype=float), (n,)).copy()
        for name, arr in (("objective", c), ("eq_lhs", self.eq_lhs), ("eq_rhs", self.eq_rhs),
                          ("ub_lhs", self.ub_lhs), ("ub_rhs", self.ub_rhs)):
            if not np.all(np.isfinite(arr)):
                raise ContractViolation(f"non-finite coefficient in {name}")
        if np.any(np.isnan(self.lo)) or np.any(np.isnan(self.hi)):
            raise ContractViolation("NaN bound")

    @property
    def n_vars(self):
        return self.objective.size


def _rows(lhs, rhs, n, kind):
    if lhs is None:
        return np.zeros((0, n)), np.zeros(0)
    lhs = np.atleast_2d(np.asarray(lhs, dtype=float))
    rhs = np.asarray(rhs, dtype=float).ravel()
    if lhs.shape[1] != n or lhs.shape[0] != rhs.size:
        raise ContractViolation(f"{kind} system has shape {lhs.shape} with rhs of length {rhs.size}; expected {n} columns")
    return lhs, rhs


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray | None
    objective: float
    eq_duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ub_duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0

    @property
    def optimal(self):
        return self.status is LpStatus.OPTIMAL


class _Standardized:
    """Shifted/split copy of a LinearProgram with all columns on [0, u]."""

    def __init__(self, lp):
        n = lp.n_vars
        cols, signs, upper = [], [], []
        offset = np.zeros(n)
        for j in range(n):
            lo, hi = lp.lo[j], lp.hi[j]
            if lo > hi:
                raise _Infeasible()
            if np.isfinite(lo):
                offset[j] = lo
                cols.append(j), signs.append(1.0), upper.append(hi - lo)
            elif np.isfinite(hi):
                offset[j] = hi
                cols.append(j), signs.append(-1.0), upper.append(np.inf)
            else:
                cols.append(j), signs.append(1.0), upper.append(np.inf)
                cols.append(j), signs.append(-1.0), upper.append(np.inf)
        self.cols = np.array(cols, dtype=int)
        self.signs = np.array(signs)
        self.offset = offset
        m_eq, m_ub = lp.eq_lhs.shape[0], lp.ub_lhs.shape[0]
        k = self.cols.size
        A = np.zeros((m_eq + m_ub, k + m_ub))
        A[:m_eq, :k] = lp.eq_lhs[:, self.cols] * self.signs
        A[m_eq:, :k] = lp.ub_lhs[:, self.cols] * self.signs
        A[m_eq:, k:] = np.eye(m_ub)
        b = np.concatenate([lp.eq_rhs - lp.eq_lhs @ offset, lp.ub_rhs - lp.ub_lhs @ offset])
        self.row_sign = np.where(b < 0, -1.0, 1.0)
        self.A = A * self.row_sign[:, None]
        self.b = b * self.row_sign
        self.c = np.concatenate([lp.objective[self.cols] * self.signs, np.zeros(m_ub)])
        self.u = np.concatenate([np.array(upper), np.full(m_ub, np.inf)])
        self.n_struct = k
        self.m_eq = m_eq
        self.const = float(lp.objective @ offset)

    def recover(self, z, n):
        x = self.offset.copy()
        np.add.at(x, self.cols, self.signs * z[: self.n_struct])
        return x


class _Infeasible(Exception):
    pass


def _crash_basis(A, b, u):
    """Pick, per row, a positive singleton column whose implied value fits its bound."""
    m = A.shape[0]
    nz = A != 0
    singleton = np.flatnonzero(nz.sum(axis=0) == 1)
    basis = np.full(m, -1)
    for j in singleton:
        i = int(np.flatnonzero(nz[:, j])[0])
        if basis[i] >= 0 or A[i, j] <= 0:
            continue
        if b[i] / A[i, j] <= u[j]:
            basis[i] = j
    return basis


class _Simplex:
    def __init__(self, A, b, u, basis, max_iter, tol):
        self.A, self.b, self.u = A, b, u
        self.m, self.n = A.shape
        self.basis = basis.copy()
        self.at_upper = np.zeros(self.n, dtype=bool)
        self.tol = tol
        self.max_iter = max_iter
        self.iterations = 0
        self._refactor()

    def _refactor(self):
        B = self.A[:, self.basis]
        self.Binv = np.linalg.inv(B)
        rhs = self.b - self.A[:, self.at_upper] @ self.u[self.at_upper]
        self.xB = self.Binv @ rhs

    def values(self):
        z = np.where(self.at_upper, self.u, 0.0)
        z[self.basis] = self.xB
        return z

    def run(self, cost):
        """Optimise ``cost`` from the current basis. Returns 'optimal', 'unbounded' or 'limit'."""
        tol = self.tol
        is_basic = np.zeros(self.n, dtype=bool)
        is_basic[self.basis] = True
        movable = self.u > 0
        degenerate_run = 0
        since_refactor = 0
        while True:
            if self.iterations >= self.max_iter:
                return "limit"
            y = cost[self.basis] @ self.Binv
            d = cost - y @ self.A
            improving = ~is_basic & movable & (
                (~self.at_upper & (d < -tol)) | (self.at_upper & (d > tol)))
            cand = np.flatnonzero(improving)
            if cand.size == 0:
                return "optimal"
            bland = degenerate_run > 20
            j = int(cand[0]) if bland else int(cand[np.argmax(np.abs(d[cand]))])
            direction = -1.0 if self.at_upper[j] else 1.0
            alpha = self.Binv @ self.A[:, j]
            step = direction * alpha
            xB = np.maximum(self.xB, 0.0)
            ratios = np.full(self.m, np.inf)
            dec = step > tol
            ratios[dec] = xB[dec] / step[dec]
            ub = self.u[self.basis]
            inc = (step < -tol) & np.isfinite(ub)
            ratios[inc] = np.maximum(ub[inc] - self.xB[inc], 0.0) / (-step[inc])
            theta = ratios.min() if self.m else np.inf
            flip = self.u[j]
            if not np.isfinite(theta) and not np.isfinite(flip):
                return "unbounded"
            self.iterations += 1
            if flip <= theta:
                # entering column runs to its opposite bound; basis unchanged
                self.xB = self.xB - flip * step
                self.at_upper[j] = not self.at_upper[j]
                degenerate_run = 0
                continue
            ties = np.flatnonzero(ratios <= theta + 1e-12)
            if bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(alpha[ties]))])
            leaving = self.basis[r]
            leaves_upper = step[r] < 0
            self.xB = self.xB - theta * step
            self.xB[r] = (self.u[j] if self.at_upper[j] else 0.0) + direction * theta
            piv = self.Binv[r] / alpha[r]
            self.Binv -= np.outer(alpha, piv)
            self.Binv[r] = piv
            self.basis[r] = j
            is_basic[j], is_basic[leaving] = True, False
            self.at_upper[j] = False
            self.at_upper[leaving] = bool(leaves_upper)
            degenerate_run = degenerate_run + 1 if theta <= 1e-12 else 0
            since_refactor += 1
            if since_refactor >= 100:
                self._refactor()
                since_refactor = 0


def solve_lp(lp, max_iter=None, tol=1e-10):
    """Solve ``lp`` and return an :class:`LpSolution`.

    Infeasible and unbounded programs are reported through ``status``; ``x`` is
    ``None`` in those cases.  Row duals follow the convention
    ``c - A_eq.T @ eq_duals - A_ub.T @ ub_duals`` = reduced costs, so
    ``ub_duals <= 0`` at optimality.
    """
    if not isinstance(lp, LinearProgram):
        raise ContractViolation("solve_lp expects a LinearProgram")
    try:
        std = _Standardized(lp)
    except _Infeasible:
        return LpSolution(LpStatus.INFEASIBLE, None, np.nan)
    A, b, u, c = std.A, std.b, std.u, std.c
    m, n = A.shape
    if max_iter is None:
        max_iter = 50 * (m + n) + 1000
    if m == 0:
        # only bounds: every column sits at whichever bound its cost prefers
        if np.any((c < 0) & ~np.isfinite(u)):
            return LpSolution(LpStatus.UNBOUNDED, None, -np.inf)
        z = np.where(c < 0, u, 0.0)
        x = std.recover(z, lp.n_vars)
        return LpSolution(LpStatus.OPTIMAL, x, float(lp.objective @ x),
                          np.zeros(lp.eq_lhs.shape[0]), np.zeros(lp.ub_lhs.shape[0]))

    basis = _crash_basis(A, b, u)
    missing = np.flatnonzero(basis < 0)
    n_art = missing.size
    if n_art:
        art = np.zeros((m, n_art))
        art[missing, np.arange(n_art)] = 1.0
        A = np.hstack([A, art])
        u = np.concatenate([u, np.full(n_art, np.inf)])
        c = np.concatenate([c, np.zeros(n_art)])
        basis[missing] = n + np.arange(n_art)

    sx = _Simplex(A, b, u, basis, max_iter, tol)
    if n_art:
        phase1 = np.zeros(A.shape[1])
        phase1[n:] = 1.0
        outcome = sx.run(phase1)
        if outcome == "limit":
            return LpSolution(LpStatus.ITER_LIMIT, None, np.nan, iterations=sx.iterations)
        sx._refactor()
        infeas = sx.values()[n:].sum()
        if infeas > tolerances.FEASIBILITY * max(1.0, np.abs(b).max()):
            return LpSolution(LpStatus.INFEASIBLE, None, np.nan, iterations=sx.iterations)
        # artificials are pinned to zero for phase 2
        sx.u[n:] = 0.0
        sx.at_upper[n:] = False
    outcome = sx.run(c)
    if outcome == "unbounded":
        return LpSolution(LpStatus.UNBOUNDED, None, -np.inf, iterations=sx.iterations)
    if outcome == "limit":
        return LpSolution(LpStatus.ITER_LIMIT, None, np.nan, iterations=sx.iterations)
    sx._refactor()
    z = sx.values()
    z[:n] = np.clip(z[:n], 0.0, u[:n])
    x = std.recover(z[:n], lp.n_vars)
    # snap onto bounds the recovery may have grazed by rounding
    x = np.clip(x, lp.lo, lp.hi)
    y = (c[sx.basis] @ sx.Binv) * std.row_sign
    return LpSolution(
        LpStatus.OPTIMAL, x, float(lp.objective @ x),
        eq_duals=y[: std.m_eq], ub_duals=y[std.m_eq:], iterations=sx.iterations,
    )


def constraint_violation(lp, x):
    """Largest absolute violation of any constraint or bound at ``x``."""
    worst = 0.0
    if lp.eq_lhs.size:
        worst = max(worst, np.abs(lp.eq_lhs @ x - lp.eq_rhs).max())
    if lp.ub_lhs.size:
        worst = max(worst, np.maximum(lp.ub_lhs @ x - lp.ub_rhs, 0).max())
    worst = max(worst, np.maximum(lp.lo - x, 0).max(initial=0), np.maximum(x - lp.hi, 0).max(initial=0))
    return float(worst)
