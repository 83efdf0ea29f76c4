"""Sparse epsilon- and nu-SVR trackers solved by proximal alternating linearised steps."""

import itertools
from dataclasses import dataclass

import numpy as np

from ..core import Portfolio, TrackingProblem, finalize_weights
from ..errors import ContractViolation, InfeasibleError
from ..numerics import project_simplex
from .optimization import mse_objective

C1_GRID = (0.1, 1.0, 10.0, 50.0)
EPS_GRID = (0.001, 0.005, 0.01, 0.05)


@dataclass
class SvrParams:
    C1: float = 1.0
    C2: float = 1.0
    eps: float = 0.01
    u: float = 1.0
    K: int = 45

    def __post_init__(self):
        if not self.C1 > 0:
            raise ContractViolation("C1 must be positive")
        if not 0 < self.u <= 1:
            raise ContractViolation("u must lie in (0, 1]")
        if self.eps < 0:
            raise ContractViolation("eps must be nonnegative")
        if self.C2 < 0:
            raise ContractViolation("C2 must be nonnegative")
        self.K = int(self.K)
        if self.K < 1:
            raise ContractViolation("K must be positive")
        if self.u * self.K < 1 - 1e-12:
            raise InfeasibleError(f"cap u={self.u} with K={self.K} cannot reach a unit budget")


def svr_objective(R, I, w, eps, C1, C2=0.0, variant="eps"):
    a = R @ w - I
    val = 0.5 * (w @ w) + C1 * np.sum(np.maximum(np.abs(a) - eps, 0.0) ** 2)
    if variant == "nu":
        val += C2 * eps
    return float(val)


def sparse_projection(v, K, u=1.0, rounds=10):
    """Hard-threshold to the K largest entries, clip to ``[0, u]``, renormalise.

    Clip and renormalise repeat until nothing exceeds ``u`` (at most
    ``rounds`` passes); a final exact box-simplex projection on the kept
    entries guarantees feasibility if the loop has not settled. ``u * K`` may
    fall short of 1 by 1e-12 so that caps like ``1/K`` survive round-off.
    """
    v = np.asarray(v, dtype=float)
    n = v.size
    K = min(int(K), n)
    if u * K < 1 - 1e-12:
        raise InfeasibleError(f"cap u={u} with K={K} cannot reach a unit budget")
    keep = np.sort(np.argsort(-v, kind="stable")[:K])
    x = np.clip(v[keep], 0.0, u)
    for _ in range(rounds):
        s = x.sum()
        if s <= 0:
            x = np.full(K, 1.0 / K)
            break
        x = x / s
        if x.max() <= u + 1e-15:
            break
        x = np.clip(x, 0.0, u)
    if abs(x.sum() - 1) > 1e-12 or x.max() > u + 1e-15:
        x = project_simplex(x, 0.0, u)
    w = np.zeros(n)
    w[keep] = x
    return w


def _nu_eps(absr, C1, C2):
    """Closed-form ``argmin_{eps >= 0} C1 sum (|a| - eps)_+^2 + C2 eps``."""
    s = np.sort(absr)[::-1]
    cums = np.cumsum(s)
    target = C2 / (2.0 * C1)
    for m in range(1, s.size + 1):
        e = (cums[m - 1] - target) / m
        lower = s[m] if m < s.size else 0.0
        if e >= lower - 1e-15 and e <= s[m - 1] + 1e-15:
            return max(e, 0.0)
    return 0.0


def palm_svr(p, params, variant="eps", seed=0, tol=1e-9, max_iter=5000, w0=None):
    """Sparse SVR tracking portfolio.

    Minimises ``0.5||w||^2 + C1 sum[(Rw - I - eps)_+^2 + (I - Rw - eps)_+^2]``
    (plus ``C2 eps`` for ``variant="nu"``, where ``eps`` is also a variable)
    over ``{sum w = 1, 0 <= w <= u, ||w||_0 <= K}``. Each iteration takes a
    linearised proximal step in ``w`` followed by the sparse projection, then
    for nu updates ``eps`` in closed form. A step is accepted only if the
    objective does not increase; otherwise the step size is halved.
    """
    if variant not in ("eps", "nu"):
        raise ContractViolation(f"unknown SVR variant {variant!r}")
    R, I = p.R, p.I
    n = p.n
    K = min(params.K, n)
    C1, C2, u = params.C1, params.C2, params.u
    if u * K < 1 - 1e-12:
        raise InfeasibleError(f"cap u={u} with K={K} cannot reach a unit budget")
    eps = float(params.eps)
    # Lipschitz constant of the smooth part's gradient in w
    L = 1.0 + 2.0 * C1 * float(np.linalg.norm(R, 2)) ** 2
    if w0 is None:
        # start from the least-squares direction so the threshold sees signal
        g0 = R.T @ I
        w = sparse_projection(g0 + 1e-12 * np.random.default_rng(seed).random(n), K, u)
    else:
        w = sparse_projection(w0, K, u)
    if variant == "nu":
        eps = _nu_eps(np.abs(R @ w - I), C1, C2)
    f = svr_objective(R, I, w, eps, C1, C2, variant)
    history = [f]
    it = 0
    for it in range(1, max_iter + 1):
        a = R @ w - I
        g = w + 2.0 * C1 * (R.T @ (np.maximum(a - eps, 0.0) - np.maximum(-a - eps, 0.0)))
        step = 1.0 / L
        accepted = False
        for _ in range(30):
            wn = sparse_projection(w - step * g, K, u)
            fn = svr_objective(R, I, wn, eps, C1, C2, variant)
            if fn <= f + 1e-15:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            wn, fn = w, f
        if variant == "nu":
            eps = _nu_eps(np.abs(R @ wn - I), C1, C2)
            fn = svr_objective(R, I, wn, eps, C1, C2, variant)
        done = abs(f - fn) < tol
        w, f = wn, fn
        history.append(f)
        if done:
            break
    w = finalize_weights(w, K)
    model = "eps-SVR" if variant == "eps" else "nu-SVR"
    status = "ok" if it < max_iter else "iteration-limit"
    return Portfolio(w, mse_objective(R, I, w), model, status=status,
                     info={"svr_objective": f, "eps": eps, "iterations": it, "C1": C1,
                           "history": history})


def tracking_error(R, I, w):
    return float(np.std(R @ w - I, ddof=1))


def palm_svr_grid(R, I, K, variant="eps", C1_grid=C1_GRID, eps_grid=EPS_GRID, C2=1.0, u=1.0, seed=0):
    """Run PALM over the hyper-parameter grid, keep the lowest in-sample TE.

    For nu the grid ``eps`` values are starting tolerances only, since ``eps``
    is re-optimised every iteration.
    """
    p = TrackingProblem(R, I, K)
    best = None
    for C1, eps in itertools.product(C1_grid, eps_grid):
        params = SvrParams(C1=C1, C2=C2, eps=eps, u=u, K=min(K, p.n))
        port = palm_svr(p, params, variant, seed)
        te = tracking_error(p.R, p.I, port.weights)
        if best is None or te < best[0] - 1e-15:
            best = (te, C1, eps, port)
    te, C1, eps, port = best
    port.info.update({"grid_C1": C1, "grid_eps": eps, "in_sample_te": te})
    return port
