"""Correlation-distance clustering and the Clust1 / Clust2 selection rules."""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..core import Portfolio, finalize_weights
from ..errors import ContractViolation
from ..numerics import QuadraticProgram, solve_qp
from .optimization import mse_objective


@dataclass
class ClusterAssignment:
    """Flat cut of a complete-linkage dendrogram.

    ``merges`` lists ``(a, b, height)`` where ``a < b`` are the smallest
    member indices of the two clusters joined at that step.
    """

    labels: np.ndarray
    merge_heights: np.ndarray
    merges: list
    linkage: str = "complete"

    @property
    def n_clusters(self):
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def members(self, c):
        return np.flatnonzero(self.labels == c)


def _safe_corr(R):
    R = np.atleast_2d(np.asarray(R, dtype=float))
    Rc = R - R.mean(axis=0)
    sd = np.sqrt((Rc * Rc).sum(axis=0))
    flat = sd == 0
    if flat.any():
        warnings.warn(f"{int(flat.sum())} zero-variance series; their correlation is taken as 0",
                      RuntimeWarning, stacklevel=3)
    sd = np.where(flat, 1.0, sd)
    C = (Rc.T @ Rc) / np.outer(sd, sd)
    C[flat, :] = 0.0
    C[:, flat] = 0.0
    np.fill_diagonal(C, 1.0)
    return np.clip(C, -1.0, 1.0)


def corr_distance(x, y):
    """``sqrt(2 (1 - c))`` with ``c`` the Pearson correlation of two series."""
    C = _safe_corr(np.column_stack([np.ravel(x), np.ravel(y)]))
    c = C[0, 1]
    if np.array_equal(np.ravel(x), np.ravel(y)):
        c = 1.0 if np.ptp(np.ravel(x)) > 0 else 0.0
    return float(math.sqrt(max(2.0 * (1.0 - c), 0.0)))


def corr_distance_matrix(R):
    """Pairwise correlation distances between the columns of ``R``."""
    C = _safe_corr(R)
    D = np.sqrt(np.maximum(2.0 * (1.0 - C), 0.0))
    np.fill_diagonal(D, 0.0)
    return D


def price_distances(x, y):
    """Scale-free price distances ``(d1, d2)`` between two price paths.

    ``d1 = min_a mean(((x - a y) / x)^2)`` and
    ``d2 = min_a mean(((x - a y) / (a y))^2)``; both minimisers are closed form.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ContractViolation("price distances need positive prices")
    z = y / x
    a = z.sum() / (z @ z)
    d1 = np.mean((1.0 - a * z) ** 2)
    v = x / y
    b = v.sum() / (v @ v)
    d2 = np.mean((b * v - 1.0) ** 2)
    return float(d1), float(d2)


def hcluster_complete(D, n_clusters):
    """Agglomerative complete linkage on a distance matrix, cut at ``n_clusters``.

    Each step merges the pair of clusters with the smallest maximum pairwise
    distance; ties go to the lexicographically smallest pair of cluster
    representatives (smallest member index). Labels are numbered from 0 in
    order of each cluster's smallest member.
    """
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    if D.shape != (n, n):
        raise ContractViolation("distance matrix must be square")
    if not np.allclose(D, D.T, atol=1e-12):
        raise ContractViolation("distance matrix must be symmetric")
    k = int(n_clusters)
    if not 1 <= k <= max(n, 1):
        raise ContractViolation(f"n_clusters must lie in [1, {n}], got {k}")
    link = D.copy()
    np.fill_diagonal(link, np.inf)
    active = np.ones(n, dtype=bool)
    owner = np.arange(n)
    merges = []
    for _ in range(n - k):
        sub = np.where(np.outer(active, active), link, np.inf)
        # argmin scans row-major, so the first hit is the smallest (i, j)
        flat = int(np.argmin(sub))
        i, j = divmod(flat, n)
        if i > j:
            i, j = j, i
        merges.append((i, j, float(link[i, j])))
        link[i, :] = np.maximum(link[i, :], link[j, :])
        link[:, i] = link[i, :]
        link[i, i] = np.inf
        active[j] = False
        owner[owner == j] = i
    reps = np.unique(owner)
    labels = np.searchsorted(reps, owner)
    heights = np.array([m[2] for m in merges])
    return ClusterAssignment(labels.astype(int), heights, merges)


def cluster_returns(R, n_clusters):
    return hcluster_complete(corr_distance_matrix(R), n_clusters)


def clust1_select(assign, seed=0):
    """One uniformly drawn member from every cluster."""
    rng = np.random.default_rng(seed)
    picks = [int(rng.choice(assign.members(c))) for c in range(assign.n_clusters)]
    return np.sort(np.array(picks, dtype=int))


def cluster_quotas(sizes, K):
    """Proportional quotas summing to ``K`` (largest-remainder rounding).

    Floors of ``K * size / n`` are topped up one at a time in order of the
    largest fractional remainder; ties favour the smaller cluster, then the
    lower label. No quota exceeds its cluster size.
    """
    sizes = np.asarray(sizes, dtype=int)
    n = int(sizes.sum())
    if not 0 < K <= n:
        raise ContractViolation(f"K must lie in [1, {n}], got {K}")
    share = K * sizes / n
    q = np.minimum(np.floor(share + 1e-12).astype(int), sizes)
    rem = share - q
    while q.sum() < K:
        open_ = q < sizes
        order = sorted(np.flatnonzero(open_), key=lambda c: (-round(rem[c], 12), sizes[c], c))
        c = order[0]
        q[c] += 1
        rem[c] -= 1.0
    return q


def clust2_select(assign, K, seed=0):
    """Draw ``quota_c`` members without replacement from each cluster."""
    rng = np.random.default_rng(seed)
    sizes = np.bincount(assign.labels, minlength=assign.n_clusters)
    quotas = cluster_quotas(sizes, K)
    picks = []
    for c, qc in enumerate(quotas):
        if qc:
            picks.extend(rng.choice(assign.members(c), size=int(qc), replace=False).tolist())
    return np.sort(np.array(picks, dtype=int))


def mse_on_support(R, I, support, model, lo=0.0, hi=1.0, tol=1e-10):
    """Minimum-MSE simplex weights restricted to ``support``."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    I = np.asarray(I, dtype=float).ravel()
    T, n = R.shape
    Q = (2.0 / T) * (R.T @ R)
    q = -(2.0 / T) * (R.T @ I)
    qp = QuadraticProgram(Q, q, np.full(n, lo), np.full(n, hi), support=np.asarray(support, int),
                          constant=float(I @ I) / T)
    res = solve_qp(qp, tol=tol)
    w = finalize_weights(res.x)
    return Portfolio(w, mse_objective(R, I, w), model,
                     info={"support": np.asarray(support, int).tolist(), "qp_iterations": res.iterations})


def clust1_track(R, I, K, seed=0):
    assign = cluster_returns(R, K)
    support = clust1_select(assign, seed)
    port = mse_on_support(R, I, support, "Clust1")
    port.info["labels"] = assign.labels
    return port


def clust2_track(R, I, K, seed=0, n_clusters=None):
    """Clust2 with ``ceil(K/2)`` clusters unless ``n_clusters`` is given."""
    n = np.shape(R)[1]
    k = n_clusters if n_clusters is not None else math.ceil(K / 2)
    assign = cluster_returns(R, min(k, n))
    support = clust2_select(assign, min(K, n), seed)
    port = mse_on_support(R, I, support, "Clust2")
    port.info["labels"] = assign.labels
    return port
