"""Symmetric eigendecomposition by cyclic Jacobi rotations.

Each sweep visits every off-diagonal pair once.  Pairs are ordered as a
round-robin tournament so that the n/2 rotations of one round touch disjoint
rows/columns and can be applied together.
"""

import numpy as np

from ..errors import ContractViolation
from . import tolerances


def _round_robin(n):
    players = list(range(n + (n % 2)))
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(p), max(p)) for p in pairs if max(p) < n]
        if pairs:
            rounds.append(np.array(pairs, dtype=int))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def off_norm(M):
    return float(np.sqrt(max(np.sum(M * M) - np.sum(np.diag(M) ** 2), 0.0)))


def sym_eigen(M, tol=tolerances.EIGEN, max_sweeps=100):
    """Eigenvalues (descending) and orthonormal eigenvectors of symmetric ``M``.

    Rotations continue until the off-diagonal Frobenius norm falls to
    ``tol * max(1, ||M||_F)``.  Eigenvector columns are signed so their
    largest-magnitude entry is positive.
    """
    A = np.array(M, dtype=float, copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractViolation("sym_eigen needs a square matrix")
    scale = max(1.0, np.abs(A).max(initial=0.0))
    if np.abs(A - A.T).max(initial=0.0) > tolerances.SYMMETRY * scale:
        raise ContractViolation("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    V = np.eye(n)
    if n > 1:
        target = tol * max(1.0, float(np.linalg.norm(A)))
        rounds = _round_robin(n)
        for _ in range(max_sweeps):
            if off_norm(A) <= target:
                break
            for pairs in rounds:
                p, q = pairs[:, 0], pairs[:, 1]
                apq = A[p, q]
                active = np.abs(apq) > 1e-300
                if not active.any():
                    continue
                p, q, apq = p[active], q[active], apq[active]
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(tau) / (np.abs(tau) + np.hypot(1.0, tau))
                t[tau == 0] = 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                Ap, Aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Ap, Aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c[:, None] * Ap - s[:, None] * Aq
                A[q, :] = s[:, None] * Ap + c[:, None] * Aq
                A[p, q] = 0.0
                A[q, p] = 0.0
                Vp, Vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * Vp - s * Vq
                V[:, q] = s * Vp + c * Vq
    vals = np.diag(A).copy()
    order = np.argsort(-vals, kind="stable")
    vals, V = vals[order], V[:, order]
    pivot = np.argmax(np.abs(V), axis=0)
    V *= np.where(V[pivot, np.arange(n)] < 0, -1.0, 1.0)
    return vals, V
