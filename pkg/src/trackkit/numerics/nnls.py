"""Lawson-Hanson active-set non-negative least squares."""

import numpy as np

from ..errors import ContractViolation


def nnls(A, b, max_iter=None, tol=None):
    """Solve ``min ||A x - b||_2  s.t.  x >= 0``.

    Parameters
    ----------
    A : array_like, shape (m, n)
    b : array_like, shape (m,)
    max_iter : int, optional
        Outer iterations (default ``3 * n``).
    tol : float, optional
        Dual feasibility tolerance used to pick entering columns.

    Returns
    -------
    x : ndarray, shape (n,)
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    m, n = A.shape
    if b.size != m:
        raise ContractViolation(f"A has {m} rows but b has length {b.size}")
    if max_iter is None:
        max_iter = 3 * n + 10
    if tol is None:
        tol = 10 * np.finfo(float).eps * max(m, n) * max(1.0, np.abs(A).max(initial=0.0)) * max(1.0, np.abs(b).max(initial=0.0))

    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    w = A.T @ (b - A @ x)
    for _ in range(max_iter):
        cand = ~passive & (w > tol)
        if not cand.any():
            break
        j = int(np.argmax(np.where(cand, w, -np.inf)))
        passive[j] = True
        while True:
            idx = np.flatnonzero(passive)
            s = np.zeros(n)
            s[idx] = np.linalg.lstsq(A[:, idx], b, rcond=None)[0]
            if np.all(s[idx] > 0):
                x = s
                break
            neg = idx[s[idx] <= 0]
            alpha = np.min(x[neg] / (x[neg] - s[neg]))
            x = x + alpha * (s - x)
            # columns driven to zero leave the passive set
            passive &= x > tol
            x[~passive] = 0.0
        w = A.T @ (b - A @ x)
    return x
