"""Random forests (CART, numpy only), permutation importances and ridge weighting."""

from dataclasses import dataclass, field

import numpy as np

from ..core import Portfolio, finalize_weights, uniform_on
from ..errors import ContractViolation
from ..numerics import nnls
from .optimization import mse_objective


@dataclass
class Tree:
    """Flat binary tree; ``left[k] == -1`` marks a leaf.

    For classification ``value`` holds the fraction of class 1 in the leaf.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self):
        return self.feature.size

    def used_features(self):
        return np.unique(self.feature[self.left >= 0])

    def apply(self, X):
        node = np.zeros(X.shape[0], dtype=int)
        rows = np.arange(X.shape[0])
        live = self.left[node] >= 0
        while live.any():
            r = rows[live]
            k = node[r]
            go_left = X[r, self.feature[k]] <= self.threshold[k]
            node[r] = np.where(go_left, self.left[k], self.right[k])
            live = self.left[node] >= 0
        return node

    def predict(self, X):
        return self.value[self.apply(X)]


@dataclass
class Forest:
    trees: list
    task: str
    oob_index: list
    n_features: int
    info: dict = field(default_factory=dict)

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.task == "classification":
            votes = np.mean([t.predict(X) > 0.5 for t in self.trees], axis=0)
            return (votes > 0.5).astype(int)
        return np.mean([t.predict(X) for t in self.trees], axis=0)


def _impurity_scan(xs, ys, min_leaf, task):
    """Best split per column of pre-sorted ``xs`` / aligned ``ys``.

    Returns (score, position) arrays; ``score`` is the summed child impurity
    (SSE for regression, count-weighted Gini for classification) for a split
    between sorted rows ``pos - 1`` and ``pos``.
    """
    m_rows = xs.shape[0]
    k = np.arange(1, m_rows)[:, None].astype(float)
    cs = np.cumsum(ys, axis=0)[:-1]
    tot = ys.sum(axis=0)
    if task == "regression":
        cq = np.cumsum(ys * ys, axis=0)[:-1]
        totq = (ys * ys).sum(axis=0)
        left = cq - cs * cs / k
        right = (totq - cq) - (tot - cs) ** 2 / (m_rows - k)
        score = left + right
    else:
        p_l = cs / k
        p_r = (tot - cs) / (m_rows - k)
        score = 2.0 * (k * p_l * (1 - p_l) + (m_rows - k) * p_r * (1 - p_r))
    valid = xs[1:] > xs[:-1]
    valid[: max(min_leaf - 1, 0)] = False
    if min_leaf > 1:
        valid[m_rows - min_leaf:] = False
    score = np.where(valid, score, np.inf)
    pos = np.argmin(score, axis=0)
    return score[pos, np.arange(score.shape[1])], pos + 1


def best_split(X, y, features, min_leaf, task):
    """Exact best split of ``(X, y)`` over ``features``; None if no valid split."""
    xs_raw = X[:, features]
    order = np.argsort(xs_raw, axis=0, kind="stable")
    xs = np.take_along_axis(xs_raw, order, axis=0)
    ys = y[order]
    score, pos = _impurity_scan(xs, ys, min_leaf, task)
    j = int(np.argmin(score))
    if not np.isfinite(score[j]):
        return None
    c = np.arange(len(features))
    thr = 0.5 * (xs[pos - 1, c] + xs[pos, c])
    # guard against the midpoint rounding up onto the right value
    t = thr[j] if thr[j] < xs[pos[j], j] else xs[pos[j] - 1, j]
    return int(features[j]), float(t), float(score[j])


def _node_impurity(y, task):
    if task == "regression":
        return float(((y - y.mean()) ** 2).sum())
    p = y.mean()
    return float(2.0 * y.size * p * (1 - p))


def grow_tree(X, y, task, m_features, min_leaf=5, max_depth=None, rng=None):
    """Grow one CART tree, sampling ``m_features`` candidate columns per node."""
    rng = np.random.default_rng(rng)
    n = X.shape[1]
    m = min(max(int(m_features), 1), n)
    feat, thr, left, right, val = [], [], [], [], []

    def new_node(ys):
        feat.append(-1)
        thr.append(0.0)
        left.append(-1)
        right.append(-1)
        val.append(float(ys.mean()))
        return len(feat) - 1

    root = new_node(y)
    stack = [(root, np.arange(X.shape[0]), 0)]
    while stack:
        node, rows, depth = stack.pop()
        ys = y[rows]
        if rows.size < 2 * min_leaf or np.ptp(ys) == 0:
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        cand = rng.choice(n, size=m, replace=False) if m < n else np.arange(n)
        found = best_split(X[rows], ys, cand, min_leaf, task)
        if found is None:
            continue
        f, t, score = found
        if score >= _node_impurity(ys, task) - 1e-15:
            continue
        go = X[rows, f] <= t
        lrows, rrows = rows[go], rows[~go]
        feat[node], thr[node] = f, t
        li, ri = new_node(y[lrows]), new_node(y[rrows])
        left[node], right[node] = li, ri
        stack.append((ri, rrows, depth + 1))
        stack.append((li, lrows, depth + 1))
    return Tree(np.array(feat), np.array(thr), np.array(left), np.array(right), np.array(val))


def fit_forest(R, target, task="regression", n_trees=100, m_features=None, seed=0,
               min_leaf=5, max_depth=None, bootstrap=True):
    """Bagged CART ensemble.

    ``m_features`` defaults to ``sqrt(n)`` for classification and ``n/3`` for
    regression. Classification targets must be 0/1.
    """
    X = np.atleast_2d(np.asarray(R, dtype=float))
    y = np.asarray(target, dtype=float).ravel()
    T, n = X.shape
    if y.size != T:
        raise ContractViolation("target length does not match the number of rows")
    if task not in ("classification", "regression"):
        raise ContractViolation(f"unknown forest task {task!r}")
    if task == "classification" and not np.all((y == 0) | (y == 1)):
        raise ContractViolation("classification targets must be 0 or 1")
    if m_features is None:
        m_features = max(1, int(np.sqrt(n))) if task == "classification" else max(1, n // 3)
    rng = np.random.default_rng(seed)
    trees, oob = [], []
    for _ in range(int(n_trees)):
        if bootstrap:
            rows = rng.integers(0, T, size=T)
            mask = np.ones(T, dtype=bool)
            mask[rows] = False
            out = np.flatnonzero(mask)
        else:
            rows = np.arange(T)
            out = np.arange(0)
        tree_seed = int(rng.integers(2**63 - 1))
        trees.append(grow_tree(X[rows], y[rows], task, m_features, min_leaf, max_depth, tree_seed))
        oob.append(out)
    return Forest(trees, task, oob, n, info={"m_features": int(m_features), "min_leaf": min_leaf})


def _permutation_scores(forest, X, y, seed, tree_score):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    rng = np.random.default_rng(seed)
    n = forest.n_features
    total = np.zeros(n)
    counts = np.zeros(n)
    for tree, out in zip(forest.trees, forest.oob_index):
        if out.size < 2:
            continue
        Xo, yo = X[out], y[out]
        base = tree_score(tree.predict(Xo), yo, None)
        if base is None:
            continue
        used = set(tree.used_features().tolist())
        counts += 1
        for i in sorted(used):
            Xp = Xo.copy()
            Xp[:, i] = Xo[rng.permutation(out.size), i]
            total[i] += tree_score(tree.predict(Xp), yo, base)
    return np.where(counts > 0, total / np.maximum(counts, 1), 0.0)


def mda_importance(forest, R, labels, seed=0):
    """Mean decrease in out-of-bag accuracy when each column is permuted.

    Per tree the drop is ``acc_base - acc_perm`` on that tree's OOB rows;
    scores average over trees. Features a tree never splits on score 0 there.
    """
    def score(pred, yo, base):
        acc = float(np.mean((pred > 0.5) == (yo > 0.5)))
        return acc if base is None else base - acc
    return _permutation_scores(forest, R, labels, seed, score)


def pim_importance(forest, R, y, seed=0):
    """Percent increase in OOB mean squared error, ``100 * mean_l (MSE_perm - MSE) / MSE``.

    Trees whose OOB error is exactly zero are left out of the average.
    """
    def score(pred, yo, base):
        mse = float(np.mean((pred - yo) ** 2))
        if base is None:
            return mse if mse > 0 else None
        return 100.0 * (mse - base) / base
    return _permutation_scores(forest, R, y, seed, score)


# -- ridge weighting ---------------------------------------------------------

def nonneg_ridge(R, I, lam):
    """``argmin_{w >= 0} (1/T)||I - R w||^2 + lam ||w||^2`` via augmented NNLS."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    I = np.asarray(I, dtype=float).ravel()
    T, k = R.shape
    A = np.vstack([R / np.sqrt(T), np.sqrt(lam) * np.eye(k)])
    b = np.concatenate([I / np.sqrt(T), np.zeros(k)])
    return nnls(A, b)


def contiguous_folds(T, folds=5):
    return np.array_split(np.arange(T), folds)


def ridge_cv_weights(R_support, I, alpha_range=(1e-4, 1e-2), folds=5, n_alphas=11, support=None, n=None,
                     model="ridge"):
    """Nonnegative ridge with lambda chosen by contiguous-block CV, normalised to one.

    ``support``/``n`` embed the result into a length-``n`` weight vector;
    otherwise the weights are indexed by the columns of ``R_support``.
    """
    Rs = np.atleast_2d(np.asarray(R_support, dtype=float))
    I = np.asarray(I, dtype=float).ravel()
    T, k = Rs.shape
    lo, hi = alpha_range
    if not 0 < lo <= hi:
        raise ContractViolation("alpha range must be positive and ordered")
    grid = np.geomspace(lo, hi, n_alphas) if hi > lo else np.array([lo])
    blocks = contiguous_folds(T, folds)
    cv = np.zeros(grid.size)
    for a, lam in enumerate(grid):
        err = 0.0
        for blk in blocks:
            train = np.setdiff1d(np.arange(T), blk)
            w = nonneg_ridge(Rs[train], I[train], lam)
            err += float(np.sum((I[blk] - Rs[blk] @ w) ** 2))
        cv[a] = err / T
    best = int(np.argmin(cv))
    lam = float(grid[best])
    beta = nonneg_ridge(Rs, I, lam)
    if support is None:
        support, n = np.arange(k), k
    support = np.asarray(support, dtype=int)
    status = "ok"
    if beta.sum() <= 1e-12:
        w = uniform_on(support, n)
        status = "uniform-fallback"
    else:
        w = np.zeros(n)
        w[support] = beta / beta.sum()
        w = finalize_weights(w)
    Rfull = np.zeros((T, n))
    Rfull[:, support] = Rs
    return Portfolio(w, mse_objective(Rfull, I, w), model, status=status,
                     info={"lambda": lam, "cv_mse": cv.tolist(), "lambda_grid": grid.tolist()})


def top_k(scores, K):
    """Indices of the K largest scores, ties to the lower index."""
    order = np.lexsort((np.arange(scores.size), -np.asarray(scores)))
    return np.sort(order[:K])


def rf_clust_track(R, I, K, n_trees=100, seed=0, alpha_range=(1e-4, 1e-2), folds=5):
    """RF classification of the index direction, MDA top-K, ridge weights."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    I = np.asarray(I, dtype=float).ravel()
    labels = (I > 0).astype(float)
    forest = fit_forest(R, labels, "classification", n_trees, seed=seed)
    scores = mda_importance(forest, R, labels, seed=seed + 1)
    support = top_k(scores, min(K, R.shape[1]))
    port = ridge_cv_weights(R[:, support], I, alpha_range, folds, support=support, n=R.shape[1],
                            model="RF-Clust")
    port.info["importance"] = scores
    return port


def rf_reg_track(R, I, K, n_trees=100, seed=0, alpha_range=(1e-4, 1e-2), folds=5):
    """RF regression of the index return, PIM top-K, ridge weights."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    I = np.asarray(I, dtype=float).ravel()
    forest = fit_forest(R, I, "regression", n_trees, seed=seed)
    scores = pim_importance(forest, R, I, seed=seed + 1)
    support = top_k(scores, min(K, R.shape[1]))
    port = ridge_cv_weights(R[:, support], I, alpha_range, folds, support=support, n=R.shape[1],
                            model="RF-Reg")
    port.info["importance"] = scores
    return port
