import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import exact_split, naive_complete_linkage
from trackkit.core import TrackingProblem, check_portfolio
from trackkit.errors import ContractViolation, InfeasibleError
from trackkit.models.clustering import (
    clust1_select,
    clust1_track,
    clust2_select,
    clust2_track,
    cluster_quotas,
    corr_distance,
    corr_distance_matrix,
    hcluster_complete,
    price_distances,
)
from trackkit.models.forest import (
    best_split,
    contiguous_folds,
    fit_forest,
    grow_tree,
    mda_importance,
    nonneg_ridge,
    pim_importance,
    rf_clust_track,
    rf_reg_track,
    ridge_cv_weights,
)
from trackkit.models.svr import SvrParams, palm_svr, palm_svr_grid, sparse_projection, svr_objective


# -- correlation distance and clustering ---------------------------------------

def test_corr_distance_examples():
    rng = np.random.default_rng(0)
    x = rng.normal(size=50)
    assert corr_distance(x, x) == 0.0
    assert corr_distance(x, -x) == pytest.approx(2.0, abs=1e-12)
    a, b = rng.normal(size=(2, 200_000))
    assert corr_distance(a, b) == pytest.approx(math.sqrt(2), abs=0.01)


def test_corr_distance_zero_variance_warns():
    with pytest.warns(RuntimeWarning):
        d = corr_distance(np.ones(10), np.arange(10.0))
    assert d == pytest.approx(math.sqrt(2))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_corr_distance_matrix_properties(seed):
    rng = np.random.default_rng(seed)
    D = corr_distance_matrix(rng.normal(size=(30, 5)))
    assert np.all(D >= 0) and np.all(D <= 2 + 1e-12)
    np.testing.assert_array_equal(D, D.T)
    np.testing.assert_array_equal(np.diag(D), 0.0)


def test_price_distances_scale_free():
    rng = np.random.default_rng(1)
    x = 50 * np.exp(np.cumsum(rng.normal(0, 0.01, 100)))
    d1, d2 = price_distances(x, 3.0 * x)
    assert d1 == pytest.approx(0.0, abs=1e-20) and d2 == pytest.approx(0.0, abs=1e-20)
    y = 20 * np.exp(np.cumsum(rng.normal(0, 0.01, 100)))
    d1, _ = price_distances(x, y)
    a = np.linspace(0.1, 10, 200001)
    brute = np.min(np.mean((1 - np.outer(a, y / x)) ** 2, axis=1))
    assert d1 <= brute + 1e-15 and brute - d1 < 1e-8


def test_two_identical_pairs_grouped():
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=(2, 40))
    R = np.column_stack([a, b, a, b])
    assign = hcluster_complete(corr_distance_matrix(R), 2)
    np.testing.assert_array_equal(assign.labels, [0, 1, 0, 1])


def test_singletons_when_k_equals_n():
    D = corr_distance_matrix(np.random.default_rng(3).normal(size=(20, 5)))
    assign = hcluster_complete(D, 5)
    np.testing.assert_array_equal(assign.labels, np.arange(5))
    assert assign.merges == []


def run_linkage_oracle_suite(n_instances=50, seed=77):
    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(n_instances):
        n = int(rng.integers(2, 7))
        k = int(rng.integers(1, n + 1))
        D = corr_distance_matrix(rng.normal(size=(15, n)))
        if rng.random() < 0.3:
            D = np.round(D, 1)  # coarse values force ties
        got = hcluster_complete(D, k)
        merges, labels = naive_complete_linkage(D, k)
        same = [(a, b) for a, b, _ in got.merges] == [(a, b) for a, b, _ in merges]
        same = same and np.allclose([h for *_, h in got.merges], [h for *_, h in merges], atol=0)
        same = same and np.array_equal(got.labels, labels)
        mismatches += not same
    return mismatches


def test_complete_linkage_matches_naive_oracle():
    assert run_linkage_oracle_suite() == 0


def test_merge_heights_monotone():
    D = corr_distance_matrix(np.random.default_rng(4).normal(size=(50, 30)))
    h = hcluster_complete(D, 1).merge_heights
    assert np.all(np.diff(h) >= 0)


def test_cluster_quotas():
    np.testing.assert_array_equal(cluster_quotas([6, 3, 1], 5), [3, 1, 1])
    for sizes, K in [([5, 5, 5], 7), ([10, 1, 1, 1], 4), ([2, 2], 4)]:
        q = cluster_quotas(sizes, K)
        assert q.sum() == K and np.all(q <= sizes)


def test_cluster_selection_rules():
    rng = np.random.default_rng(5)
    D = corr_distance_matrix(rng.normal(size=(60, 12)))
    single = hcluster_complete(D, 12)
    np.testing.assert_array_equal(clust1_select(single, 3), np.arange(12))
    assign = hcluster_complete(D, 4)
    s1 = clust1_select(assign, 9)
    assert s1.size == 4 and len(set(assign.labels[s1])) == 4
    np.testing.assert_array_equal(s1, clust1_select(assign, 9))
    s2 = clust2_select(assign, 7, 9)
    assert s2.size == 7 and np.unique(s2).size == 7
    np.testing.assert_array_equal(s2, clust2_select(assign, 7, 9))


def test_clust_trackers_feasible():
    rng = np.random.default_rng(6)
    R = rng.normal(0, 0.01, (120, 15))
    I = R.mean(axis=1)
    for port in (clust1_track(R, I, 5, seed=1), clust2_track(R, I, 5, seed=1)):
        check_portfolio(port, 5)


def test_hcluster_validation():
    with pytest.raises(ContractViolation):
        hcluster_complete(np.array([[0.0, 1.0], [2.0, 0.0]]), 1)
    with pytest.raises(ContractViolation):
        hcluster_complete(np.zeros((3, 3)), 4)


# -- sparse SVR -------------------------------------------------------------------

def test_sparse_projection_example():
    np.testing.assert_allclose(sparse_projection([0.5, 0.3, 0.2], 2), [0.625, 0.375, 0.0], atol=1e-15)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=2, max_size=10), st.integers(1, 10), st.floats(0.1, 1.0))
def test_sparse_projection_feasible(v, K, u):
    K = min(K, len(v))
    if u * K < 1 - 1e-12:  # caps within 1e-12 of 1/K (float round-off) count as feasible
        with pytest.raises(InfeasibleError):
            sparse_projection(np.array(v), K, u)
        return
    w = sparse_projection(np.array(v), K, u)
    assert abs(w.sum() - 1) <= 1e-12
    assert np.all(w >= 0) and np.all(w <= u + 1e-15)
    assert np.count_nonzero(w) <= K


def test_svr_params_infeasible_cap():
    with pytest.raises(InfeasibleError):
        SvrParams(u=0.1, K=5)
    with pytest.raises(ContractViolation):
        SvrParams(C1=0.0)


def _svr_problem(seed=7, K=3):
    rng = np.random.default_rng(seed)
    R = rng.normal(0, 0.01, (150, 10))
    I = R[:, :4] @ np.array([0.4, 0.3, 0.2, 0.1]) + rng.normal(0, 0.001, 150)
    return TrackingProblem(R, I, K)


@pytest.mark.parametrize("variant", ["eps", "nu"])
def test_palm_monotone_and_feasible(variant):
    p = _svr_problem()
    params = SvrParams(C1=50.0, eps=0.001, u=0.5, K=3)
    port = palm_svr(p, params, variant)
    h = np.array(port.info["history"])
    assert np.all(np.diff(h) <= 1e-15)
    w = port.weights
    assert abs(w.sum() - 1) <= 1e-12 and np.all(w >= 0) and np.all(w <= 0.5 + 1e-12)
    assert np.count_nonzero(w) <= 3


def test_palm_replicating_asset_limit():
    rng = np.random.default_rng(8)
    R = rng.normal(0, 0.01, (100, 6))
    p = TrackingProblem(R, R[:, 2].copy(), 2)
    port = palm_svr(p, SvrParams(C1=1e6, eps=0.0, u=1.0, K=2))
    assert port.weights[2] > 0.999
    assert port.info["svr_objective"] == pytest.approx(0.5, abs=1e-3)
    w = port.weights
    assert port.info["svr_objective"] == pytest.approx(svr_objective(R, R[:, 2], w, 0.0, 1e6), rel=1e-2)


def test_palm_grid_picks_lowest_te():
    p = _svr_problem(K=4)
    port = palm_svr_grid(p.R, p.I, 4, C1_grid=(0.1, 50.0), eps_grid=(0.001, 0.05))
    check_portfolio(port, 4)
    assert port.info["grid_C1"] in (0.1, 50.0)
    te = []
    for C1 in (0.1, 50.0):
        for eps in (0.001, 0.05):
            w = palm_svr(p, SvrParams(C1=C1, eps=eps, K=4)).weights
            te.append(np.std(p.R @ w - p.I, ddof=1))
    assert port.info["in_sample_te"] == pytest.approx(min(te), rel=1e-12)


# -- forests ----------------------------------------------------------------------

def test_separating_feature_gives_perfect_training_accuracy():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(100, 4))
    y = (X[:, 2] > 0.1).astype(float)
    X[:, 2] += np.where(y == 1, 0.5, -0.5)  # a margin so every bootstrap threshold separates
    forest = fit_forest(X, y, "classification", n_trees=10, seed=0, min_leaf=1, m_features=4)
    assert np.mean(forest.predict(X) == y) == 1.0


def test_constant_target_constant_prediction():
    X = np.random.default_rng(10).normal(size=(40, 3))
    forest = fit_forest(X, np.full(40, 0.7), "regression", n_trees=5, seed=1)
    np.testing.assert_array_equal(forest.predict(X), 0.7)


@pytest.mark.parametrize("task", ["regression", "classification"])
def test_depth_one_tree_matches_exhaustive_split(task):
    rng = np.random.default_rng(11)
    for _ in range(10):
        X = np.round(rng.normal(size=(8, 3)), 2)
        y = rng.normal(size=8) if task == "regression" else rng.integers(0, 2, 8).astype(float)
        want = exact_split(X, y, 1, task)
        got = best_split(X, y, np.arange(3), 1, task)
        if want is None:
            assert got is None
            continue
        assert got[2] == pytest.approx(want[0], abs=1e-12)
        tree = grow_tree(X, y, task, 3, min_leaf=1, max_depth=1, rng=0)
        if tree.n_nodes > 1:
            f, t = tree.feature[0], tree.threshold[0]
            left = X[:, f] <= t
            score = sum((s.size * s.var()) if task == "regression" else 2 * s.size * s.mean() * (1 - s.mean())
                        for s in (y[left], y[~left]))
            assert score == pytest.approx(want[0], abs=1e-12)


def test_pure_leaf_reproduces_training_rows():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(30, 4))
    y = rng.normal(size=30)
    forest = fit_forest(X, y, "regression", n_trees=1, m_features=4, min_leaf=1, bootstrap=False)
    np.testing.assert_allclose(forest.predict(X), y, atol=1e-15)


def _importance_data(seed, duplicate=False, n=5, noise=0.1):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(150, n))
    if duplicate:
        X[:, 1] = X[:, 0]
    y = X[:, 0] + noise * rng.normal(size=150)
    return X, y


def test_unused_feature_scores_zero_and_sole_feature_wins():
    wins = 0
    for seed in range(20):
        X, y = _importance_data(seed)
        forest = fit_forest(X, y, "regression", n_trees=15, seed=seed)
        pim = pim_importance(forest, X, y, seed=seed)
        wins += int(np.argmax(pim)) == 0 and pim[0] > pim[1:].max()
        labels = (y > 0).astype(float)
        cf = fit_forest(X, labels, "classification", n_trees=15, seed=seed)
        mda = mda_importance(cf, X, labels, seed=seed)
        wins += int(np.argmax(mda)) == 0 and mda[0] > mda[1:].max()
    assert wins == 40
    # a column no tree ever splits on scores exactly 0
    X, y = _importance_data(0)
    X[:, 4] = 1.0
    forest = fit_forest(X, y, "regression", n_trees=10, seed=0)
    assert pim_importance(forest, X, y)[4] == 0.0


def test_duplicated_features_share_importance():
    sole, dup = [], []
    for seed in range(8):
        X, y = _importance_data(seed)
        lab = (y > 0).astype(float)
        sole.append(mda_importance(fit_forest(X, lab, "classification", 20, seed=seed), X, lab, seed)[0])
        X, y = _importance_data(seed, duplicate=True)
        lab = (y > 0).astype(float)
        dup.append(mda_importance(fit_forest(X, lab, "classification", 20, seed=seed), X, lab, seed)[:2])
    dup = np.mean(dup, axis=0)
    assert np.all(dup > 0) and np.all(dup < np.mean(sole))


def test_duplicated_features_share_pim_at_moderate_noise():
    # PIM divides by the base OOB error, so with almost no noise a duplicate can
    # inflate the percentage; at realistic noise the split shows up as for MDA
    sole, dup = [], []
    for seed in range(8):
        X, y = _importance_data(seed, n=10, noise=0.5)
        sole.append(pim_importance(fit_forest(X, y, "regression", 20, seed=seed), X, y, seed)[0])
        X, y = _importance_data(seed, True, n=10, noise=0.5)
        dup.append(pim_importance(fit_forest(X, y, "regression", 20, seed=seed), X, y, seed)[:2])
    dup = np.mean(dup, axis=0)
    assert np.all(dup > 0) and np.all(dup < np.mean(sole))


def test_forest_deterministic():
    X, y = _importance_data(3)
    a = fit_forest(X, y, "regression", n_trees=5, seed=4).predict(X)
    b = fit_forest(X, y, "regression", n_trees=5, seed=4).predict(X)
    np.testing.assert_array_equal(a, b)


# -- ridge weighting ------------------------------------------------------------------

def test_ridge_replication_small_lambda():
    rng = np.random.default_rng(13)
    R = rng.normal(0, 0.01, (200, 3))
    port = ridge_cv_weights(R, R[:, 1], alpha_range=(1e-12, 1e-12))
    np.testing.assert_allclose(port.weights, [0, 1, 0], atol=1e-6)


def test_ridge_extreme_lambda_flattens():
    rng = np.random.default_rng(14)
    R = rng.normal(0, 0.01, (300, 2)) * [1.0, 2.0]
    G = R.T @ R / 300
    coef = np.linalg.solve(G, np.ones(2))
    I = R @ coef  # equal covariances with both assets, unequal least-squares weights
    small = nonneg_ridge(R, I, 1e-12)
    assert abs(small[0] / small.sum() - 0.5) > 0.2
    port = ridge_cv_weights(R, I, alpha_range=(1e6, 1e6))
    np.testing.assert_allclose(port.weights, [0.5, 0.5], atol=1e-6)


def test_contiguous_folds():
    blocks = contiguous_folds(504, 5)
    assert [b.size for b in blocks] == [101, 101, 101, 101, 100]
    np.testing.assert_array_equal(np.concatenate(blocks), np.arange(504))


def test_ridge_path_continuity():
    rng = np.random.default_rng(15)
    R = rng.normal(0, 0.01, (504, 8))
    I = R @ rng.dirichlet(np.ones(8)) + rng.normal(0, 0.002, 504)
    W = []
    for lam in np.geomspace(1e-4, 1e-2, 11):
        b = nonneg_ridge(R, I, lam)
        W.append(b / b.sum())
    assert np.max(np.abs(np.diff(W, axis=0)).sum(axis=1)) < 0.2


def test_rf_trackers_feasible():
    rng = np.random.default_rng(16)
    R = rng.normal(0, 0.01, (120, 12))
    I = R[:, :3].mean(axis=1)
    for port in (rf_clust_track(R, I, 4, n_trees=10), rf_reg_track(R, I, 4, n_trees=10)):
        check_portfolio(port, 4)
        assert port.info["lambda"] in port.info["lambda_grid"]
