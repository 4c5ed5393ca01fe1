import numpy as np
import pytest

from skyglow.errors import ParameterError, SchemaError
from skyglow.learners import (
    LearnerParams,
    fit_forest,
    fit_gbdt,
    predict_proba_forest,
    predict_proba_gbdt,
)
from skyglow.learners.binning import BinnedMatrix, bin_matrix, compute_bin_edges
from skyglow.learners.gbdt import (
    log_loss,
    softmax,
    softmax_gradient_hessian,
)

from oracles import exact_greedy_gini, exact_greedy_split


# --- binning ---

def test_few_distinct_values_bin_losslessly():
    col = np.array([3.0, 1.0, 3.0, 2.0, 1.0])
    edges = compute_bin_edges(col, max_bins=256)
    assert edges.tolist() == [1.0, 2.0]  # upper edges below the max value
    binned = bin_matrix(col.reshape(-1, 1), 256)
    assert binned.codes[:, 0].tolist() == [2, 0, 2, 1, 0]


def test_value_equal_to_edge_goes_to_lower_bin():
    col = np.array([1.0, 2.0, 3.0])
    edges = compute_bin_edges(col, 256)
    binned = bin_matrix(col.reshape(-1, 1), 256)
    # 1.0 == edges[0] -> bin 0; 2.0 == edges[1] -> bin 1
    assert binned.codes[:, 0].tolist() == [0, 1, 2]
    assert edges.tolist() == [1.0, 2.0]


def test_wide_column_respects_max_bins():
    rng = np.random.default_rng(3)
    col = rng.normal(size=5000)
    binned = bin_matrix(col.reshape(-1, 1), 64)
    assert binned.n_bins[0] <= 64
    assert binned.codes.max() < binned.n_bins[0]


def test_bin_matrix_rejects_non_finite():
    with pytest.raises(ParameterError):
        bin_matrix(np.array([[1.0], [np.nan]]), 8)
    with pytest.raises(ParameterError):
        bin_matrix(np.array([1.0, 2.0]), 8)  # 1-D


def test_histogram_accumulates_subset_weights():
    X = np.array([[0.0, 5.0], [1.0, 5.0], [0.0, 6.0], [1.0, 6.0]])
    binned = bin_matrix(X, 8)
    w = np.array([1.0, 10.0, 100.0, 1000.0])
    rows = np.array([0, 2, 3])
    hist = binned.histogram(rows, w)
    left = binned.feature_slice(0)
    # feature 0: value 0 rows {0,2} weight 101; value 1 rows {3} weight 1000
    assert hist[left].tolist() == [101.0, 1000.0]
    counts = binned.histogram(rows)
    assert counts[left].tolist() == [2.0, 1.0]


# --- gbdt internals ---

def test_softmax_rows_sum_to_one_and_shift_invariant():
    scores = np.array([[1.0, 2.0, 3.0], [-5.0, 0.0, 5.0]])
    p = softmax(scores)
    assert np.allclose(p.sum(axis=1), 1.0)
    assert np.allclose(softmax(scores + 100.0), p)


def test_softmax_gradient_matches_finite_differences():
    rng = np.random.default_rng(17)
    scores = rng.normal(size=(6, 4))
    y = rng.integers(0, 4, size=6)
    g, h = softmax_gradient_hessian(scores, y)
    eps = 1e-6
    for i in range(6):
        for c in range(4):
            up = scores.copy(); up[i, c] += eps
            dn = scores.copy(); dn[i, c] -= eps
            num = (log_loss(softmax(up), y) * 6 - log_loss(softmax(dn), y) * 6) / (2 * eps)
            assert abs(g[i, c] - num) < 1e-6
    # hessian is p(1-p): positive and at most 1/4
    assert (h > 0).all() and (h <= 0.25 + 1e-12).all()


def test_gbdt_first_split_matches_exact_greedy():
    from skyglow.learners.gbdt import _best_split, _splittable_mask
    rng = np.random.default_rng(19)
    for _ in range(20):
        n = int(rng.integers(20, 80))
        X = rng.integers(0, 12, size=(n, 4)).astype(float)  # few distinct values
        g = rng.normal(size=n)
        h = rng.uniform(0.1, 1.0, size=n)
        params = LearnerParams(min_samples_leaf=3, l2_regularization=1.0)
        binned = bin_matrix(X, 256)
        rows = np.arange(n)
        hists = (binned.histogram(rows, g), binned.histogram(rows, h),
                 binned.histogram(rows))
        totals = (float(g.sum()), float(h.sum()), float(n))
        found = _best_split(binned, hists, totals, _splittable_mask(binned),
                            params)
        expect = exact_greedy_split(X, g, h, 1.0, 3)
        if expect is None:
            assert found is None
        else:
            assert found is not None
            gain, j, t_bin = found[0], found[1], found[2]
            assert abs(gain - expect[0]) < 1e-9
            assert j == expect[1]
            # the chosen bin must induce the same partition
            assert np.array_equal(binned.codes[:, j] <= t_bin,
                                  X[:, expect[1]] <= expect[2])


def test_gbdt_train_loss_nonincreasing():
    rng = np.random.default_rng(21)
    X = rng.normal(size=(150, 5))
    y = (X[:, 0] + 0.2 * rng.normal(size=150) > 0).astype(int)
    model = fit_gbdt(X, y, LearnerParams(n_rounds=25, learning_rate=0.1,
                                         min_samples_leaf=5))
    losses = model.train_losses
    assert len(losses) == 25
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


def test_gbdt_zero_rounds_predicts_priors():
    y = np.array([0, 0, 0, 1, 2, 2])
    X = np.random.default_rng(0).normal(size=(6, 3))
    model = fit_gbdt(X, y, LearnerParams(n_rounds=0))
    probs = predict_proba_gbdt(model, X)
    priors = np.array([3, 1, 2]) / 6
    assert np.allclose(probs, priors[None, :], atol=1e-12)


def test_gbdt_learns_xor():
    base = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    X = np.tile(base, (10, 1))
    y = np.tile(np.array([0, 1, 1, 0]), 10)
    model = fit_gbdt(X, y, LearnerParams(n_rounds=50, learning_rate=0.5,
                                         min_samples_leaf=1, max_leaves=4))
    pred = predict_proba_gbdt(model, X).argmax(axis=1)
    assert (pred == y).all()


def test_gbdt_single_class_prior_only():
    X = np.zeros((5, 2))
    y = np.ones(5, dtype=int)
    model = fit_gbdt(X, y, n_classes=3)
    assert model.trees == ()
    assert any("single-class" in d for d in model.diagnostics)
    probs = predict_proba_gbdt(model, X)
    assert probs[:, 1].min() > 0.99


def test_gbdt_early_stopping_truncates_to_best_round():
    rng = np.random.default_rng(23)
    X = rng.normal(size=(120, 4))
    y = (X[:, 0] > 0).astype(int)
    # validation labels are pure noise, so validation loss soon degrades
    Xv = rng.normal(size=(60, 4))
    yv = rng.integers(0, 2, size=60)
    model = fit_gbdt(X, y, LearnerParams(n_rounds=100, learning_rate=0.3,
                                         min_samples_leaf=5,
                                         early_stopping_patience=5),
                     validation=(Xv, yv))
    assert len(model.trees) < 100
    assert len(model.validation_losses) == len(model.trees)
    best = int(np.argmin(model.validation_losses))
    assert best == len(model.trees) - 1
    assert any("early stop" in d for d in model.diagnostics)


def test_gbdt_deterministic():
    rng = np.random.default_rng(27)
    X = rng.normal(size=(80, 6))
    y = rng.integers(0, 3, size=80)
    p = LearnerParams(n_rounds=8, learning_rate=0.2, min_samples_leaf=4)
    a = predict_proba_gbdt(fit_gbdt(X, y, p), X)
    b = predict_proba_gbdt(fit_gbdt(X, y, p), X)
    assert np.array_equal(a, b)


def test_gbdt_label_validation():
    X = np.zeros((4, 2))
    with pytest.raises(ParameterError):
        fit_gbdt(X, np.array([0, 1, 2, 3]), n_classes=3)  # label out of range
    with pytest.raises(ParameterError):
        fit_gbdt(X, np.array([0.5, 1, 1, 0]))  # non-integer labels
    with pytest.raises(ParameterError):
        fit_gbdt(X, np.array([0, 1]))  # length mismatch


def test_gbdt_feature_name_checking():
    class Named:
        def __init__(self, values, columns):
            self.values = values
            self.columns = columns

    X = np.random.default_rng(1).normal(size=(30, 2))
    y = (X[:, 0] > 0).astype(int)
    model = fit_gbdt(Named(X, ("a", "b")), y,
                     LearnerParams(n_rounds=2, min_samples_leaf=2))
    assert model.feature_names == ("a", "b")
    with pytest.raises(SchemaError):
        predict_proba_gbdt(model, Named(X, ("a", "c")))


def test_gbdt_min_samples_leaf_respected():
    rng = np.random.default_rng(29)
    X = rng.normal(size=(60, 3))
    y = rng.integers(0, 2, size=60)
    model = fit_gbdt(X, y, LearnerParams(n_rounds=3, min_samples_leaf=10))
    for round_trees in model.trees:
        for tree in round_trees:
            leaves = tree.feature < 0
            if leaves.sum() <= 1:
                continue
            # count training rows reaching each leaf
            reached = np.zeros(len(tree.value), dtype=int)
            for i in range(len(X)):
                node = 0
                while tree.feature[node] >= 0:
                    if X[i, tree.feature[node]] <= tree.threshold[node]:
                        node = tree.left[node]
                    else:
                        node = tree.right[node]
                reached[node] += 1
            assert reached[leaves].min() >= 10


# --- forest ---

def test_forest_probabilities_shape_and_sum():
    rng = np.random.default_rng(31)
    X = rng.normal(size=(90, 4))
    y = rng.integers(0, 3, size=90)
    model = fit_forest(X, y, LearnerParams(n_trees=12, min_samples_leaf=2))
    probs = predict_proba_forest(model, X)
    assert probs.shape == (90, 3)
    assert np.allclose(probs.sum(axis=1), 1.0)


def test_forest_learns_separable_data():
    rng = np.random.default_rng(33)
    X = np.vstack([rng.normal(-3, 0.5, size=(60, 2)),
                   rng.normal(3, 0.5, size=(60, 2))])
    y = np.array([0] * 60 + [1] * 60)
    model = fit_forest(X, y, LearnerParams(n_trees=20, min_samples_leaf=2))
    pred = predict_proba_forest(model, X).argmax(axis=1)
    assert (pred == y).mean() > 0.97


def test_forest_gini_split_matches_oracle():
    from skyglow.learners.forest import _gini_split
    rng = np.random.default_rng(37)
    for _ in range(20):
        n = int(rng.integers(15, 60))
        X = rng.integers(0, 8, size=(n, 3)).astype(float)
        y = rng.integers(0, 3, size=n)
        binned = bin_matrix(X, 256)
        rows = np.arange(n)
        counts = np.bincount(y, minlength=3)
        found = _gini_split(binned, rows, y, counts, np.arange(3), min_leaf=2)
        expect = exact_greedy_gini(X, y, 3, 2)
        if expect is None:
            assert found is None
        else:
            assert found is not None
            j, t_bin = found
            assert j == expect[1]
            assert np.array_equal(binned.codes[:, j] <= t_bin,
                                  X[:, expect[1]] <= expect[2])


def test_forest_deterministic_per_seed():
    rng = np.random.default_rng(41)
    X = rng.normal(size=(70, 5))
    y = rng.integers(0, 2, size=70)
    a = predict_proba_forest(fit_forest(X, y, LearnerParams(n_trees=8, seed=5)), X)
    b = predict_proba_forest(fit_forest(X, y, LearnerParams(n_trees=8, seed=5)), X)
    c = predict_proba_forest(fit_forest(X, y, LearnerParams(n_trees=8, seed=6)), X)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_forest_single_row_and_pure_nodes():
    model = fit_forest(np.array([[1.0, 2.0]]), np.array([1]), n_classes=3,
                       params=LearnerParams(n_trees=3))
    probs = predict_proba_forest(model, np.array([[9.0, 9.0]]))
    assert probs.tolist() == [[0.0, 1.0, 0.0]]


def test_params_validation():
    with pytest.raises(ParameterError):
        LearnerParams(n_rounds=-1)
    with pytest.raises(ParameterError):
        LearnerParams(learning_rate=0.0)
    with pytest.raises(ParameterError):
        LearnerParams(learning_rate=1.5)
    with pytest.raises(ParameterError):
        LearnerParams(max_bins=512)
    with pytest.raises(ParameterError):
        LearnerParams(l2_regularization=0.0)
    LearnerParams(n_rounds=0)  # prior-only model is legal
