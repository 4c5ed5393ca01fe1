"""Random forest classifier on the shared binned-feature substrate.

Each tree trains on a bootstrap resample (n draws with replacement) and
splits on the Gini criterion evaluated over floor(sqrt(n_features))
candidate features drawn fresh at every node. Nodes stop at purity, at
min_samples_leaf, or when no candidate split strictly improves the
criterion. Leaves store the full class distribution of their bootstrap
rows; prediction averages leaf distributions across trees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from .binning import BinnedMatrix, bin_matrix
from .gbdt import _class_setup, _coerce_matrix
from .params import LearnerParams


@dataclass(frozen=True)
class ClassificationTree:
    feature: np.ndarray      # int32; -1 marks a leaf
    threshold: np.ndarray    # raw-value upper edge; x <= threshold goes left
    left: np.ndarray
    right: np.ndarray
    distribution: np.ndarray  # (n_nodes, n_classes) leaf class shares

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        nodes = np.zeros(len(X), dtype=np.int32)
        while True:
            feat = self.feature[nodes]
            active = np.nonzero(feat >= 0)[0]
            if active.size == 0:
                break
            at = nodes[active]
            go_left = X[active, feat[active]] <= self.threshold[at]
            nodes[active] = np.where(go_left, self.left[at], self.right[at])
        return self.distribution[nodes]


def _gini_split(binned: BinnedMatrix, rows: np.ndarray, y: np.ndarray,
                counts: np.ndarray, feats: np.ndarray, min_leaf: int):
    """Best (feature, bin) over `feats` by the sum-of-squares Gini surrogate.

    Maximizes sum_c left_c^2/m_left + sum_c right_c^2/m_right, which is
    equivalent to minimizing the weighted Gini impurity of the children.
    Requires a strict improvement over the parent's sum_c c^2/m.
    """
    n_classes = len(counts)
    local_bins = binned.n_bins[feats]
    local_offsets = np.concatenate([[0], np.cumsum(local_bins)[:-1]])
    local_total = int(local_bins.sum())

    hist = np.zeros((n_classes, local_total))
    codes = binned.codes[rows][:, feats]
    y_rows = y[rows]
    flat = codes + local_offsets[None, :]
    for c in range(n_classes):
        if counts[c]:
            hist[c] = np.bincount(flat[y_rows == c].ravel(), minlength=local_total)

    running = np.cumsum(hist, axis=1)
    # per-position left counts per class, reset at each feature boundary
    base_rows = np.concatenate(
        [np.zeros((n_classes, 1)), running[:, local_offsets[1:] - 1]], axis=1)
    left = running - np.repeat(base_rows, local_bins, axis=1)
    right = counts[:, None] - left

    m = float(len(rows))
    m_left = left.sum(axis=0)
    m_right = m - m_left
    splittable = np.ones(local_total, dtype=bool)
    splittable[local_offsets + local_bins - 1] = False
    valid = splittable & (m_left >= min_leaf) & (m_right >= min_leaf)
    with np.errstate(divide="ignore", invalid="ignore"):
        score = ((left * left).sum(axis=0) / m_left
                 + (right * right).sum(axis=0) / m_right)
    score[~valid] = -np.inf
    k = int(np.argmax(score))
    parent = float((counts.astype(float) ** 2).sum()) / m
    if not score[k] > parent:
        return None
    local_j = int(np.searchsorted(local_offsets, k, side="right") - 1)
    return int(feats[local_j]), k - int(local_offsets[local_j])


def _grow_tree(binned: BinnedMatrix, rows: np.ndarray, y: np.ndarray,
               n_classes: int, n_candidates: int, min_leaf: int,
               rng: np.random.Generator) -> ClassificationTree:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    dist: list[np.ndarray] = []

    def new_node(counts: np.ndarray, m: int) -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        dist.append(counts / m)
        return len(feature) - 1

    root_counts = np.bincount(y[rows], minlength=n_classes)
    stack = [(new_node(root_counts, len(rows)), rows, root_counts)]
    while stack:
        node, node_rows, counts = stack.pop()
        m = len(node_rows)
        if m < 2 * min_leaf or (counts > 0).sum() < 2:
            continue
        feats = np.sort(rng.choice(binned.n_features, size=n_candidates,
                                   replace=False))
        found = _gini_split(binned, node_rows, y, counts, feats, min_leaf)
        if found is None:
            continue
        j, t = found
        go_left = binned.codes[node_rows, j] <= t
        rows_left = node_rows[go_left]
        rows_right = node_rows[~go_left]
        counts_left = np.bincount(y[rows_left], minlength=n_classes)
        node_left = new_node(counts_left, len(rows_left))
        node_right = new_node(counts - counts_left, len(rows_right))
        feature[node] = j
        threshold[node] = float(binned.edges[j][t])
        left[node] = node_left
        right[node] = node_right
        # push left last so it is grown first (preorder, deterministic)
        stack.append((node_right, rows_right, counts - counts_left))
        stack.append((node_left, rows_left, counts_left))

    return ClassificationTree(
        np.array(feature, dtype=np.int32), np.array(threshold),
        np.array(left, dtype=np.int32), np.array(right, dtype=np.int32),
        np.array(dist))


@dataclass(frozen=True)
class ForestModel:
    n_classes: int
    trees: tuple[ClassificationTree, ...]
    params: LearnerParams
    feature_names: tuple[str, ...] | None
    diagnostics: tuple[str, ...]


def fit_forest(X, y, params: LearnerParams | None = None,
               n_classes: int | None = None,
               feature_names: tuple[str, ...] | None = None) -> ForestModel:
    """Grow params.n_trees independent trees on bootstrap resamples."""
    if params is None:
        params = LearnerParams()
    X, feature_names = _coerce_matrix(X, feature_names)
    y, n_classes = _class_setup(y, X.shape[0], n_classes)
    binned = bin_matrix(X, params.max_bins)
    n = len(y)
    n_candidates = max(1, int(math.isqrt(binned.n_features))) if binned.n_features else 0
    if n_candidates == 0:
        raise ParameterError("cannot fit a forest with zero features")

    trees = []
    for seed in np.random.SeedSequence(params.seed).spawn(params.n_trees):
        rng = np.random.default_rng(seed)
        bootstrap = np.sort(rng.integers(0, n, size=n))
        trees.append(_grow_tree(binned, bootstrap, y, n_classes,
                                n_candidates, params.min_samples_leaf, rng))
    return ForestModel(n_classes, tuple(trees), params, feature_names, ())


def predict_proba_forest(model: ForestModel, X) -> np.ndarray:
    """Mean of per-tree leaf class distributions; rows sum to 1."""
    X, _ = _coerce_matrix(X, model.feature_names)
    total = np.zeros((len(X), model.n_classes))
    for tree in model.trees:
        total += tree.predict_proba(X)
    return total / len(model.trees)
