"""Histogram-based gradient-boosted trees with a multiclass softmax
objective: one regression tree per class per round, fitted to the
log-loss gradient (softmax minus one-hot) with diagonal hessian p(1-p).

Trees grow leaf-wise (best-first) on flattened per-feature histograms;
each split's sibling histogram comes from parent-minus-child subtraction,
so a node costs one pass over the smaller child only. Gains, tie-breaking
(lowest feature index, then lowest bin), and the leaf value
-sum(g)/(sum(h)+lambda) * learning_rate follow the standard second-order
formulation. With <= max_bins distinct values per feature the binning is
lossless, making the histogram split identical to exact greedy search.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError, SchemaError
from .binning import BinnedMatrix, bin_matrix
from .params import LearnerParams

_PRIOR_FLOOR = 1e-12  # classes absent from training get ln(floor), not -inf
_LOSS_CLIP = 1e-15


def softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def log_loss(probabilities: np.ndarray, labels: np.ndarray) -> float:
    p = np.clip(probabilities[np.arange(len(labels)), labels], _LOSS_CLIP, None)
    return float(-np.log(p).mean())


def softmax_gradient_hessian(scores: np.ndarray,
                             labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row, per-class d/ds and d2/ds2 of multiclass log-loss."""
    p = softmax(scores)
    g = p.copy()
    g[np.arange(len(labels)), labels] -= 1.0
    h = p * (1.0 - p)
    return g, h


@dataclass(frozen=True)
class RegressionTree:
    feature: np.ndarray    # int32; -1 marks a leaf
    threshold: np.ndarray  # raw-value upper edge; x <= threshold goes left
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray      # leaf payout, already scaled by the learning rate

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def predict(self, X: np.ndarray) -> np.ndarray:
        nodes = np.zeros(len(X), dtype=np.int32)
        while True:
            feat = self.feature[nodes]
            active = np.nonzero(feat >= 0)[0]
            if active.size == 0:
                break
            at = nodes[active]
            go_left = X[active, feat[active]] <= self.threshold[at]
            nodes[active] = np.where(go_left, self.left[at], self.right[at])
        return self.value[nodes]


class _TreeBuilder:
    """Accumulates node arrays; leaf-wise growth driven by a max-heap."""

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def add_node(self, value: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.feature) - 1

    def freeze(self) -> RegressionTree:
        return RegressionTree(
            np.array(self.feature, dtype=np.int32),
            np.array(self.threshold),
            np.array(self.left, dtype=np.int32),
            np.array(self.right, dtype=np.int32),
            np.array(self.value))


def _segment_cumsum(flat: np.ndarray, binned: BinnedMatrix) -> np.ndarray:
    """Per-feature running sums over the flattened histogram layout."""
    total = np.cumsum(flat)
    base = np.concatenate([[0.0], total[binned.offsets[1:] - 1]])
    return total - np.repeat(base, binned.n_bins)


def _splittable_mask(binned: BinnedMatrix) -> np.ndarray:
    mask = np.ones(binned.total_bins, dtype=bool)
    mask[binned.offsets + binned.n_bins - 1] = False
    return mask


def _best_split(binned: BinnedMatrix, hists, totals, splittable, params):
    """Highest-gain (feature, bin) for one node, or None.

    Ties resolve to the lowest flattened position, i.e. lowest feature
    index then lowest bin. Gain may be zero but not negative: zero-gain
    splits are what let depth-2 structure (e.g. XOR) emerge from a
    symmetric root where no single split helps yet.
    """
    hist_g, hist_h, hist_c = hists
    total_g, total_h, total_c = totals
    lam = params.l2_regularization
    gl = _segment_cumsum(hist_g, binned)
    hl = _segment_cumsum(hist_h, binned)
    cl = _segment_cumsum(hist_c, binned)
    gr = total_g - gl
    hr = total_h - hl
    cr = total_c - cl
    parent = total_g * total_g / (total_h + lam)
    gains = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent)
    valid = splittable & (cl >= params.min_samples_leaf) & (cr >= params.min_samples_leaf)
    gains[~valid] = -np.inf
    k = int(np.argmax(gains))
    if not gains[k] >= 0.0:  # also rejects the all-invalid -inf case
        return None
    j = int(np.searchsorted(binned.offsets, k, side="right") - 1)
    t = k - int(binned.offsets[j])
    return gains[k], j, t, (float(gl[k]), float(hl[k]), float(cl[k]))


def _fit_tree(binned: BinnedMatrix, g: np.ndarray, h: np.ndarray,
              params: LearnerParams, splittable: np.ndarray) -> RegressionTree:
    lam = params.l2_regularization
    lr = params.learning_rate
    builder = _TreeBuilder()
    all_rows = np.arange(binned.n_rows)

    root_hists = (binned.histogram(all_rows, g), binned.histogram(all_rows, h),
                  binned.histogram(all_rows))
    root_totals = (float(g.sum()), float(h.sum()), float(binned.n_rows))
    root = builder.add_node(-root_totals[0] / (root_totals[1] + lam) * lr)

    heap: list[tuple] = []
    tick = 0  # FIFO tie-break for equal gains

    def consider(node: int, rows: np.ndarray, hists, totals):
        nonlocal tick
        found = _best_split(binned, hists, totals, splittable, params)
        if found is not None:
            gain, j, t, left_totals = found
            heapq.heappush(heap, (-gain, tick, node, rows, hists, totals,
                                  j, t, left_totals))
            tick += 1

    consider(root, all_rows, root_hists, root_totals)
    leaves = 1
    while heap and leaves < params.max_leaves:
        _, _, node, rows, hists, totals, j, t, left_totals = heapq.heappop(heap)
        go_left = binned.codes[rows, j] <= t
        rows_left = rows[go_left]
        rows_right = rows[~go_left]
        right_totals = tuple(p - l for p, l in zip(totals, left_totals))

        # build the smaller child's histograms, derive the sibling's by subtraction
        if len(rows_left) <= len(rows_right):
            small_rows, small_is_left = rows_left, True
        else:
            small_rows, small_is_left = rows_right, False
        small = (binned.histogram(small_rows, g), binned.histogram(small_rows, h),
                 binned.histogram(small_rows))
        other = tuple(p - s for p, s in zip(hists, small))
        left_hists, right_hists = (small, other) if small_is_left else (other, small)

        node_left = builder.add_node(-left_totals[0] / (left_totals[1] + lam) * lr)
        node_right = builder.add_node(-right_totals[0] / (right_totals[1] + lam) * lr)
        builder.feature[node] = j
        builder.threshold[node] = float(binned.edges[j][t])
        builder.left[node] = node_left
        builder.right[node] = node_right
        leaves += 1

        consider(node_left, rows_left, left_hists, left_totals)
        consider(node_right, rows_right, right_hists, right_totals)
    return builder.freeze()


@dataclass(frozen=True)
class GbdtModel:
    n_classes: int
    init_scores: np.ndarray
    trees: tuple[tuple[RegressionTree, ...], ...]  # [round][class]
    params: LearnerParams
    feature_names: tuple[str, ...] | None
    train_losses: tuple[float, ...]
    validation_losses: tuple[float, ...] | None
    diagnostics: tuple[str, ...]

    @property
    def n_rounds(self) -> int:
        return len(self.trees)


def _coerce_matrix(X, feature_names):
    """Accept a plain ndarray or anything exposing .values/.columns."""
    if hasattr(X, "values") and hasattr(X, "columns"):
        if feature_names is None:
            feature_names = tuple(X.columns)
        elif tuple(X.columns) != tuple(feature_names):
            raise SchemaError("feature columns do not match the model's feature list")
        X = X.values
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ParameterError(f"feature matrix must be 2-D, got shape {X.shape}")
    if X.size and not np.isfinite(X).all():
        raise ParameterError("feature matrix contains non-finite values")
    if feature_names is not None and X.shape[1] != len(feature_names):
        raise SchemaError(
            f"matrix has {X.shape[1]} columns, model expects {len(feature_names)}")
    return X, feature_names


def _class_setup(y, n_rows, n_classes):
    y = np.asarray(y)
    if y.shape != (n_rows,):
        raise ParameterError(f"labels must have shape ({n_rows},), got {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(y == np.floor(y)):
            raise ParameterError("labels must be integers")
        y = y.astype(np.int64)
    else:
        y = y.astype(np.int64)
    if n_rows == 0:
        raise ParameterError("cannot fit on an empty matrix")
    if y.min() < 0:
        raise ParameterError("labels must be >= 0")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    elif y.max() >= n_classes:
        raise ParameterError(f"label {int(y.max())} out of range for {n_classes} classes")
    return y, n_classes


def fit_gbdt(X, y, params: LearnerParams | None = None,
             validation: tuple | None = None,
             n_classes: int | None = None,
             feature_names: tuple[str, ...] | None = None) -> GbdtModel:
    """Boost softmax log-loss for params.n_rounds rounds (one tree per
    class per round), starting from per-class scores ln(prior).

    With a validation pair supplied, training stops once validation
    log-loss has not improved for `early_stopping_patience` rounds and
    the model keeps only the trees up to the best round. Single-class
    targets yield a prior-only model with a diagnostic.
    """
    if params is None:
        params = LearnerParams()
    X, feature_names = _coerce_matrix(X, feature_names)
    y, n_classes = _class_setup(y, X.shape[0], n_classes)

    priors = np.bincount(y, minlength=n_classes) / len(y)
    init_scores = np.log(np.clip(priors, _PRIOR_FLOOR, None))
    diagnostics: list[str] = []
    if len(np.unique(y)) < 2:
        diagnostics.append("single-class target: boosting skipped, prior-only model")
        return GbdtModel(n_classes, init_scores, (), params, feature_names,
                         (), None, tuple(diagnostics))

    if validation is not None:
        Xv, yv = validation
        Xv, _ = _coerce_matrix(Xv, feature_names)
        yv, _ = _class_setup(yv, Xv.shape[0], n_classes)
        val_scores = np.tile(init_scores, (len(yv), 1))
        val_losses: list[float] = []
        best_loss = np.inf
        best_round = -1
    else:
        val_losses = None

    binned = bin_matrix(X, params.max_bins)
    splittable = _splittable_mask(binned)
    scores = np.tile(init_scores, (len(y), 1))
    rounds: list[tuple[RegressionTree, ...]] = []
    train_losses: list[float] = []

    for round_no in range(params.n_rounds):
        g, h = softmax_gradient_hessian(scores, y)
        round_trees = []
        for c in range(n_classes):
            tree = _fit_tree(binned, g[:, c], h[:, c], params, splittable)
            round_trees.append(tree)
            scores[:, c] += tree.predict(X)
        rounds.append(tuple(round_trees))
        train_losses.append(log_loss(softmax(scores), y))

        if validation is not None:
            for c, tree in enumerate(round_trees):
                val_scores[:, c] += tree.predict(Xv)
            loss = log_loss(softmax(val_scores), yv)
            val_losses.append(loss)
            if loss < best_loss:
                best_loss = loss
                best_round = round_no
            elif round_no - best_round >= params.early_stopping_patience:
                diagnostics.append(
                    f"early stop after round {round_no}, best round {best_round}")
                rounds = rounds[:best_round + 1]
                train_losses = train_losses[:best_round + 1]
                val_losses = val_losses[:best_round + 1]
                break

    return GbdtModel(n_classes, init_scores, tuple(rounds), params,
                     feature_names, tuple(train_losses),
                     tuple(val_losses) if val_losses is not None else None,
                     tuple(diagnostics))


def decision_scores_gbdt(model: GbdtModel, X) -> np.ndarray:
    X, _ = _coerce_matrix(X, model.feature_names)
    scores = np.tile(model.init_scores, (len(X), 1))
    for round_trees in model.trees:
        for c, tree in enumerate(round_trees):
            scores[:, c] += tree.predict(X)
    return scores


def predict_proba_gbdt(model: GbdtModel, X) -> np.ndarray:
    """Softmax of accumulated scores; rows sum to 1."""
    return softmax(decision_scores_gbdt(model, X))
