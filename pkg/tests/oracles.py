"""Straight-line reference implementations the real code is checked against.

Everything here favors obviousness over speed: plain loops, dense algebra,
exhaustive search. If a test disagrees with the package, trust this file.
"""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np


def brute_knn(points: np.ndarray, query_row: int, k: int,
              banned: set[int] = frozenset()) -> list[int]:
    """O(n^2)-style scan for the k nearest rows to `query_row`, excluding
    itself and `banned`; ties broken by the smaller row index."""
    scored = []
    for j in range(len(points)):
        if j == query_row or j in banned:
            continue
        d2 = 0.0
        for a, b in zip(points[query_row], points[j]):
            d2 += (a - b) ** 2
        scored.append((d2, j))
    scored.sort()
    return [j for _, j in scored[:k]]


def neighbor_mean_oracle(points: np.ndarray, values: np.ndarray, k: int,
                         fold_labels: np.ndarray | None = None,
                         eligible: np.ndarray | None = None,
                         fallback: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Loop version of the out-of-fold neighbor-mean feature."""
    n = len(points)
    if eligible is None:
        eligible = np.ones(n, dtype=bool)
    means = np.zeros(n)
    counts = np.zeros(n)
    for i in range(n):
        banned = {j for j in range(n) if not eligible[j]}
        if fold_labels is not None:
            banned |= {j for j in range(n) if fold_labels[j] == fold_labels[i]}
        neigh = brute_knn(points, i, k, banned)
        vals = [values[j] for j in neigh if not math.isnan(values[j])]
        if vals:
            means[i] = sum(vals) / len(vals)
            counts[i] = len(vals)
        else:
            if fallback is not None:
                means[i] = fallback
            else:
                # fallback prior: mean of every value the row was allowed to
                # see (fold complement when folds are in play, else global --
                # the row's own value is part of the global prior)
                pool = [values[j] for j in range(n)
                        if j not in banned and not math.isnan(values[j])]
                means[i] = sum(pool) / len(pool) if pool else 0.0
            counts[i] = 0.0
    return means, counts


def dense_svd(matrix: np.ndarray, rank: int) -> tuple[np.ndarray, np.ndarray]:
    """Full LAPACK decomposition truncated to `rank`: (singular_values,
    components) with components rows = right singular vectors."""
    _, s, vt = np.linalg.svd(np.asarray(matrix, dtype=float), full_matrices=False)
    return s[:rank], vt[:rank]


def tfidf_oracle(documents: list[str], tokenize) -> tuple[list[str], np.ndarray]:
    """Dict-arithmetic TF-IDF: idf = ln((1+N)/(1+df)) + 1, raw counts,
    L2-normalized rows. Vocabulary = every token, sorted."""
    token_lists = [tokenize(doc) for doc in documents]
    df: dict[str, int] = {}
    for tokens in token_lists:
        for tok in set(tokens):
            df[tok] = df.get(tok, 0) + 1
    vocab = sorted(df)
    n_docs = len(documents)
    rows = np.zeros((n_docs, len(vocab)))
    for i, tokens in enumerate(token_lists):
        for tok in tokens:
            rows[i, vocab.index(tok)] += 1.0
        for j, tok in enumerate(vocab):
            idf = math.log((1 + n_docs) / (1 + df[tok])) + 1.0
            rows[i, j] *= idf
        norm = math.sqrt(float((rows[i] ** 2).sum()))
        if norm > 0:
            rows[i] /= norm
    return vocab, rows


def exact_greedy_split(X: np.ndarray, g: np.ndarray, h: np.ndarray,
                       l2: float, min_samples_leaf: int):
    """Best (gain, feature, threshold) over every feature and every
    distinct-value threshold, by direct enumeration. Gain must be
    non-negative; returns None when no split qualifies."""
    n, p = X.shape
    G, H = g.sum(), h.sum()
    parent = G * G / (H + l2)
    best = None
    for j in range(p):
        for thr in np.unique(X[:, j])[:-1]:
            left = X[:, j] <= thr
            nl = int(left.sum())
            if nl < min_samples_leaf or n - nl < min_samples_leaf:
                continue
            gl, hl = g[left].sum(), h[left].sum()
            gr, hr = G - gl, H - hl
            gain = 0.5 * (gl * gl / (hl + l2) + gr * gr / (hr + l2) - parent)
            if gain < 0.0:
                continue
            if best is None or gain > best[0] + 1e-12:
                best = (gain, j, float(thr))
    return best


def exact_greedy_gini(X: np.ndarray, y: np.ndarray, n_classes: int,
                      min_samples_leaf: int, features=None):
    """Best Gini-gain split by enumeration: maximize sum(cl^2)/nl +
    sum(cr^2)/nr, requiring strict improvement over the parent score."""
    n, p = X.shape
    if features is None:
        features = range(p)
    parent_counts = np.bincount(y, minlength=n_classes).astype(float)
    parent = float((parent_counts ** 2).sum()) / n
    best = None
    for j in features:
        for thr in np.unique(X[:, j])[:-1]:
            left = X[:, j] <= thr
            nl = int(left.sum())
            if nl < min_samples_leaf or n - nl < min_samples_leaf:
                continue
            cl = np.bincount(y[left], minlength=n_classes).astype(float)
            cr = parent_counts - cl
            score = float((cl ** 2).sum()) / nl + float((cr ** 2).sum()) / (n - nl)
            if score <= parent:
                continue
            if best is None or score > best[0] + 1e-12:
                best = (score, j, float(thr))
    return best


def accuracy_oracle(predicted, truth) -> float:
    hits = sum(1 for p, t in zip(predicted, truth) if p == t)
    return hits / len(truth)


def micro_prf_oracle(predicted, truth, n_classes: int):
    """Micro precision/recall/F1 from explicit per-class TP/FP/FN pools."""
    tp = fp = fn = 0
    for c in range(n_classes):
        tp += sum(1 for p, t in zip(predicted, truth) if p == c and t == c)
        fp += sum(1 for p, t in zip(predicted, truth) if p == c and t != c)
        fn += sum(1 for p, t in zip(predicted, truth) if p != c and t == c)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def pearson_oracle(x, y) -> float:
    pairs = [(a, b) for a, b in zip(x, y)
             if not (math.isnan(a) or math.isnan(b))]
    n = len(pairs)
    mx = sum(a for a, _ in pairs) / n
    my = sum(b for _, b in pairs) / n
    cov = sum((a - mx) * (b - my) for a, b in pairs) / n
    sx = math.sqrt(sum((a - mx) ** 2 for a, _ in pairs) / n)
    sy = math.sqrt(sum((b - my) ** 2 for _, b in pairs) / n)
    return cov / (sx * sy)


def simplex_grid(n_models: int, step: float = 0.01):
    """Every nonnegative weight vector on the step grid summing to 1."""
    ticks = round(1.0 / step)
    if n_models == 2:
        for a in range(ticks + 1):
            yield np.array([a, ticks - a], dtype=float) / ticks
        return
    if n_models == 3:
        for a in range(ticks + 1):
            for b in range(ticks + 1 - a):
                yield np.array([a, b, ticks - a - b], dtype=float) / ticks
        return
    raise NotImplementedError("grid oracle covers 2 or 3 models")


def grid_weight_search(matrices, truth, step: float = 0.01):
    """Exhaustive best micro-F1 over the weight grid."""
    best_f1, best_w = -1.0, None
    for w in simplex_grid(len(matrices), step):
        blended = sum(wi * m for wi, m in zip(w, matrices))
        pred = np.argmax(blended, axis=1)
        f1 = micro_prf_oracle(pred, truth, blended.shape[1])[2]
        if f1 > best_f1:
            best_f1, best_w = f1, w
    return best_f1, best_w
