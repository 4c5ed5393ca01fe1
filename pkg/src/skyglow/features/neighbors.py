"""Neighbor-mean features over an exact KNN index.

The mean of a value column over each row's k nearest neighbors, with the
row itself always excluded and, in out-of-fold mode, every row sharing its
fold label excluded as well. The out-of-fold variant is what makes
target-derived features safe to train on: a row's feature never reads any
target inside its own fold (the fallback mean is restricted the same way).

An optional neighbor mask further limits which rows may serve as
neighbors (cross-validation restricts the pool to training rows); masked
rows still receive features of their own.
"""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError
from .pipeline import NeighborIndex

_BLOCK = 256


def _fold_complement_means(values: np.ndarray, eligible: np.ndarray,
                           labels: np.ndarray) -> dict[int, float]:
    """For each fold label, the mean of eligible values outside that fold."""
    out: dict[int, float] = {}
    for label in np.unique(labels):
        pool = eligible & (labels != label)
        out[int(label)] = float(values[pool].mean()) if pool.any() else 0.0
    return out


def neighbor_mean_features(index: NeighborIndex, values: np.ndarray, k: int,
                           mode: str = "all",
                           neighbor_mask: np.ndarray | None = None,
                           ) -> tuple[np.ndarray, np.ndarray]:
    """Mean of `values` over each row's k nearest neighbors.

    Returns (means, counts), both aligned with the source table. The count
    is the number of non-missing neighbor values actually averaged; rows
    with no eligible neighbors, no usable coordinates, or only missing
    neighbor values get count 0 and the fallback mean — the global mean of
    eligible present values in mode "all", the row's fold-complement mean
    in mode "out_of_fold".
    """
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    if mode not in ("all", "out_of_fold"):
        raise ParameterError(f"mode must be 'all' or 'out_of_fold', got {mode!r}")
    if mode == "out_of_fold" and index.fold_labels is None:
        raise ParameterError("out_of_fold mode requires an index built with fold labels")
    values = np.asarray(values, dtype=float)
    if values.shape != (index.n_rows,):
        raise ParameterError(
            f"values must have shape ({index.n_rows},), got {values.shape}")
    if neighbor_mask is None:
        neighbor_mask = np.ones(index.n_rows, dtype=bool)
    else:
        neighbor_mask = np.asarray(neighbor_mask, dtype=bool)
        if neighbor_mask.shape != (index.n_rows,):
            raise ParameterError(
                f"neighbor mask must have shape ({index.n_rows},), got {neighbor_mask.shape}")

    eligible_values = ~np.isnan(values) & neighbor_mask
    global_mean = float(values[eligible_values].mean()) if eligible_values.any() else 0.0
    if mode == "out_of_fold":
        complement = _fold_complement_means(values, eligible_values, index.fold_labels)

        def fallback(row: int) -> float:
            return complement[int(index.fold_labels[row])]
    else:
        def fallback(row: int) -> float:
            return global_mean

    means = np.empty(index.n_rows)
    counts = np.zeros(index.n_rows, dtype=np.int64)
    for row in range(index.n_rows):
        means[row] = fallback(row)

    points = index.points
    m = len(points)
    idx_values = values[index.table_rows]
    idx_usable = eligible_values[index.table_rows]
    idx_member = neighbor_mask[index.table_rows]
    if mode == "out_of_fold":
        idx_labels = index.fold_labels[index.table_rows]

    for start in range(0, m, _BLOCK):
        stop = min(start + _BLOCK, m)
        block = np.arange(start, stop)
        # (B, m) squared distances; matches the per-pair oracle bit for bit
        d2 = ((points[block][:, None, :] - points[None, :, :]) ** 2).sum(axis=-1)
        d2[:, ~idx_member] = np.inf
        d2[np.arange(len(block)), block] = np.inf
        if mode == "out_of_fold":
            d2[idx_labels[block][:, None] == idx_labels[None, :]] = np.inf
        # stable sort: distance ties resolve to the smaller row index
        order = np.argsort(d2, axis=1, kind="stable")[:, :k]
        found = np.isfinite(np.take_along_axis(d2, order, axis=1))
        usable = found & idx_usable[order]
        n_used = usable.sum(axis=1)
        sums = np.where(usable, idx_values[order], 0.0).sum(axis=1)
        rows = index.table_rows[block]
        counts[rows] = n_used
        has = n_used > 0
        means[rows[has]] = sums[has] / n_used[has]
    return means, counts


def cross_neighbor_means(ref_points: np.ndarray, ref_values: np.ndarray,
                         query_points: np.ndarray, k: int,
                         fallback: float) -> tuple[np.ndarray, np.ndarray]:
    """Neighbor means for query points that are NOT members of the
    reference set (no self-exclusion): prediction-time features against a
    stored training reference.
    """
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    if ref_points.shape[1] != query_points.shape[1]:
        raise ParameterError("reference and query dimensionality differ")
    n = len(query_points)
    means = np.full(n, fallback)
    counts = np.zeros(n, dtype=np.int64)
    present = ~np.isnan(ref_values)
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        d2 = ((query_points[start:stop][:, None, :] - ref_points[None, :, :]) ** 2
              ).sum(axis=-1)
        order = np.argsort(d2, axis=1, kind="stable")[:, :k]
        usable = present[order]
        n_used = usable.sum(axis=1)
        sums = np.where(usable, ref_values[order], 0.0).sum(axis=1)
        has = n_used > 0
        block_means = np.full(stop - start, fallback)
        block_means[has] = sums[has] / n_used[has]
        means[start:stop] = block_means
        counts[start:stop] = n_used
    return means, counts
