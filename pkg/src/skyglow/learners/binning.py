"""Equal-frequency feature binning shared by both tree learners.

Columns with up to `max_bins` distinct values are binned losslessly (one
bin per distinct value), so split search on the histogram is identical to
exact greedy search. Wider columns get quantile-spaced edges. A value
equal to an edge falls in the lower bin, matching searchsorted's 'left'
side, and the stored raw thresholds reproduce the same partition at
predict time via `x <= threshold`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError


def compute_bin_edges(values: np.ndarray, max_bins: int) -> np.ndarray:
    """Strictly increasing upper edges; len(edges) + 1 bins, <= max_bins."""
    distinct = np.unique(values)
    if distinct.size <= max_bins:
        return distinct[:-1].astype(float)
    ranked = np.sort(values)
    n = ranked.size
    ranks = (np.arange(1, max_bins) * n) // max_bins
    edges = np.unique(ranked[ranks - 1])
    return edges[edges < distinct[-1]]


def bin_column(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    return np.searchsorted(edges, values, side="left").astype(np.int32)


@dataclass(frozen=True)
class BinnedMatrix:
    codes: np.ndarray                 # (n_rows, n_features) int32 bin ids
    edges: tuple[np.ndarray, ...]     # per feature, raw-value upper edges
    n_bins: np.ndarray                # per feature, len(edges) + 1
    offsets: np.ndarray               # feature start in the flattened histogram
    total_bins: int

    @property
    def n_rows(self) -> int:
        return self.codes.shape[0]

    @property
    def n_features(self) -> int:
        return self.codes.shape[1]

    def histogram(self, rows: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
        """Flattened per-feature histogram over `rows`.

        `weights` is aligned with the full matrix (one entry per stored
        row); only `weights[rows]` is accumulated. Entry offsets[j] + b
        collects the weight (or count) of rows whose feature-j code is b.
        One bincount covers every feature at once.
        """
        flat = (self.codes[rows] + self.offsets[None, :]).ravel()
        if weights is None:
            return np.bincount(flat, minlength=self.total_bins).astype(float)
        per_row = np.asarray(weights, dtype=float)[rows]
        return np.bincount(flat, weights=np.repeat(per_row, self.n_features),
                           minlength=self.total_bins)

    def feature_slice(self, j: int) -> slice:
        return slice(int(self.offsets[j]), int(self.offsets[j] + self.n_bins[j]))


def bin_matrix(X: np.ndarray, max_bins: int) -> BinnedMatrix:
    """Fit edges on X and encode it. Raises on non-finite input."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ParameterError(f"feature matrix must be 2-D, got shape {X.shape}")
    if X.size and not np.isfinite(X).all():
        raise ParameterError("feature matrix contains non-finite values")
    edges = tuple(compute_bin_edges(X[:, j], max_bins) for j in range(X.shape[1]))
    codes = np.empty(X.shape, dtype=np.int32)
    for j, e in enumerate(edges):
        codes[:, j] = bin_column(X[:, j], e)
    n_bins = np.array([len(e) + 1 for e in edges], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(n_bins)[:-1]])
    return BinnedMatrix(codes, edges, n_bins, offsets, int(n_bins.sum()))
