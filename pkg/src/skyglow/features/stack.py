"""Assembly of the full per-model feature stack: pipeline output plus
text-SVD blocks plus the neighbor-mean target feature.

One stack is fitted per (text, neighbor) configuration on training rows
only; applying it to any table is pure. The neighbor-mean target feature
is computed out-of-fold during fitting (a row's feature never sees its
own fold's targets) and against the stored training reference at predict
time, the usual target-encoding asymmetry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset import ObservationTable
from ..errors import ParameterError
from ..textfeat import (
    DEFAULT_SVD_RANK,
    DEFAULT_VOCAB_CAP,
    TextFeatureModel,
    fit_text_features,
    transform_text_features,
)
from .neighbors import cross_neighbor_means, neighbor_mean_features
from .pipeline import (
    FeatureConfig,
    FeatureMatrix,
    FeaturePipelineModel,
    apply_feature_pipeline,
    build_neighbor_index,
    fit_feature_pipeline,
    neighbor_points,
)

TEXT_COLUMNS = ("comment_1", "comment_2")
NEIGHBOR_FEATURES = ("neighbor_target_mean", "neighbor_count")


@dataclass(frozen=True)
class StackSpec:
    """Which optional feature blocks a model's stack includes."""

    use_text: bool = True
    use_neighbor: bool = True
    vocab_cap: int = DEFAULT_VOCAB_CAP
    svd_rank: int = DEFAULT_SVD_RANK


@dataclass(frozen=True)
class NeighborReference:
    """Training-side data needed to reproduce neighbor features later."""

    points: np.ndarray   # (m, 4) standardized coordinates of training rows
    values: np.ndarray   # (m,) target classes of those rows
    k: int
    fallback: float      # mean target over the reference


@dataclass(frozen=True)
class StackModel:
    spec: StackSpec
    feature_config: FeatureConfig
    pipeline: FeaturePipelineModel
    text_models: tuple[tuple[str, TextFeatureModel], ...]
    neighbor: NeighborReference | None
    columns: tuple[str, ...]


def _text_column_names(column: str, rank: int) -> list[str]:
    return [f"{column}_svd_{i:02d}" for i in range(rank)]


def _text_seed(seed: int, column_position: int) -> int:
    state = np.random.SeedSequence([seed, column_position]).generate_state(1)
    return int(state[0])


def fit_stack(table: ObservationTable, targets: np.ndarray,
              train_mask: np.ndarray, fold_labels: np.ndarray,
              feature_config: FeatureConfig, spec: StackSpec,
              seed: int) -> tuple[StackModel, FeatureMatrix]:
    """Fit every block on the masked training rows; return the fitted
    stack and the feature matrix for ALL rows of `table`.

    Rows outside `train_mask` get fully valid features but contribute
    nothing to any fitted statistic and are never eligible as neighbors.
    """
    n = len(table)
    train_mask = np.asarray(train_mask, dtype=bool)
    if train_mask.shape != (n,):
        raise ParameterError(f"train mask must have shape ({n},)")
    if not train_mask.any():
        raise ParameterError("train mask selects no rows")
    train_table = ObservationTable(
        rec for i, rec in enumerate(table) if train_mask[i])

    pipeline = fit_feature_pipeline(train_table, feature_config)
    matrix = apply_feature_pipeline(pipeline, table)

    text_models: list[tuple[str, TextFeatureModel]] = []
    if spec.use_text:
        for pos, column in enumerate(TEXT_COLUMNS):
            model = fit_text_features(
                list(train_table.text_column(column)),
                cap=spec.vocab_cap, rank=spec.svd_rank,
                seed=_text_seed(seed, pos))
            text_models.append((column, model))
            if model.rank:
                block = transform_text_features(model, list(table.text_column(column)))
                matrix = matrix.with_columns(
                    _text_column_names(column, model.rank), block)

    neighbor_ref = None
    if spec.use_neighbor:
        index = build_neighbor_index(table, pipeline, fold_labels)
        means, counts = neighbor_mean_features(
            index, targets, feature_config.knn_k, mode="out_of_fold",
            neighbor_mask=train_mask)
        matrix = matrix.with_columns(
            NEIGHBOR_FEATURES, np.column_stack([means, counts.astype(float)]))
        in_reference = train_mask[index.table_rows] & ~np.isnan(
            targets[index.table_rows])
        ref_values = targets[index.table_rows[in_reference]]
        neighbor_ref = NeighborReference(
            points=index.points[in_reference],
            values=ref_values,
            k=feature_config.knn_k,
            fallback=float(ref_values.mean()) if len(ref_values) else 0.0)

    stack = StackModel(spec, feature_config, pipeline, tuple(text_models),
                       neighbor_ref, matrix.columns)
    return stack, matrix


def apply_stack(stack: StackModel, table: ObservationTable) -> FeatureMatrix:
    """Features for unseen rows: pipeline transform, text projection, and
    neighbor means against the stored training reference."""
    matrix = apply_feature_pipeline(stack.pipeline, table)
    for column, model in stack.text_models:
        if model.rank:
            block = transform_text_features(model, list(table.text_column(column)))
            matrix = matrix.with_columns(_text_column_names(column, model.rank), block)
    if stack.neighbor is not None:
        n = len(table)
        means = np.full(n, stack.neighbor.fallback)
        counts = np.zeros(n, dtype=np.int64)
        points, usable_rows = neighbor_points(table, stack.pipeline)
        if len(usable_rows):
            m, c = cross_neighbor_means(
                stack.neighbor.points, stack.neighbor.values, points,
                stack.neighbor.k, stack.neighbor.fallback)
            means[usable_rows] = m
            counts[usable_rows] = c
        matrix = matrix.with_columns(
            NEIGHBOR_FEATURES, np.column_stack([means, counts.astype(float)]))
    if matrix.columns != stack.columns:
        raise ParameterError("applied stack columns diverge from the fitted stack")
    return matrix
