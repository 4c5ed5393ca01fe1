"""Feature engineering: time decomposition, target binning, and the fitted
clip/standardize/encode pipeline that turns observation tables into dense
numeric matrices.

All statistics (quantile clip bounds, means, population stds, medians,
category maps) are fitted on a training table once and frozen; applying the
pipeline is pure and never produces non-finite values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import Mapping, Sequence

import numpy as np

from ..dataset import ObservationTable, time_of_day_category
from ..errors import (
    EmptyInputError,
    InsufficientDataError,
    ParameterError,
    UnknownFieldError,
)

N_CLASSES = 8

_EPOCH = datetime(1970, 1, 1)

# Raw numeric observation fields usable as features.
RAW_NUMERIC_FEATURES = ("time_zone", "latitude", "longitude", "elevation_m",
                        "sensor_reading", "population")
TIME_NUMERIC_FEATURES = ("year", "month", "day_of_year", "seconds_of_day",
                         "epoch_time")
CATEGORICAL_FEATURES = ("sensor_type", "clouds", "constellation",
                        "time_of_day_category")

DEFAULT_NUMERIC_FEATURES = RAW_NUMERIC_FEATURES + TIME_NUMERIC_FEATURES
DEFAULT_CATEGORICAL_FEATURES = CATEGORICAL_FEATURES

# Coordinates of the neighbor-query space, in order.
NEIGHBOR_SPACE = ("latitude", "longitude", "epoch_time", "time_zone")


@dataclass(frozen=True)
class TimeFeatures:
    year: int
    month: int
    day_of_year: int
    seconds_of_day: int
    category: str


def decompose_time(ts: datetime) -> TimeFeatures:
    """Split a local timestamp into calendar/clock features."""
    seconds = ts.hour * 3600 + ts.minute * 60 + ts.second
    return TimeFeatures(
        year=ts.year,
        month=ts.month,
        day_of_year=ts.timetuple().tm_yday,
        seconds_of_day=seconds,
        category=time_of_day_category(ts),
    )


def epoch_seconds(ts: datetime, tz_offset_hours: float | None) -> float:
    """Seconds since 1970-01-01 UTC; a missing offset is taken as UTC."""
    offset = tz_offset_hours if tz_offset_hours is not None else 0.0
    return (ts - _EPOCH).total_seconds() - offset * 3600.0


def bin_target(limiting_magnitude: float) -> int:
    """Round half up, then clamp to the class range [0, 7]."""
    if not math.isfinite(limiting_magnitude):
        raise ParameterError(f"target must be finite, got {limiting_magnitude!r}")
    cls = math.floor(limiting_magnitude + 0.5)
    return min(max(cls, 0), N_CLASSES - 1)


def target_classes(table: ObservationTable) -> np.ndarray:
    """Per-row class ids as float64; NaN where the target is missing."""
    out = np.full(len(table), np.nan)
    for i, rec in enumerate(table):
        if rec.limiting_magnitude is not None:
            out[i] = bin_target(rec.limiting_magnitude)
    return out


def derived_numeric_columns(table: ObservationTable) -> dict[str, np.ndarray]:
    """Raw numeric fields plus time-derived columns, NaN-coded."""
    cols = {name: table.numeric_column(name)
            for name in ("time_zone", "latitude", "longitude", "elevation_m",
                         "sensor_reading")}
    cols["population"] = table.numeric_column("population")
    n = len(table)
    time_cols = {name: np.full(n, np.nan) for name in TIME_NUMERIC_FEATURES}
    for i, rec in enumerate(table):
        if rec.time is None:
            continue
        tf = decompose_time(rec.time)
        time_cols["year"][i] = tf.year
        time_cols["month"][i] = tf.month
        time_cols["day_of_year"][i] = tf.day_of_year
        time_cols["seconds_of_day"][i] = tf.seconds_of_day
        time_cols["epoch_time"][i] = epoch_seconds(rec.time, rec.time_zone)
    cols.update(time_cols)
    return cols


def derived_categorical_columns(table: ObservationTable) -> dict[str, tuple]:
    """Categorical fields plus the derived day-part label, None-coded."""
    cols = {name: table.text_column(name)
            for name in ("sensor_type", "clouds", "constellation")}
    cols["time_of_day_category"] = tuple(
        time_of_day_category(rec.time) if rec.time is not None else None
        for rec in table)
    return cols


@dataclass(frozen=True)
class FeatureConfig:
    numeric_features: tuple[str, ...] = DEFAULT_NUMERIC_FEATURES
    categorical_features: tuple[str, ...] = DEFAULT_CATEGORICAL_FEATURES
    quantile_low: float = 0.01
    quantile_high: float = 0.99
    knn_k: int = 10
    indicator_threshold: float = 0.01

    def __post_init__(self):
        if not 0.0 <= self.quantile_low <= self.quantile_high <= 1.0:
            raise ParameterError(
                f"quantile levels must satisfy 0 <= low <= high <= 1, got "
                f"({self.quantile_low}, {self.quantile_high})")
        if self.knn_k < 1:
            raise ParameterError(f"knn_k must be >= 1, got {self.knn_k}")
        if not 0.0 <= self.indicator_threshold <= 1.0:
            raise ParameterError(
                f"indicator_threshold must be in [0, 1], got "
                f"{self.indicator_threshold}")
        for name in self.numeric_features:
            if name not in DEFAULT_NUMERIC_FEATURES:
                raise UnknownFieldError(f"unknown numeric feature: {name!r}")
        for name in self.categorical_features:
            if name not in DEFAULT_CATEGORICAL_FEATURES:
                raise UnknownFieldError(f"unknown categorical feature: {name!r}")


@dataclass(frozen=True)
class NumericStats:
    column: str
    clip_low: float
    clip_high: float
    mean: float
    std: float
    impute: float
    constant: bool
    missing_fraction: float


@dataclass(frozen=True)
class CategoryMap:
    column: str
    categories: tuple[str, ...]  # index i maps category -> code i + 1; 0 reserved
    missing_fraction: float

    def code(self, value: str | None) -> int:
        if value is None:
            return 0
        try:
            return self.categories.index(value) + 1
        except ValueError:
            return 0


@dataclass(frozen=True)
class FeaturePipelineModel:
    config: FeatureConfig
    numeric: tuple[NumericStats, ...]
    categorical: tuple[CategoryMap, ...]
    excluded: tuple[str, ...]
    indicator_columns: tuple[str, ...]
    diagnostics: tuple[str, ...] = field(default=())

    def numeric_stats(self, column: str) -> NumericStats | None:
        """Stats for a fitted column; None if it was excluded at fit time."""
        for stats in self.numeric:
            if stats.column == column:
                return stats
        if column in self.excluded:
            return None
        raise UnknownFieldError(f"column {column!r} was not fitted")

    @property
    def output_columns(self) -> tuple[str, ...]:
        names = [s.column for s in self.numeric]
        names.extend(c.column for c in self.categorical)
        names.extend(f"{c}_missing" for c in self.indicator_columns)
        return tuple(names)


@dataclass(frozen=True)
class FeatureMatrix:
    row_ids: tuple[str, ...]
    columns: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (len(self.row_ids), len(self.columns)):
            raise ParameterError(
                f"matrix shape {self.values.shape} does not match "
                f"{len(self.row_ids)} rows x {len(self.columns)} columns")
        if self.values.size and not np.isfinite(self.values).all():
            raise ParameterError("feature matrix contains non-finite values")

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.columns.index(name)
        except ValueError:
            raise UnknownFieldError(f"no such feature column: {name!r}") from None
        return self.values[:, j]

    def with_columns(self, names: Sequence[str], block: np.ndarray) -> "FeatureMatrix":
        """A new matrix with extra columns appended on the right."""
        if block.ndim == 1:
            block = block[:, None]
        return FeatureMatrix(self.row_ids, self.columns + tuple(names),
                             np.hstack([self.values, block]))


def fit_feature_pipeline(table: ObservationTable,
                         config: FeatureConfig | None = None) -> FeaturePipelineModel:
    """Fit clip bounds, post-clip moments, medians, and category maps.

    Clip bounds are linear-interpolation quantiles of the present values;
    mean, population std, and the median impute value are computed after
    clipping. Entirely-missing columns are excluded with a diagnostic.
    """
    if config is None:
        config = FeatureConfig()
    if len(table) == 0:
        raise EmptyInputError("cannot fit a feature pipeline on an empty table")

    numeric_cols = derived_numeric_columns(table)
    categorical_cols = derived_categorical_columns(table)
    n = len(table)

    fitted: list[NumericStats] = []
    excluded: list[str] = []
    diagnostics: list[str] = []
    indicator: list[str] = []

    for name in config.numeric_features:
        col = numeric_cols[name]
        present = col[~np.isnan(col)]
        missing_fraction = 1.0 - present.size / n
        if present.size == 0:
            excluded.append(name)
            diagnostics.append(f"column {name!r} excluded: all values missing")
            continue
        low = float(np.quantile(present, config.quantile_low))
        high = float(np.quantile(present, config.quantile_high))
        clipped = np.clip(present, low, high)
        mean = float(clipped.mean())
        std = float(clipped.std())
        impute = float(np.median(clipped))
        if std == 0.0:
            diagnostics.append(
                f"column {name!r} is constant after clipping; emitting zeros")
        fitted.append(NumericStats(name, low, high, mean, std, impute,
                                   constant=(std == 0.0),
                                   missing_fraction=missing_fraction))
        if missing_fraction > config.indicator_threshold:
            indicator.append(name)

    maps: list[CategoryMap] = []
    for name in config.categorical_features:
        col = categorical_cols[name]
        present = [v for v in col if v is not None]
        missing_fraction = 1.0 - len(present) / n
        if not present:
            excluded.append(name)
            diagnostics.append(f"column {name!r} excluded: all values missing")
            continue
        categories = tuple(sorted(set(present)))
        maps.append(CategoryMap(name, categories, missing_fraction))
        if missing_fraction > config.indicator_threshold:
            indicator.append(name)

    return FeaturePipelineModel(config, tuple(fitted), tuple(maps),
                                tuple(excluded), tuple(indicator),
                                tuple(diagnostics))


def apply_feature_pipeline(model: FeaturePipelineModel,
                           table: ObservationTable) -> FeatureMatrix:
    """Impute, clip, and z-score numerics; code categoricals; add indicators.

    Constant columns emit 0. Unseen and missing categories map to the
    reserved code 0. The output has one row per table row and is fully
    finite.
    """
    numeric_cols = derived_numeric_columns(table)
    categorical_cols = derived_categorical_columns(table)
    n = len(table)

    blocks: list[np.ndarray] = []
    for stats in model.numeric:
        col = numeric_cols[stats.column].copy()
        missing = np.isnan(col)
        col[missing] = stats.impute
        col = np.clip(col, stats.clip_low, stats.clip_high)
        if stats.constant:
            blocks.append(np.zeros(n))
        else:
            blocks.append((col - stats.mean) / stats.std)
    for cmap in model.categorical:
        col = categorical_cols[cmap.column]
        blocks.append(np.array([float(cmap.code(v)) for v in col]))
    for name in model.indicator_columns:
        if name in numeric_cols:
            missing = np.isnan(numeric_cols[name])
        else:
            missing = np.array([v is None for v in categorical_cols[name]])
        blocks.append(missing.astype(float))

    values = np.column_stack(blocks) if blocks else np.zeros((n, 0))
    return FeatureMatrix(table.ids, model.output_columns, values)


class NeighborIndex:
    """Exact nearest-neighbor index over the standardized 4-space
    (latitude, longitude, epoch_time, time_zone).

    Rows missing latitude, longitude, or time are left out of the index
    (and diagnosed) but keep their position in the alignment, so queries
    and features stay row-aligned with the source table. Search is a
    blocked brute-force scan; results match a pairwise-distance oracle
    exactly, with ties broken by smaller row index.
    """

    def __init__(self, points: np.ndarray, table_rows: np.ndarray, n_rows: int,
                 fold_labels: np.ndarray | None,
                 excluded_rows: tuple[int, ...]):
        self.points = points
        self.table_rows = table_rows
        self.n_rows = n_rows
        self.fold_labels = fold_labels
        self.excluded_rows = excluded_rows
        # position of each table row inside the index; -1 if absent
        pos = np.full(n_rows, -1, dtype=np.int64)
        pos[table_rows] = np.arange(len(table_rows))
        self._position = pos

    def __len__(self) -> int:
        return len(self.table_rows)

    def query(self, row: int, k: int, banned_rows: np.ndarray | None = None) -> np.ndarray:
        """Table-row indices of the k nearest eligible neighbors of `row`.

        The row itself is always excluded; `banned_rows` is an optional
        boolean mask over table rows. Absent rows return an empty result.
        """
        if k < 1:
            raise ParameterError(f"k must be >= 1, got {k}")
        pos = self._position[row]
        if pos < 0:
            return np.empty(0, dtype=np.int64)
        d2 = ((self.points - self.points[pos]) ** 2).sum(axis=1)
        eligible = np.ones(len(self.table_rows), dtype=bool)
        eligible[pos] = False
        if banned_rows is not None:
            eligible &= ~banned_rows[self.table_rows]
        d2 = np.where(eligible, d2, np.inf)
        order = np.argsort(d2, kind="stable")
        take = order[:k]
        take = take[np.isfinite(d2[take])]
        return self.table_rows[take]


def neighbor_points(table: ObservationTable,
                    model: FeaturePipelineModel) -> tuple[np.ndarray, np.ndarray]:
    """Standardized (lat, lon, epoch_time, tz) points for every row that
    has latitude, longitude, and time; returns (points, table_rows).

    A missing timezone offset contributes a raw 0 (UTC). Columns the
    pipeline excluded or flagged constant contribute a fixed coordinate.
    """
    numeric_cols = derived_numeric_columns(table)
    n = len(table)
    usable = np.ones(n, dtype=bool)
    for name in ("latitude", "longitude", "epoch_time"):
        usable &= ~np.isnan(numeric_cols[name])
    table_rows = np.nonzero(usable)[0]

    coords = []
    for name in NEIGHBOR_SPACE:
        col = numeric_cols[name][table_rows]
        if name == "time_zone":
            col = np.where(np.isnan(col), 0.0, col)
        stats = model.numeric_stats(name)
        if stats is None or stats.constant:
            coords.append(np.zeros(len(table_rows)))
        else:
            coords.append((col - stats.mean) / stats.std)
    return np.column_stack(coords), table_rows


def build_neighbor_index(table: ObservationTable, model: FeaturePipelineModel,
                         fold_labels: np.ndarray | None = None) -> NeighborIndex:
    """Index every usable row of `table` in the standardized 4-space."""
    n = len(table)
    if fold_labels is not None:
        fold_labels = np.asarray(fold_labels, dtype=np.int64)
        if fold_labels.shape != (n,):
            raise ParameterError(
                f"fold labels must have shape ({n},), got {fold_labels.shape}")
    points, table_rows = neighbor_points(table, model)
    if len(table_rows) < 2:
        raise InsufficientDataError(
            f"neighbor index needs at least 2 usable rows, found {len(table_rows)}")
    usable = np.zeros(n, dtype=bool)
    usable[table_rows] = True
    excluded = tuple(int(i) for i in np.nonzero(~usable)[0])
    return NeighborIndex(points, table_rows, n, fold_labels, excluded)
