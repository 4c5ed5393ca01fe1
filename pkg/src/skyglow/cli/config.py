"""Run configuration: a flat `[section] key = value` file parsed into one
validated RunConfig, with documented defaults for everything except the
two input paths.

Unknown sections or keys are hard errors naming the offender; range
checks are delegated to the owning module's constructors so the CLI and
the library reject exactly the same values. Every command writes an echo
of the effective configuration into the output directory.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from ..errors import ConfigError, ParameterError
from ..features.pipeline import FeatureConfig
from ..features.stack import StackSpec
from ..learners.params import LearnerParams
from ..synth import SynthConfig
from ..textfeat import DEFAULT_SVD_RANK, DEFAULT_VOCAB_CAP
from ..validation import LearnerSpec

_KNOWN_KEYS = {
    "data": {"observations", "population", "strictness"},
    "output": {"directory"},
    "features": {"quantile_low", "quantile_high", "knn_k", "vocab_cap",
                 "svd_rank", "indicator_threshold"},
    "cv": {"k", "seed", "stratified"},
    "models": {"ids"},
    "ensemble": {"steps"},
    "report": {"trend_fields", "category_fields"},
    "synth": {"n_rows", "seed", "missing_sensor_reading", "missing_comment_1",
              "missing_comment_2", "missing_constellation", "missing_target",
              "share_type_gan", "share_clouds_clear",
              "share_constellation_orion", "share_evening"},
    "predict": {"observations"},
}
_MODEL_KEYS = {"kind", "rounds", "learning_rate", "max_leaves",
               "min_samples_leaf", "max_bins", "l2", "trees", "patience",
               "seed", "use_text", "use_neighbor"}

DEFAULT_TREND_FIELDS = ("limiting_magnitude", "sensor_reading", "elevation_m")
DEFAULT_CATEGORY_FIELDS = ("sensor_type", "clouds", "constellation",
                           "time_of_day_category")
CORRELATION_FIELDS = ("time_zone", "latitude", "longitude", "elevation_m",
                      "sensor_reading", "population", "year", "month",
                      "day_of_year", "seconds_of_day")


@dataclass(frozen=True)
class RunConfig:
    observations_path: Path
    population_path: Path
    output_dir: Path
    strictness: str
    feature_config: FeatureConfig
    vocab_cap: int
    svd_rank: int
    cv_k: int
    seed: int
    stratified: bool
    specs: tuple[LearnerSpec, ...]
    step_schedule: tuple[float, ...]
    synth: SynthConfig
    trend_fields: tuple[str, ...]
    category_fields: tuple[str, ...]
    predict_path: Path

    @property
    def model_ids(self) -> tuple[str, ...]:
        return tuple(spec.model_id for spec in self.specs)


def _get(parser, section, key, default, convert, errors: list[str]):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return convert(raw)
    except ValueError:
        errors.append(f"{section}.{key}")
        return default


def _boolean(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def _names(raw: str) -> tuple[str, ...]:
    parts = tuple(p.strip() for p in raw.split(",") if p.strip())
    if not parts:
        raise ValueError(raw)
    return parts


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(float(p) for p in _names(raw))


def _check_keys(parser: configparser.ConfigParser) -> None:
    for section in parser.sections():
        if section.startswith("model."):
            allowed = _MODEL_KEYS
        elif section in _KNOWN_KEYS:
            allowed = _KNOWN_KEYS[section]
        else:
            raise ConfigError(f"unknown section: {section!r}")
        for key in parser.options(section):
            if key not in allowed:
                raise ConfigError(f"unknown key: {section}.{key}")


def _learner_spec(parser, model_id: str, global_seed: int,
                  vocab_cap: int, svd_rank: int,
                  defaults: dict | None = None) -> LearnerSpec:
    section = f"model.{model_id}"
    bad: list[str] = []
    values = dict(defaults or {})

    def read(key, default, convert):
        if parser is not None and parser.has_option(section, key):
            return _get(parser, section, key, default, convert, bad)
        return values.get(key, default)

    kind = read("kind", "gbdt", str)
    params = LearnerParams(
        n_rounds=read("rounds", 300, int),
        learning_rate=read("learning_rate", 0.05, float),
        max_leaves=read("max_leaves", 31, int),
        min_samples_leaf=read("min_samples_leaf", 20, int),
        max_bins=read("max_bins", 256, int),
        l2_regularization=read("l2", 1.0, float),
        n_trees=read("trees", 300, int),
        early_stopping_patience=read("patience", 30, int),
        seed=read("seed", global_seed, int),
    )
    stack = StackSpec(
        use_text=read("use_text", True, _boolean),
        use_neighbor=read("use_neighbor", True, _boolean),
        vocab_cap=vocab_cap,
        svd_rank=svd_rank,
    )
    if bad:
        raise ConfigError(f"invalid value for: {', '.join(bad)}")
    return LearnerSpec(model_id, kind, params, stack)


_DEFAULT_ROSTER = (
    ("gbdt_full", {"kind": "gbdt"}),
    ("gbdt_plain", {"kind": "gbdt", "use_text": False, "use_neighbor": False}),
    ("forest", {"kind": "forest"}),
)


def load_config(path: str | Path, out_override: str | None = None,
                seed_override: int | None = None,
                require_inputs: bool = True) -> RunConfig:
    """Parse, default-fill, and validate a config file.

    `require_inputs=False` skips the input-path existence check (the
    synth command creates those files itself).
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    _check_keys(parser)

    for section, key in (("data", "observations"), ("data", "population")):
        if not parser.has_option(section, key):
            raise ConfigError(f"missing required key: {section}.{key}")
    bad: list[str] = []

    observations = Path(parser.get("data", "observations"))
    population = Path(parser.get("data", "population"))
    strictness = _get(parser, "data", "strictness", "lenient", str, bad)
    if strictness not in ("strict", "lenient"):
        raise ConfigError("invalid value for: data.strictness")

    output_dir = Path(out_override) if out_override else Path(
        _get(parser, "output", "directory", "skyglow_out", str, bad))

    seed = _get(parser, "cv", "seed", 0, int, bad)
    if seed_override is not None:
        seed = seed_override
    cv_k = _get(parser, "cv", "k", 5, int, bad)
    stratified = _get(parser, "cv", "stratified", True, _boolean, bad)

    vocab_cap = _get(parser, "features", "vocab_cap", DEFAULT_VOCAB_CAP, int, bad)
    svd_rank = _get(parser, "features", "svd_rank", DEFAULT_SVD_RANK, int, bad)
    feature_config = FeatureConfig(
        quantile_low=_get(parser, "features", "quantile_low", 0.01, float, bad),
        quantile_high=_get(parser, "features", "quantile_high", 0.99, float, bad),
        knn_k=_get(parser, "features", "knn_k", 10, int, bad),
        indicator_threshold=_get(parser, "features", "indicator_threshold",
                                 0.01, float, bad),
    )

    synth_seed = _get(parser, "synth", "seed", seed, int, bad)
    if seed_override is not None:
        synth_seed = seed_override
    synth = SynthConfig(
        n_rows=_get(parser, "synth", "n_rows", 2000, int, bad),
        seed=synth_seed,
        missing_sensor_reading=_get(parser, "synth", "missing_sensor_reading",
                                    0.828, float, bad),
        missing_comment_1=_get(parser, "synth", "missing_comment_1", 0.429, float, bad),
        missing_comment_2=_get(parser, "synth", "missing_comment_2", 0.480, float, bad),
        missing_constellation=_get(parser, "synth", "missing_constellation",
                                   0.121, float, bad),
        missing_target=_get(parser, "synth", "missing_target", 0.080, float, bad),
        share_type_gan=_get(parser, "synth", "share_type_gan", 0.801, float, bad),
        share_clouds_clear=_get(parser, "synth", "share_clouds_clear", 0.594, float, bad),
        share_constellation_orion=_get(parser, "synth", "share_constellation_orion",
                                       0.410, float, bad),
        share_evening=_get(parser, "synth", "share_evening", 0.827, float, bad),
    )

    if parser.has_option("models", "ids"):
        ids = _get(parser, "models", "ids", (), _names, bad)
        specs = tuple(_learner_spec(parser, model_id, seed, vocab_cap, svd_rank)
                      for model_id in ids)
    else:
        specs = tuple(
            _learner_spec(parser, mid, seed, vocab_cap, svd_rank, defaults)
            for mid, defaults in _DEFAULT_ROSTER)

    steps = _get(parser, "ensemble", "steps", (0.5, 0.25, 0.1, 0.05, 0.01),
                 _floats, bad)
    trend_fields = _get(parser, "report", "trend_fields", DEFAULT_TREND_FIELDS,
                        _names, bad)
    category_fields = _get(parser, "report", "category_fields",
                           DEFAULT_CATEGORY_FIELDS, _names, bad)
    predict_path = Path(_get(parser, "predict", "observations",
                             str(observations), str, bad))
    if bad:
        raise ConfigError(f"invalid value for: {', '.join(sorted(set(bad)))}")

    if cv_k < 2:
        raise ParameterError(f"k must be >= 2, got {cv_k}")
    for step in steps:
        if not 0.0 < step <= 1.0:
            raise ParameterError(f"step sizes must be in (0, 1], got {step}")
    if require_inputs:
        for label, p in (("data.observations", observations),
                         ("data.population", population)):
            if not p.exists():
                raise ConfigError(f"{label} does not exist: {p}")

    return RunConfig(
        observations_path=observations,
        population_path=population,
        output_dir=output_dir,
        strictness=strictness,
        feature_config=feature_config,
        vocab_cap=vocab_cap,
        svd_rank=svd_rank,
        cv_k=cv_k,
        seed=seed,
        stratified=stratified,
        specs=specs,
        step_schedule=tuple(steps),
        synth=synth,
        trend_fields=tuple(trend_fields),
        category_fields=tuple(category_fields),
        predict_path=predict_path,
    )


def render_config(config: RunConfig) -> str:
    """Deterministic echo of the effective configuration."""
    lines = [
        "[data]",
        f"observations = {config.observations_path}",
        f"population = {config.population_path}",
        f"strictness = {config.strictness}",
        "",
        "[output]",
        f"directory = {config.output_dir}",
        "",
        "[features]",
        f"quantile_low = {config.feature_config.quantile_low!r}",
        f"quantile_high = {config.feature_config.quantile_high!r}",
        f"knn_k = {config.feature_config.knn_k}",
        f"indicator_threshold = {config.feature_config.indicator_threshold!r}",
        f"vocab_cap = {config.vocab_cap}",
        f"svd_rank = {config.svd_rank}",
        "",
        "[cv]",
        f"k = {config.cv_k}",
        f"seed = {config.seed}",
        f"stratified = {str(config.stratified).lower()}",
        "",
        "[models]",
        f"ids = {', '.join(config.model_ids)}",
    ]
    for spec in config.specs:
        p = spec.params
        lines += [
            "",
            f"[model.{spec.model_id}]",
            f"kind = {spec.kind}",
            f"rounds = {p.n_rounds}",
            f"learning_rate = {p.learning_rate!r}",
            f"max_leaves = {p.max_leaves}",
            f"min_samples_leaf = {p.min_samples_leaf}",
            f"max_bins = {p.max_bins}",
            f"l2 = {p.l2_regularization!r}",
            f"trees = {p.n_trees}",
            f"patience = {p.early_stopping_patience}",
            f"seed = {p.seed}",
            f"use_text = {str(spec.stack.use_text).lower()}",
            f"use_neighbor = {str(spec.stack.use_neighbor).lower()}",
        ]
    lines += [
        "",
        "[ensemble]",
        "steps = " + ", ".join(repr(s) for s in config.step_schedule),
        "",
        "[synth]",
        f"n_rows = {config.synth.n_rows}",
        f"seed = {config.synth.seed}",
        f"missing_sensor_reading = {config.synth.missing_sensor_reading!r}",
        f"missing_comment_1 = {config.synth.missing_comment_1!r}",
        f"missing_comment_2 = {config.synth.missing_comment_2!r}",
        f"missing_constellation = {config.synth.missing_constellation!r}",
        f"missing_target = {config.synth.missing_target!r}",
        f"share_type_gan = {config.synth.share_type_gan!r}",
        f"share_clouds_clear = {config.synth.share_clouds_clear!r}",
        f"share_constellation_orion = {config.synth.share_constellation_orion!r}",
        f"share_evening = {config.synth.share_evening!r}",
        "",
        "[report]",
        f"trend_fields = {', '.join(config.trend_fields)}",
        f"category_fields = {', '.join(config.category_fields)}",
        "",
        "[predict]",
        f"observations = {config.predict_path}",
        "",
    ]
    return "\n".join(lines)
