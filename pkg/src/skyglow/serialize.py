"""Sidecar persistence: every fitted object round-trips through plain
JSON, bit-exactly.

Floats survive exactly because json emits Python's repr and float(repr(x))
is the identity; arrays carry dtype and shape explicitly so empty and
multi-dimensional blocks reload unambiguously. Files are written with
sorted keys and fixed indentation, so identical objects produce identical
bytes — the determinism the CLI artifacts are tested against.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import ParseError
from .features.pipeline import (
    CategoryMap,
    FeatureConfig,
    FeaturePipelineModel,
    NumericStats,
)
from .features.stack import NeighborReference, StackModel, StackSpec
from .learners.forest import ClassificationTree, ForestModel
from .learners.gbdt import GbdtModel, RegressionTree
from .learners.params import LearnerParams
from .textfeat import SvdModel, TextFeatureModel, TfidfModel


def save_json(path: str | Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True, allow_nan=False)
        fh.write("\n")


def load_json(path: str | Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid sidecar file {path}: {exc}") from None


def array_to_obj(a: np.ndarray) -> dict:
    return {"dtype": str(a.dtype), "shape": list(a.shape),
            "data": a.ravel().tolist()}


def array_from_obj(obj: dict) -> np.ndarray:
    return np.array(obj["data"], dtype=obj["dtype"]).reshape(obj["shape"])


# ---------------------------------------------------------------- pipeline

def pipeline_to_obj(model: FeaturePipelineModel) -> dict:
    return {
        "config": asdict(model.config),
        "numeric": [asdict(s) for s in model.numeric],
        "categorical": [{"column": c.column, "categories": list(c.categories),
                         "missing_fraction": c.missing_fraction}
                        for c in model.categorical],
        "excluded": list(model.excluded),
        "indicator_columns": list(model.indicator_columns),
        "diagnostics": list(model.diagnostics),
    }


def pipeline_from_obj(obj: dict) -> FeaturePipelineModel:
    config = dict(obj["config"])
    for key in ("numeric_features", "categorical_features"):
        config[key] = tuple(config[key])
    return FeaturePipelineModel(
        config=FeatureConfig(**config),
        numeric=tuple(NumericStats(**s) for s in obj["numeric"]),
        categorical=tuple(
            CategoryMap(c["column"], tuple(c["categories"]), c["missing_fraction"])
            for c in obj["categorical"]),
        excluded=tuple(obj["excluded"]),
        indicator_columns=tuple(obj["indicator_columns"]),
        diagnostics=tuple(obj["diagnostics"]),
    )


# -------------------------------------------------------------------- text

def tfidf_to_obj(model: TfidfModel) -> dict:
    return {"vocabulary": list(model.vocabulary),
            "idf": array_to_obj(model.idf),
            "document_count": model.document_count,
            "cap": model.cap,
            "degenerate": model.degenerate}


def tfidf_from_obj(obj: dict) -> TfidfModel:
    return TfidfModel(tuple(obj["vocabulary"]), array_from_obj(obj["idf"]),
                      obj["document_count"], obj["cap"], obj["degenerate"])


def svd_to_obj(model: SvdModel) -> dict:
    return {"rank": model.rank,
            "components": array_to_obj(model.components),
            "singular_values": array_to_obj(model.singular_values),
            "seed": model.seed}


def svd_from_obj(obj: dict) -> SvdModel:
    return SvdModel(obj["rank"], array_from_obj(obj["components"]),
                    array_from_obj(obj["singular_values"]), obj["seed"])


def text_model_to_obj(model: TextFeatureModel) -> dict:
    return {"tfidf": tfidf_to_obj(model.tfidf),
            "svd": svd_to_obj(model.svd) if model.svd is not None else None}


def text_model_from_obj(obj: dict) -> TextFeatureModel:
    svd = svd_from_obj(obj["svd"]) if obj["svd"] is not None else None
    return TextFeatureModel(tfidf_from_obj(obj["tfidf"]), svd)


# ------------------------------------------------------------------- stack

def stack_to_obj(model: StackModel) -> dict:
    neighbor = None
    if model.neighbor is not None:
        neighbor = {"points": array_to_obj(model.neighbor.points),
                    "values": array_to_obj(model.neighbor.values),
                    "k": model.neighbor.k,
                    "fallback": model.neighbor.fallback}
    return {
        "spec": asdict(model.spec),
        "feature_config": asdict(model.feature_config),
        "pipeline": pipeline_to_obj(model.pipeline),
        "text_models": [[column, text_model_to_obj(tm)]
                        for column, tm in model.text_models],
        "neighbor": neighbor,
        "columns": list(model.columns),
    }


def stack_from_obj(obj: dict) -> StackModel:
    neighbor = None
    if obj["neighbor"] is not None:
        neighbor = NeighborReference(
            array_from_obj(obj["neighbor"]["points"]),
            array_from_obj(obj["neighbor"]["values"]),
            obj["neighbor"]["k"], obj["neighbor"]["fallback"])
    config = dict(obj["feature_config"])
    for key in ("numeric_features", "categorical_features"):
        config[key] = tuple(config[key])
    return StackModel(
        spec=StackSpec(**obj["spec"]),
        feature_config=FeatureConfig(**config),
        pipeline=pipeline_from_obj(obj["pipeline"]),
        text_models=tuple((column, text_model_from_obj(tm))
                          for column, tm in obj["text_models"]),
        neighbor=neighbor,
        columns=tuple(obj["columns"]),
    )


# ---------------------------------------------------------------- learners

def _regression_tree_to_obj(tree: RegressionTree) -> dict:
    return {name: array_to_obj(getattr(tree, name))
            for name in ("feature", "threshold", "left", "right", "value")}


def _regression_tree_from_obj(obj: dict) -> RegressionTree:
    return RegressionTree(**{name: array_from_obj(obj[name]) for name in obj})


def gbdt_to_obj(model: GbdtModel) -> dict:
    return {
        "kind": "gbdt",
        "n_classes": model.n_classes,
        "init_scores": array_to_obj(model.init_scores),
        "trees": [[_regression_tree_to_obj(t) for t in round_trees]
                  for round_trees in model.trees],
        "params": asdict(model.params),
        "feature_names": list(model.feature_names) if model.feature_names else None,
        "train_losses": list(model.train_losses),
        "validation_losses": (list(model.validation_losses)
                              if model.validation_losses is not None else None),
        "diagnostics": list(model.diagnostics),
    }


def gbdt_from_obj(obj: dict) -> GbdtModel:
    return GbdtModel(
        n_classes=obj["n_classes"],
        init_scores=array_from_obj(obj["init_scores"]),
        trees=tuple(tuple(_regression_tree_from_obj(t) for t in round_trees)
                    for round_trees in obj["trees"]),
        params=LearnerParams(**obj["params"]),
        feature_names=(tuple(obj["feature_names"])
                       if obj["feature_names"] is not None else None),
        train_losses=tuple(obj["train_losses"]),
        validation_losses=(tuple(obj["validation_losses"])
                           if obj["validation_losses"] is not None else None),
        diagnostics=tuple(obj["diagnostics"]),
    )


def _classification_tree_to_obj(tree: ClassificationTree) -> dict:
    return {name: array_to_obj(getattr(tree, name))
            for name in ("feature", "threshold", "left", "right", "distribution")}


def forest_to_obj(model: ForestModel) -> dict:
    return {
        "kind": "forest",
        "n_classes": model.n_classes,
        "trees": [_classification_tree_to_obj(t) for t in model.trees],
        "params": asdict(model.params),
        "feature_names": list(model.feature_names) if model.feature_names else None,
        "diagnostics": list(model.diagnostics),
    }


def forest_from_obj(obj: dict) -> ForestModel:
    return ForestModel(
        n_classes=obj["n_classes"],
        trees=tuple(ClassificationTree(
            **{name: array_from_obj(t[name]) for name in t}) for t in obj["trees"]),
        params=LearnerParams(**obj["params"]),
        feature_names=(tuple(obj["feature_names"])
                       if obj["feature_names"] is not None else None),
        diagnostics=tuple(obj["diagnostics"]),
    )


def learner_to_obj(model) -> dict:
    if isinstance(model, GbdtModel):
        return gbdt_to_obj(model)
    if isinstance(model, ForestModel):
        return forest_to_obj(model)
    raise ParseError(f"not a serializable learner: {type(model).__name__}")


def learner_from_obj(obj: dict):
    kind = obj.get("kind")
    if kind == "gbdt":
        return gbdt_from_obj(obj)
    if kind == "forest":
        return forest_from_obj(obj)
    raise ParseError(f"unknown learner kind in sidecar: {kind!r}")
