import numpy as np
import pytest

from skyglow.errors import ParseError
from skyglow.features.pipeline import (
    FeatureConfig,
    apply_feature_pipeline,
    fit_feature_pipeline,
    target_classes,
)
from skyglow.features.stack import StackSpec, apply_stack, fit_stack
from skyglow.learners.forest import fit_forest, predict_proba_forest
from skyglow.learners.gbdt import fit_gbdt, predict_proba_gbdt
from skyglow.learners.params import LearnerParams
from skyglow.serialize import (
    array_from_obj,
    array_to_obj,
    forest_to_obj,
    gbdt_to_obj,
    learner_from_obj,
    learner_to_obj,
    load_json,
    pipeline_from_obj,
    pipeline_to_obj,
    save_json,
    stack_from_obj,
    stack_to_obj,
    text_model_from_obj,
    text_model_to_obj,
)
from skyglow.textfeat import fit_text_features, transform_text_features

from helpers import grid_table


def fitted_stack():
    table = grid_table(60, seed=21)
    targets = target_classes(table)
    mask = np.ones(len(table), dtype=bool)
    folds = np.arange(len(table)) % 4
    stack, matrix = fit_stack(table, targets, mask, folds, FeatureConfig(),
                              StackSpec(svd_rank=3), seed=1)
    return table, stack, matrix


def disk_round_trip(tmp_path, payload):
    path = tmp_path / "sidecar.json"
    save_json(path, payload)
    return load_json(path)


def test_array_round_trip_preserves_dtype_shape_and_bits():
    arrays = [
        np.array([0.1 + 0.2, -1.5e-300, 3.7e300]),
        np.arange(6, dtype=np.int64).reshape(2, 3),
        np.zeros((0, 4)),
        np.array([], dtype=np.int64),
    ]
    for a in arrays:
        b = array_from_obj(array_to_obj(a))
        assert b.dtype == a.dtype and b.shape == a.shape
        assert np.array_equal(a, b)


def test_pipeline_round_trip_transforms_identically(tmp_path):
    table = grid_table(50, seed=22)
    model = fit_feature_pipeline(table, FeatureConfig(quantile_low=0.05,
                                                      quantile_high=0.95))
    again = pipeline_from_obj(disk_round_trip(tmp_path, pipeline_to_obj(model)))
    assert again == model
    first = apply_feature_pipeline(model, table)
    second = apply_feature_pipeline(again, table)
    assert first.columns == second.columns
    assert np.array_equal(first.values, second.values)


def test_text_model_round_trip(tmp_path):
    texts = ["dark sky many stars", "bright city glow", None,
             "faint milky way", "dark transparent sky", "city lights haze"]
    model = fit_text_features(texts, cap=16, rank=2, seed=5)
    again = text_model_from_obj(disk_round_trip(tmp_path,
                                                text_model_to_obj(model)))
    assert np.array_equal(transform_text_features(model, texts),
                          transform_text_features(again, texts))


def test_stack_round_trip_applies_identically(tmp_path):
    table, stack, matrix = fitted_stack()
    again = stack_from_obj(disk_round_trip(tmp_path, stack_to_obj(stack)))
    assert again.columns == stack.columns
    applied = apply_stack(again, table)
    fresh = apply_stack(stack, table)
    assert applied.columns == fresh.columns
    assert np.array_equal(applied.values, fresh.values)


def test_gbdt_round_trip_predicts_identically(tmp_path):
    _, stack, matrix = fitted_stack()
    y = np.arange(matrix.values.shape[0]) % 3
    params = LearnerParams(n_rounds=12, learning_rate=0.3, seed=2)
    model = fit_gbdt(matrix.values, y, params)
    again = learner_from_obj(disk_round_trip(tmp_path, learner_to_obj(model)))
    assert np.array_equal(predict_proba_gbdt(model, matrix.values),
                          predict_proba_gbdt(again, matrix.values))
    assert again.params == model.params
    assert again.train_losses == model.train_losses


def test_forest_round_trip_predicts_identically(tmp_path):
    _, stack, matrix = fitted_stack()
    y = np.arange(matrix.values.shape[0]) % 3
    params = LearnerParams(n_rounds=15, seed=4)
    model = fit_forest(matrix.values, y, params)
    again = learner_from_obj(disk_round_trip(tmp_path, forest_to_obj(model)))
    assert np.array_equal(predict_proba_forest(model, matrix.values),
                          predict_proba_forest(again, matrix.values))


def test_learner_kind_dispatch(tmp_path):
    X = np.array([[0.0], [1.0], [2.0], [3.0]] * 4)
    y = np.array([0, 0, 1, 1] * 4)
    gbdt = fit_gbdt(X, y, LearnerParams(n_rounds=3))
    forest = fit_forest(X, y, LearnerParams(n_rounds=3))
    assert gbdt_to_obj(gbdt)["kind"] == "gbdt"
    assert forest_to_obj(forest)["kind"] == "forest"
    assert type(learner_from_obj(learner_to_obj(gbdt))).__name__ == "GbdtModel"
    assert type(learner_from_obj(learner_to_obj(forest))).__name__ == "ForestModel"
    with pytest.raises(ParseError):
        learner_from_obj({"kind": "perceptron"})
    with pytest.raises(ParseError):
        learner_to_obj(object())


def test_save_json_rejects_nan(tmp_path):
    with pytest.raises(ValueError):
        save_json(tmp_path / "bad.json", {"x": float("nan")})


def test_load_json_rejects_garbage(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ParseError):
        load_json(path)


def test_identical_payloads_produce_identical_bytes(tmp_path):
    _, stack, _ = fitted_stack()
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_json(a, stack_to_obj(stack))
    save_json(b, stack_to_obj(stack))
    assert a.read_bytes() == b.read_bytes()
