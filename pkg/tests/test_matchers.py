import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emexplain.data import Record, RecordPair
from emexplain.matchers import (
    BaselineMatcher,
    BaselineMatcherModel,
    BatchingMatcher,
    ConfigurationError,
    MatcherConfig,
    _attribute_features,
    _levenshtein,
    f1_score,
    similarity_features,
    train_baseline_matcher,
)


def test_levenshtein_basics():
    assert _levenshtein("belkin", "belkin") == 0
    assert _levenshtein("f8z646ttc01", "f8z646ttc02") == 1
    assert _levenshtein("", "abc") == 3


def test_attribute_features_identity():
    jac, lev, diff, missing = _attribute_features("belkin", "belkin")
    assert jac == 1.0 and lev == 1.0 and missing == 0.0


def test_attribute_features_modelno():
    jac, lev, _, _ = _attribute_features("f8z646ttc01", "f8z646ttc02")
    assert jac == 0.0
    assert abs(lev - 10 / 11) < 1e-12


def test_attribute_features_both_null():
    jac, lev, diff, missing = _attribute_features(None, None)
    assert (jac, lev, missing) == (0.0, 0.0, 1.0)


@given(st.text(max_size=12), st.text(max_size=12))
@settings(max_examples=200)
def test_levenshtein_symmetric_and_bounded(s1, s2):
    d = _levenshtein(s1, s2)
    assert d == _levenshtein(s2, s1)
    assert abs(len(s1) - len(s2)) <= d <= max(len(s1), len(s2))


def test_similarity_feature_vector_shape(product_pair):
    feats = similarity_features(product_pair)
    # 4 shared attributes x 4 features + whole-record jaccard
    assert feats.shape == (17,)
    assert np.all(np.isfinite(feats))


def test_trained_matcher_scores_in_unit_interval(beer_matcher, beer_dataset):
    pairs = [p for p, _ in beer_dataset.pairs("test")][:20]
    scores = beer_matcher.predict_batch(pairs)
    assert len(scores) == 20
    assert all(0.0 <= s <= 1.0 for s in scores)


def test_identical_records_score_above_threshold(beer_matcher, beer_dataset):
    rec = beer_dataset.table_a[0]
    score = beer_matcher.predict_batch([RecordPair(rec, rec, "same")])[0]
    assert score > beer_matcher.threshold


def test_all_null_b_side_scores(beer_matcher, beer_dataset):
    rec = beer_dataset.table_a[0]
    nulls = Record(tuple((n, None) for n, _ in rec.attributes))
    score = beer_matcher.predict_batch([RecordPair(rec, nulls, "nulls")])[0]
    assert 0.0 <= score <= 1.0


def test_validation_f1_thresholds(beer_matcher, fz_matcher):
    assert beer_matcher.model.validation_f1 >= 0.6
    assert fz_matcher.model.validation_f1 >= 0.85


def test_single_class_training_rejected(beer_dataset):
    pairs = [p for p, label in beer_dataset.pairs("train") if label == 0][:10]
    with pytest.raises(ConfigurationError):
        BaselineMatcher().fit(pairs, [0] * len(pairs))


def test_empty_train_split_rejected(beer_dataset):
    from emexplain.data import Dataset

    empty = Dataset(beer_dataset.table_a, beer_dataset.table_b, {"train": (), "valid": (), "test": ()})
    with pytest.raises(ConfigurationError):
        train_baseline_matcher(empty)


def test_model_json_roundtrip(beer_matcher, tmp_path):
    path = tmp_path / "m.json"
    beer_matcher.model.save(path)
    loaded = BaselineMatcherModel.load(path)
    assert loaded.attribute_names == beer_matcher.model.attribute_names
    assert np.array_equal(loaded.weights, beer_matcher.model.weights)
    assert loaded.threshold == beer_matcher.model.threshold


def test_training_is_deterministic(beer_dataset, tmp_path):
    m1 = train_baseline_matcher(beer_dataset, seed=7)
    m2 = train_baseline_matcher(beer_dataset, seed=7)
    p1, p2 = tmp_path / "1.json", tmp_path / "2.json"
    m1.save(p1)
    m2.save(p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_matcher_config_validation():
    with pytest.raises(ConfigurationError):
        MatcherConfig(threshold=0.0)
    with pytest.raises(ConfigurationError):
        MatcherConfig(batch_size=0)


def test_batching_matcher_chunks(beer_matcher, beer_dataset):
    pairs = [p for p, _ in beer_dataset.pairs("test")][:10]
    wrapped = BatchingMatcher(beer_matcher, batch_size=3)
    wrapped.batch_size = 3
    scores = wrapped.predict_batch(pairs)
    assert scores == beer_matcher.predict_batch(pairs)
    assert wrapped.calls == math.ceil(10 / 3)


def test_f1_score_arithmetic():
    assert f1_score([1, 1, 0, 0], [1, 0, 1, 0]) == 0.5
    assert f1_score([0, 0], [1, 1]) == 0.0
    assert f1_score([1, 1], [1, 1]) == 1.0


def test_model_file_is_json(beer_matcher, tmp_path):
    path = tmp_path / "m.json"
    beer_matcher.model.save(path)
    obj = json.loads(path.read_text())
    assert obj["format"] == "emexplain-baseline-matcher/1"
