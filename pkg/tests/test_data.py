import pytest
from hypothesis import given
from hypothesis import strategies as st

from emexplain.data import (
    Dataset,
    DatasetLoadError,
    Record,
    RecordPair,
    load_benchmark_dataset,
    save_benchmark_dataset,
    tokenize,
    truncate_record,
)
from emexplain.synth import generate_benchmark


def test_tokenize_title():
    assert len(tokenize("belkin shield micra for ipod touch tint")) == 7


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokenize_number_single_token():
    assert tokenize(47.88) == ["47.88"]


def test_tokenize_null():
    assert tokenize(None) == []


def test_tokenize_integer_valued_float():
    assert tokenize(12.0) == ["12"]


@given(st.text())
def test_tokenize_strings_never_yield_empty_tokens(s):
    assert all(t for t in tokenize(s))
    assert tokenize(s) == s.split()


def test_record_rejects_duplicate_names():
    with pytest.raises(ValueError):
        Record((("x", "1"), ("x", "2")))


def test_record_json_roundtrip():
    r = Record((("title", "a b"), ("price", 3.5), ("note", None)))
    assert Record.from_json(r.to_json()) == r


def test_pair_json_roundtrip(product_pair):
    assert RecordPair.from_json(product_pair.to_json()) == product_pair


def test_synthetic_counts_match_benchmark_profiles():
    beer = generate_benchmark("beer")
    assert beer.candidate_count() == 450
    assert beer.match_count() == 68
    fz = generate_benchmark("fodors-zagats")
    assert fz.candidate_count() == 946
    assert fz.match_count() == 110


def test_dataset_roundtrip_through_csv(tmp_path):
    ds = generate_benchmark("beer")
    save_benchmark_dataset(ds, tmp_path)
    loaded = load_benchmark_dataset(tmp_path)
    assert loaded.table_a == ds.table_a
    assert loaded.table_b == ds.table_b
    assert loaded.splits == ds.splits


def test_load_missing_file_raises(tmp_path):
    save_benchmark_dataset(generate_benchmark("beer"), tmp_path)
    (tmp_path / "tableB.csv").unlink()
    with pytest.raises(DatasetLoadError, match="tableB.csv"):
        load_benchmark_dataset(tmp_path)


def test_pair_ids_are_stable():
    ds = generate_benchmark("beer")
    ids = [p.pair_id for p, _ in ds.pairs("test")]
    assert len(ids) == len(set(ids))
    assert all(i.startswith("test-") for i in ids)


def test_truncate_under_limit_unchanged():
    r = Record((("d", " ".join(["w"] * 10)),))
    assert truncate_record(r, 256) == r


def test_truncate_caps_total_words():
    r = Record((("d", " ".join(f"w{i}" for i in range(300))),))
    t = truncate_record(r, 256)
    assert len(t.attributes[0][1].split()) == 256


def test_truncate_greedy_in_order():
    r = Record((("a", " ".join(["x"] * 200)), ("b", " ".join(["y"] * 200))))
    t = truncate_record(r, 256)
    assert len(t.attributes[0][1].split()) == 200
    assert len(t.attributes[1][1].split()) == 56


@given(st.integers(min_value=1, max_value=500))
def test_truncate_never_exceeds_budget(max_words):
    r = Record((("a", " ".join(["x"] * 120)), ("b", " ".join(["y"] * 120)), ("n", 3.0)))
    t = truncate_record(r, max_words)
    total = sum(len(v.split()) for _, v in t.attributes if isinstance(v, str))
    assert total <= max_words


def test_empty_cell_is_null_and_roundtrips(tmp_path):
    ds = Dataset(
        (Record((("x", None), ("y", "hello"))),),
        (Record((("x", "a"), ("y", None))),),
        {"train": ((0, 0, 0),), "valid": ((0, 0, 1),), "test": ((0, 0, 0),)},
    )
    save_benchmark_dataset(ds, tmp_path)
    loaded = load_benchmark_dataset(tmp_path)
    assert loaded.table_a[0].value_of("x") is None
    assert loaded.table_b[0].value_of("y") is None
