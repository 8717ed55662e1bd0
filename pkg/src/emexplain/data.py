"""Records, record pairs, benchmark datasets, and tokenization."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Optional, Union

Value = Union[str, float, None]

MATCH = 1
NON_MATCH = 0


class DatasetLoadError(Exception):
    """A required dataset file is missing or unreadable."""


class DatasetValidationError(Exception):
    """The dataset files are present but internally inconsistent."""


def format_number(v: float) -> str:
    """Render a numeric value as a single token, round-tripping at full precision."""
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def tokenize(value: Value) -> list[str]:
    """Split an attribute value into tokens.

    Strings split on runs of whitespace (empty tokens dropped), numbers yield a
    single token, and null yields no tokens.
    """
    if value is None:
        return []
    if isinstance(value, str):
        return value.split()
    return [format_number(value)]


@lru_cache(maxsize=1 << 18)
def _cached_tokens(value: Value) -> tuple[str, ...]:
    return tuple(tokenize(value))


def tokens_of(value: Value) -> tuple[str, ...]:
    """tokenize() with memoization; safe because values are immutable."""
    return _cached_tokens(value)


@dataclass(frozen=True)
class Record:
    """An ordered set of attribute name/value pairs."""

    attributes: tuple[tuple[str, Value], ...]

    def __post_init__(self):
        names = [n for n, _ in self.attributes]
        if len(set(names)) != len(names):
            raise ValueError("attribute names must be unique within a record")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, Value]]) -> "Record":
        return cls(tuple(pairs))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.attributes)

    def value_of(self, name: str) -> Value:
        for n, v in self.attributes:
            if n == name:
                return v
        return None

    def has_attribute(self, name: str) -> bool:
        return any(n == name for n, _ in self.attributes)

    def to_json(self) -> dict:
        return {"attributes": [{"name": n, "value": v} for n, v in self.attributes]}

    @classmethod
    def from_json(cls, obj: dict) -> "Record":
        attrs = []
        for a in obj["attributes"]:
            v = a["value"]
            if isinstance(v, bool):
                raise ValueError("boolean attribute values are not supported")
            if isinstance(v, int):
                v = float(v)
            attrs.append((a["name"], v))
        return cls(tuple(attrs))


@dataclass(frozen=True)
class RecordPair:
    a: Record
    b: Record
    pair_id: str = ""

    def __post_init__(self):
        if not self.a.attributes or not self.b.attributes:
            raise ValueError("both records of a pair must have at least one attribute")

    def side(self, which: str) -> Record:
        return self.a if which == "a" else self.b

    def replace(self, which: str, record: Record) -> "RecordPair":
        if which == "a":
            return RecordPair(record, self.b, self.pair_id)
        return RecordPair(self.a, record, self.pair_id)

    def to_json(self) -> dict:
        return {"pair_id": self.pair_id, "a": self.a.to_json(), "b": self.b.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "RecordPair":
        return cls(
            Record.from_json(obj["a"]),
            Record.from_json(obj["b"]),
            obj.get("pair_id", ""),
        )


@dataclass(frozen=True)
class Dataset:
    """Two source tables plus labeled candidate splits referencing them by index."""

    table_a: tuple[Record, ...]
    table_b: tuple[Record, ...]
    splits: dict[str, tuple[tuple[int, int, int], ...]] = field(default_factory=dict)

    def pairs(self, split: str) -> list[tuple[RecordPair, int]]:
        out = []
        for ai, bi, label in self.splits[split]:
            pair = RecordPair(self.table_a[ai], self.table_b[bi], f"{split}-{ai}-{bi}")
            out.append((pair, label))
        return out

    def candidate_count(self) -> int:
        return sum(len(s) for s in self.splits.values())

    def match_count(self) -> int:
        return sum(label for s in self.splits.values() for _, _, label in s)


SPLIT_FILES = {"train": "train.csv", "valid": "valid.csv", "test": "test.csv"}


def _column_is_numeric(cells: list[str]) -> bool:
    seen = False
    for c in cells:
        if c == "":
            continue
        seen = True
        try:
            float(c)
        except ValueError:
            return False
    return seen


def _read_table(path: Path) -> tuple[dict[str, int], tuple[Record, ...]]:
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise DatasetValidationError(f"{path.name} is empty")
    header = rows[0]
    if "id" not in header:
        raise DatasetValidationError(f"{path.name} has no id column")
    id_col = header.index("id")
    body = rows[1:]
    numeric = []
    for j, name in enumerate(header):
        if j == id_col:
            numeric.append(False)
            continue
        numeric.append(_column_is_numeric([r[j] for r in body]))
    ids: dict[str, int] = {}
    records = []
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise DatasetValidationError(f"{path.name} row {i + 2} has {len(row)} cells, expected {len(header)}")
        attrs: list[tuple[str, Value]] = []
        for j, name in enumerate(header):
            if j == id_col:
                continue
            cell = row[j]
            if cell == "":
                attrs.append((name, None))
            elif numeric[j]:
                attrs.append((name, float(cell)))
            else:
                attrs.append((name, cell))
        rid = row[id_col]
        if rid in ids:
            raise DatasetValidationError(f"{path.name} has duplicate id {rid!r}")
        ids[rid] = i
        records.append(Record(tuple(attrs)))
    return ids, tuple(records)


def load_benchmark_dataset(directory: Union[str, Path]) -> Dataset:
    """Load a benchmark dataset directory (tableA.csv, tableB.csv, train/valid/test.csv)."""
    directory = Path(directory)
    for fname in ["tableA.csv", "tableB.csv", *SPLIT_FILES.values()]:
        if not (directory / fname).exists():
            raise DatasetLoadError(f"missing required file: {directory / fname}")
    ids_a, table_a = _read_table(directory / "tableA.csv")
    ids_b, table_b = _read_table(directory / "tableB.csv")
    splits: dict[str, tuple[tuple[int, int, int], ...]] = {}
    for split, fname in SPLIT_FILES.items():
        with open(directory / fname, newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames is None or not {"ltable_id", "rtable_id", "label"} <= set(reader.fieldnames):
                raise DatasetValidationError(f"{fname} must have columns ltable_id, rtable_id, label")
            entries = []
            dangling = []
            for i, row in enumerate(reader):
                lid, rid, label = row["ltable_id"], row["rtable_id"], row["label"]
                if label not in ("0", "1"):
                    raise DatasetValidationError(f"{fname} row {i + 2}: label must be 0 or 1, got {label!r}")
                if lid not in ids_a or rid not in ids_b:
                    dangling.append(f"{fname} row {i + 2}: ({lid}, {rid})")
                    continue
                entries.append((ids_a[lid], ids_b[rid], int(label)))
            if dangling:
                raise DatasetValidationError("dangling ids: " + "; ".join(dangling))
            splits[split] = tuple(entries)
    return Dataset(table_a, table_b, splits)


def _format_cell(v: Value) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return format_number(v)


def save_benchmark_dataset(dataset: Dataset, directory: Union[str, Path]) -> None:
    """Write a Dataset back to the benchmark CSV layout (inverse of load)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for fname, table in [("tableA.csv", dataset.table_a), ("tableB.csv", dataset.table_b)]:
        names = table[0].names if table else ()
        with open(directory / fname, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["id", *names])
            for i, rec in enumerate(table):
                w.writerow([str(i), *[_format_cell(v) for _, v in rec.attributes]])
    for split, fname in SPLIT_FILES.items():
        with open(directory / fname, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["ltable_id", "rtable_id", "label"])
            for ai, bi, label in dataset.splits.get(split, ()):
                w.writerow([str(ai), str(bi), str(label)])


def truncate_record(record: Record, max_words: int) -> Record:
    """Cap the total space-separated word count across string values, in attribute order."""
    if max_words < 1:
        raise ValueError("max_words must be >= 1")
    budget = max_words
    attrs: list[tuple[str, Value]] = []
    for name, value in record.attributes:
        if not isinstance(value, str):
            attrs.append((name, value))
            continue
        words = value.split()
        if len(words) <= budget:
            attrs.append((name, value))
            budget -= len(words)
        else:
            attrs.append((name, " ".join(words[:budget])))
            budget = 0
    return Record(tuple(attrs))


def records_to_json(obj: Union[Record, RecordPair]) -> str:
    return json.dumps(obj.to_json(), ensure_ascii=False)
