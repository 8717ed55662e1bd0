"""Interpretable representation of one record side and translation back to pairs.

Features are consecutive token spans at a chosen granularity. Perturbation
states per feature: P (present), A (absent), M (matched, i.e. tokens kept in
place and copied into the other record at a score-maximizing injection target).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import Record, RecordPair, Value, tokens_of

P, A, M = 0, 1, 2
STATE_NAMES = {P: "P", A: "A", M: "M"}

LOC_VALUE = "attribute_value"
LOC_NAME = "attribute_name"
LOC_RECORD = "record"

MAX_TARGETS_PER_ATTRIBUTE = 3
MAX_TARGETS_TOTAL = 10


@dataclass(frozen=True)
class InterpretableFeature:
    side: str  # "a" or "b"
    location: str  # attribute_value | attribute_name | record
    attribute_index: int
    token_start: int
    token_length: int
    granularity: int

    @property
    def token_span(self) -> tuple[int, int]:
        return (self.token_start, self.token_length)

    def to_json(self) -> dict:
        return {
            "side": self.side,
            "location": self.location,
            "attribute": self.attribute_index,
            "span": [self.token_start, self.token_length],
            "granularity": self.granularity,
        }


@dataclass(frozen=True)
class InterpretableSpace:
    pair: RecordPair
    explained_side: str  # "a", "b", or "ab" for a joint space
    features: tuple[InterpretableFeature, ...]

    @property
    def d_x(self) -> int:
        return len(self.features)

    def feature_tokens(self, feature: InterpretableFeature) -> tuple[str, ...]:
        record = self.pair.side(feature.side)
        if feature.location == LOC_RECORD:
            return ()
        if feature.location == LOC_NAME:
            name = record.attributes[feature.attribute_index][0]
            toks = tuple(name.split())
        else:
            toks = tokens_of(record.attributes[feature.attribute_index][1])
        return toks[feature.token_start : feature.token_start + feature.token_length]


def _side_features(record: Record, side: str, n: int, include_names: bool) -> list[InterpretableFeature]:
    feats: list[InterpretableFeature] = []
    for idx, (name, value) in enumerate(record.attributes):
        if include_names:
            name_tokens = name.split()
            for start in range(0, len(name_tokens), n):
                feats.append(
                    InterpretableFeature(side, LOC_NAME, idx, start, min(n, len(name_tokens) - start), n)
                )
        count = len(tokens_of(value))
        for start in range(0, count, n):
            feats.append(
                InterpretableFeature(side, LOC_VALUE, idx, start, min(n, count - start), n)
            )
    return feats


def build_space(pair: RecordPair, side: str, n: int, include_names: bool = False) -> InterpretableSpace:
    """Group the explained side's tokens into runs of n per attribute."""
    if n < 1:
        raise ValueError("granularity must be >= 1")
    if side == "ab":
        feats = _side_features(pair.a, "a", n, include_names) + _side_features(pair.b, "b", n, include_names)
    else:
        feats = _side_features(pair.side(side), side, n, include_names)
    if not feats:
        # degenerate: no tokens on the explained side
        feats = [InterpretableFeature(side if side != "ab" else "a", LOC_RECORD, -1, 0, 0, n)]
    return InterpretableSpace(pair, side, tuple(feats))


def max_tokens_N(record: Record) -> int:
    """Max token count over non-empty string values, or 1 when none exist."""
    best = 0
    for _, value in record.attributes:
        if isinstance(value, str):
            best = max(best, len(tokens_of(value)))
    return best if best > 0 else 1


@dataclass(frozen=True)
class InjectionTarget:
    attribute_index: int
    kind: str  # "gap" | "overwrite" | "name_end"
    position: int = 0

    def to_json(self) -> dict:
        return {"attribute": self.attribute_index, "kind": self.kind, "position": self.position}


@dataclass
class InjectionPlan:
    sample_count: int = 0
    chosen: dict[int, Optional[InjectionTarget]] = field(default_factory=dict)
    dropped: tuple[int, ...] = ()
    candidate_scores: tuple[float, ...] = ()

    def to_json(self) -> dict:
        return {
            "sample_count": self.sample_count,
            "chosen": {
                str(i): (t.to_json() if t is not None else None) for i, t in self.chosen.items()
            },
            "dropped": list(self.dropped),
            "candidate_scores": list(self.candidate_scores),
        }


def _feature_is_numeric(space: InterpretableSpace, feature: InterpretableFeature) -> bool:
    if feature.location != LOC_VALUE:
        return False
    record = space.pair.side(feature.side)
    return isinstance(record.attributes[feature.attribute_index][1], (int, float))


def count_injection_targets(space: InterpretableSpace, feature: InterpretableFeature, other: Record) -> int:
    """Raw injection target count, capped at 3 per attribute and 10 in total."""
    if feature.location == LOC_RECORD:
        return 0
    if feature.location == LOC_NAME:
        total = min(len(other.attributes), MAX_TARGETS_TOTAL)
        return total
    numeric = _feature_is_numeric(space, feature)
    total = 0
    for _, value in other.attributes:
        per_attr = 0
        if isinstance(value, str):
            per_attr += len(tokens_of(value)) + 1  # gaps, incl. both ends
        elif isinstance(value, (int, float)) and numeric:
            per_attr += 1  # same-type overwrite
        total += min(per_attr, MAX_TARGETS_PER_ATTRIBUTE)
    return min(total, MAX_TARGETS_TOTAL)


def _legal_target_attributes(space: InterpretableSpace, feature: InterpretableFeature, other: Record) -> list[int]:
    if feature.location == LOC_NAME:
        return list(range(len(other.attributes)))
    numeric = _feature_is_numeric(space, feature)
    legal = []
    for idx, (_, value) in enumerate(other.attributes):
        if isinstance(value, str):
            legal.append(idx)
        elif isinstance(value, (int, float)) and numeric:
            legal.append(idx)
    return legal


def sample_injection_target(
    space: InterpretableSpace,
    feature: InterpretableFeature,
    other: Record,
    schema_matched: bool,
    rng: np.random.Generator,
) -> Optional[InjectionTarget]:
    """Pick one injection target; same-named string attribute boosted to p=0.5 when schemas match."""
    if feature.location == LOC_RECORD:
        return None
    legal = _legal_target_attributes(space, feature, other)
    if not legal:
        return None
    explained = space.pair.side(feature.side)
    corresponding = None
    if schema_matched and feature.location == LOC_VALUE:
        name = explained.attributes[feature.attribute_index][0]
        for idx in legal:
            if other.attributes[idx][0] == name and isinstance(other.attributes[idx][1], str):
                corresponding = idx
                break
    if corresponding is not None:
        others = [i for i in legal if i != corresponding]
        if not others or rng.random() < 0.5:
            attr_idx = corresponding
        else:
            attr_idx = others[int(rng.integers(len(others)))]
    else:
        attr_idx = legal[int(rng.integers(len(legal)))]
    if feature.location == LOC_NAME:
        return InjectionTarget(attr_idx, "name_end")
    value = other.attributes[attr_idx][1]
    if isinstance(value, str):
        gaps = len(tokens_of(value)) + 1
        return InjectionTarget(attr_idx, "gap", int(rng.integers(gaps)))
    return InjectionTarget(attr_idx, "overwrite")


def schema_is_matched(pair: RecordPair) -> bool:
    return bool(set(pair.a.names) & set(pair.b.names))


def _apply_removals(record: Record, removals: dict[tuple[str, int], set[int]]) -> Record:
    """Remove token positions from attribute values/names; untouched attributes keep original values."""
    if not removals:
        return record
    attrs: list[tuple[str, Value]] = []
    for idx, (name, value) in enumerate(record.attributes):
        gone_value = removals.get((LOC_VALUE, idx))
        gone_name = removals.get((LOC_NAME, idx))
        if gone_name:
            name_tokens = [t for i, t in enumerate(name.split()) if i not in gone_name]
            name = " ".join(name_tokens)
        if gone_value:
            toks = tokens_of(value)
            kept = [t for i, t in enumerate(toks) if i not in gone_value]
            if isinstance(value, str):
                value = " ".join(kept)
            else:
                # non-string value: its absence is null
                value = value if kept else None
        attrs.append((name, value))
    return Record(tuple(attrs))


def _apply_injections(record: Record, injections: list[tuple[InjectionTarget, tuple[str, ...], Value]]) -> Record:
    """Insert token spans at gap positions / overwrite numerics / extend names."""
    if not injections:
        return record
    attrs: list[list] = [[name, value] for name, value in record.attributes]
    by_attr: dict[int, list[tuple[InjectionTarget, tuple[str, ...], Value]]] = {}
    for item in injections:
        by_attr.setdefault(item[0].attribute_index, []).append(item)
    for idx, items in by_attr.items():
        name, value = attrs[idx]
        # apply gap insertions back to front so original positions stay valid
        gap_items = sorted(
            (it for it in items if it[0].kind == "gap"),
            key=lambda it: it[0].position,
            reverse=True,
        )
        if gap_items:
            toks = list(tokens_of(value))
            for target, span, _ in gap_items:
                pos = min(target.position, len(toks))
                toks[pos:pos] = list(span)
            value = " ".join(toks)
        for target, span, raw in items:
            if target.kind == "overwrite":
                value = raw
            elif target.kind == "name_end":
                name = (name + " " + " ".join(span)).strip()
        attrs[idx] = [name, value]
    return Record(tuple((n, v) for n, v in attrs))


def realize_candidates(
    space: InterpretableSpace,
    states: np.ndarray,
    rng: np.random.Generator,
) -> tuple[list[RecordPair], list[dict[int, Optional[InjectionTarget]]], int, tuple[int, ...]]:
    """Build the candidate pairs for one perturbation vector.

    Returns (candidates, per-candidate chosen targets, L, indices of M-features
    with no legal target). With no M-features there is exactly one exact candidate.
    """
    if len(states) != space.d_x:
        raise ValueError("perturbation vector length must equal d_x")
    pair = space.pair
    schema_matched = schema_is_matched(pair)
    removals: dict[str, dict[tuple[str, int], set[int]]] = {"a": {}, "b": {}}
    m_features: list[int] = []
    for i, state in enumerate(states):
        if state == P:
            continue
        f = space.features[i]
        if f.location == LOC_RECORD:
            continue
        if state == M:
            # matched: tokens stay in place, a copy lands in the other record
            m_features.append(i)
            continue
        positions = set(range(f.token_start, f.token_start + f.token_length))
        removals[f.side].setdefault((f.location, f.attribute_index), set()).update(positions)

    base_a = _apply_removals(pair.a, removals["a"])
    base_b = _apply_removals(pair.b, removals["b"])

    if not m_features:
        return [RecordPair(base_a, base_b, pair.pair_id)], [{}], 0, ()

    counts = {
        i: count_injection_targets(space, space.features[i], pair.side(_other(space.features[i].side)))
        for i in m_features
    }
    L = max(1, max(counts.values()))
    candidates: list[RecordPair] = []
    plans: list[dict[int, Optional[InjectionTarget]]] = []
    dropped: set[int] = set()
    for _ in range(L):
        inject: dict[str, list[tuple[InjectionTarget, tuple[str, ...], Value]]] = {"a": [], "b": []}
        chosen: dict[int, Optional[InjectionTarget]] = {}
        for i in m_features:
            f = space.features[i]
            other_side = _other(f.side)
            target = sample_injection_target(space, f, pair.side(other_side), schema_matched, rng)
            chosen[i] = target
            if target is None:
                dropped.add(i)
                continue
            span = space.feature_tokens(f)
            raw: Value = None
            if target.kind == "overwrite":
                raw = pair.side(f.side).attributes[f.attribute_index][1]
            inject[other_side].append((target, span, raw))
        cand_a = _apply_injections(base_a, inject["a"])
        cand_b = _apply_injections(base_b, inject["b"])
        candidates.append(RecordPair(cand_a, cand_b, pair.pair_id))
        plans.append(chosen)
    return candidates, plans, L, tuple(sorted(dropped))


def _other(side: str) -> str:
    return "b" if side == "a" else "a"


def translate(
    space: InterpretableSpace,
    states: np.ndarray,
    matcher,
    rng: np.random.Generator,
) -> tuple[RecordPair, InjectionPlan]:
    """Translate a perturbation vector to a record pair.

    M-feature injection targets are chosen as the argmax over L sampled
    combinations scored in one matcher batch; with no M-features the matcher is
    not called and translation is exact.
    """
    candidates, plans, L, dropped = realize_candidates(space, states, rng)
    if len(candidates) == 1 and L == 0:
        return candidates[0], InjectionPlan(sample_count=0, dropped=dropped)
    scores = matcher.predict_batch(candidates)
    best = int(np.argmax(scores))
    plan = InjectionPlan(
        sample_count=L,
        chosen=plans[best],
        dropped=dropped,
        candidate_scores=tuple(float(s) for s in scores),
    )
    return candidates[best], plan
