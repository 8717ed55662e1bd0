"""Quantitative harness: counterfactual metrics, perturbation error, stability, sweeps."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .data import RecordPair
from .explain import (
    DualExplanation,
    Explanation,
    ExplainerConfig,
    actual_cfs,
    explain,
    rng_for,
)
from .interpretable import A, M, LOC_VALUE, translate
from .surrogate import MODE_LEMON


@dataclass
class CounterfactualMetrics:
    cr: Optional[float]
    cp: Optional[float]
    cf1: Optional[float]
    recalled: int
    successful: int
    total: int
    skipped: int = 0

    def to_json(self) -> dict:
        return {
            "CR": self.cr,
            "CP": self.cp,
            "CF1": self.cf1,
            "recalled": self.recalled,
            "successful": self.successful,
            "total": self.total,
            "skipped": self.skipped,
        }


@dataclass
class PerturbationErrorReport:
    mae: float
    pe: float
    experiments: int
    skipped: int
    records: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "MAE": self.mae,
            "PE": self.pe,
            "experiments": self.experiments,
            "skipped": self.skipped,
        }


@dataclass
class StabilityReport:
    mean_similarity: float
    per_pair: list[tuple[str, float]]

    def to_json(self) -> dict:
        return {
            "mean_similarity": self.mean_similarity,
            "per_pair": [{"pair_id": p, "similarity": s} for p, s in self.per_pair],
        }


def greedy_pick(dual: DualExplanation, epsilon: Optional[float] = None) -> Explanation:
    """Pick the dual side with the lowest k_g; ties resolve to the higher predicted strength, then a.

    When epsilon is given, only sides whose predicted strength reaches epsilon
    compete (a side that cannot flip has no meaningful k_g); if neither side
    qualifies, both compete.
    """
    if dual.for_b is None:
        return dual.for_a
    a, b = dual.for_a, dual.for_b
    if epsilon is not None:
        if a.cfs_hat >= epsilon and b.cfs_hat < epsilon:
            return a
        if b.cfs_hat >= epsilon and a.cfs_hat < epsilon:
            return b
    if a.k_g < b.k_g or (a.k_g == b.k_g and a.cfs_hat >= b.cfs_hat):
        return a
    return b


def counterfactual_metrics(
    explain_fn: Callable[[RecordPair], DualExplanation],
    matcher,
    pairs: Sequence[RecordPair],
    epsilon: float = 0.1,
    literal_cfs: bool = False,
) -> CounterfactualMetrics:
    """Counterfactual recall / precision / F1 over one predicted class of pairs.

    Precision re-executes the greedy strategy against the matcher with fresh
    injection sampling.
    """
    if not pairs:
        return CounterfactualMetrics(None, None, None, 0, 0, 0)
    recalled = 0
    successful = 0
    for pair in pairs:
        dual = explain_fn(pair)
        if max(e.cfs_hat for e in dual.sides) < epsilon:
            continue
        recalled += 1
        e_g = greedy_pick(dual, epsilon)
        rng = rng_for(e_g.seed, e_g.pair_id, e_g.side, e_g.granularity, salt="recheck")
        cfs, _, _ = actual_cfs(e_g, matcher, rng=rng, literal=literal_cfs)
        if cfs > 0:
            successful += 1
    cr = recalled / len(pairs)
    cp = successful / recalled if recalled else None
    if cr == 0:
        cf1 = 0.0
    elif cp is None or cp == 0:
        cf1 = 0.0
    else:
        cf1 = 2 * cr * cp / (cr + cp)
    return CounterfactualMetrics(cr, cp, cf1, recalled, successful, len(pairs))


def perturbation_error(
    explain_fn: Callable[[RecordPair], DualExplanation],
    matcher,
    pairs: Sequence[RecordPair],
    seed: int = 0,
    counts: Sequence[int] = (1, 2, 3),
) -> PerturbationErrorReport:
    """Gap between explanation-predicted and realized score changes under random perturbations."""
    abs_errors: list[float] = []
    predicted_magnitudes: list[float] = []
    records: list[dict] = []
    skipped = 0
    for pair in pairs:
        dual = explain_fn(pair)
        for e in dual.sides:
            if not e.entries:
                skipped += 1
                continue
            rng = rng_for(e.seed, e.pair_id, e.side, e.granularity, salt="pe")
            for c in counts:
                if c > len(e.entries):
                    continue
                picked = rng.choice(len(e.entries), size=c, replace=False)
                states = np.zeros(e.d_x, dtype=np.int8)
                deltas: list[float] = []
                for idx in picked:
                    entry = e.entries[int(idx)]
                    inject = e.space.features[entry.index].location == LOC_VALUE and (
                        rng.random() < 0.5 if _can_inject(e) else False
                    )
                    if inject:
                        states[entry.index] = M
                        deltas.append(entry.p)
                    else:
                        states[entry.index] = A
                        deltas.append(-entry.w)
                pair_z, plan = translate(e.space, states, matcher, rng)
                if plan.candidate_scores:
                    realized = max(plan.candidate_scores)
                else:
                    realized = matcher.predict_batch([pair_z])[0]
                predicted = e.f_x + sum(deltas)
                abs_errors.append(abs(realized - predicted))
                predicted_magnitudes.append(sum(abs(d) for d in deltas))
                records.append(
                    {
                        "pair_id": e.pair_id,
                        "side": e.side,
                        "count": c,
                        "predicted": predicted,
                        "realized": realized,
                        "magnitude": sum(abs(d) for d in deltas),
                    }
                )
    mae = float(np.mean(abs_errors)) if abs_errors else float("nan")
    mean_magnitude = float(np.mean(predicted_magnitudes)) if predicted_magnitudes else float("nan")
    pe = mae / mean_magnitude if mean_magnitude and mean_magnitude > 0 else float("nan")
    return PerturbationErrorReport(mae, pe, len(abs_errors), skipped, records)


def _can_inject(e: Explanation) -> bool:
    return any(entry.p != 0.0 for entry in e.entries)


def _token_level(e: Explanation) -> dict[tuple, tuple[float, float]]:
    """Split n-token features into single-token features carrying w/n and p/n."""
    out: dict[tuple, tuple[float, float]] = {}
    for entry in e.entries:
        f = e.space.features[entry.index] if e.space else entry.feature
        n = max(f.token_length, 1)
        for t in range(f.token_start, f.token_start + max(f.token_length, 1)):
            key = (f.side, f.location, f.attribute_index, t)
            out[key] = (entry.w / n, entry.p / n)
    return out


def _step_min(r: float, q: float) -> float:
    # H(rq) * min(|r|, |q|) with H the unit step
    if r * q <= 0:
        return 0.0
    return min(abs(r), abs(q))


def explanation_similarity(e1: Explanation, e2: Explanation, normalize: bool = True) -> float:
    """Weighted Jaccard similarity of two explanations, normalized to single-token features."""
    d1 = _token_level(e1) if normalize else {(e.feature.side, e.feature.location, e.feature.attribute_index, e.feature.token_start): (e.w, e.p) for e in e1.entries}
    d2 = _token_level(e2) if normalize else {(e.feature.side, e.feature.location, e.feature.attribute_index, e.feature.token_start): (e.w, e.p) for e in e2.entries}
    if not d1 and not d2:
        return 1.0
    common = d1.keys() & d2.keys()
    inter = sum(_step_min(d1[k][0], d2[k][0]) + _step_min(d1[k][1], d2[k][1]) for k in common)
    union = sum(max(abs(d1[k][0]), abs(d2[k][0])) + max(abs(d1[k][1]), abs(d2[k][1])) for k in common)
    union += sum(abs(w) + abs(p) for k, (w, p) in d1.items() if k not in common)
    union += sum(abs(w) + abs(p) for k, (w, p) in d2.items() if k not in common)
    if union <= 0:
        return 1.0
    return inter / union


def stability(
    explain_fn: Callable[[RecordPair, int], DualExplanation],
    matcher,
    pairs: Sequence[RecordPair],
    seeds: Sequence[int],
) -> StabilityReport:
    """Mean similarity between explanations of the same pair under two different seeds."""
    if len(set(seeds)) < 2:
        raise ValueError("stability needs at least two distinct seeds")
    s1, s2 = seeds[0], seeds[1]
    per_pair: list[tuple[str, float]] = []
    for pair in pairs:
        d1 = explain_fn(pair, s1)
        d2 = explain_fn(pair, s2)
        sims = [
            explanation_similarity(x1, x2)
            for x1, x2 in zip(d1.sides, d2.sides)
        ]
        per_pair.append((pair.pair_id, float(np.mean(sims))))
    mean_sim = float(np.mean([s for _, s in per_pair])) if per_pair else float("nan")
    return StabilityReport(mean_sim, per_pair)


@dataclass
class SweepRow:
    axis: str
    value: float
    cf1: Optional[float]
    pe: Optional[float]
    stability: Optional[float]
    median_seconds: Optional[float]

    def to_json(self) -> dict:
        return {
            "axis": self.axis,
            "value": self.value,
            "CF1": self.cf1,
            "PE": self.pe,
            "stability": self.stability,
            "median_seconds": self.median_seconds,
        }


def sweep(
    matcher,
    pairs: Sequence[RecordPair],
    axis: str,
    values: Sequence[float],
    base_config: Optional[ExplainerConfig] = None,
    seed: int = 0,
    stability_seeds: Sequence[int] = (0, 1),
) -> list[SweepRow]:
    """Vary sample size, K, or measure runtime; CF1/PE/stability per axis value."""
    base_config = base_config or ExplainerConfig()
    rows: list[SweepRow] = []
    for v in values:
        if axis == "sample_size":
            config = replace(base_config, s_min=int(v), s_max=int(v))
        elif axis == "K":
            config = replace(base_config, K=int(v))
        elif axis == "runtime":
            config = replace(base_config, s_min=int(v), s_max=int(v))
        else:
            raise ValueError(f"unknown sweep axis {axis!r}")

        durations: list[float] = []

        def explain_timed(pair: RecordPair, use_seed: int = seed) -> DualExplanation:
            t0 = time.perf_counter()
            dual = explain(matcher, pair, config, use_seed)
            durations.append(time.perf_counter() - t0)
            return dual

        if axis == "runtime":
            for pair in pairs:
                explain_timed(pair)
            rows.append(SweepRow(axis, v, None, None, None, float(np.median(durations))))
            continue

        cf = counterfactual_metrics(explain_timed, matcher, pairs, epsilon=config.epsilon)
        pe = perturbation_error(explain_timed, matcher, pairs, seed=seed)
        st = stability(lambda p, s: explain(matcher, p, config, s), matcher, pairs, stability_seeds)
        rows.append(
            SweepRow(axis, v, cf.cf1, pe.pe, st.mean_similarity, float(np.median(durations)))
        )
    return rows


def sweep_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["axis", "value", "cf1", "pe", "stability", "median_seconds"])
    for r in rows:
        w.writerow([r.axis, r.value, r.cf1, r.pe, r.stability, r.median_seconds])
    return buf.getvalue()


def partition_by_prediction(
    matcher,
    pairs: Sequence[RecordPair],
    limit: int = 500,
    seed: int = 0,
) -> dict[str, list[RecordPair]]:
    """Split pairs by predicted label and subsample up to `limit` per class."""
    scores = matcher.predict_batch(list(pairs)) if pairs else []
    matches = [p for p, s in zip(pairs, scores) if s > matcher.threshold]
    non_matches = [p for p, s in zip(pairs, scores) if s <= matcher.threshold]
    rng = np.random.default_rng(seed)
    out = {}
    for name, group in [("match", matches), ("nonmatch", non_matches)]:
        if len(group) > limit:
            idx = rng.choice(len(group), size=limit, replace=False)
            group = [group[i] for i in sorted(idx)]
        out[name] = group
    return out
