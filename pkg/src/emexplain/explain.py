"""Dual explanations, counterfactual strength, and the granularity-doubling loop."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .data import RecordPair
from .interpretable import (
    A,
    M,
    P,
    InterpretableSpace,
    build_space,
    max_tokens_N,
    translate,
)
from .surrogate import (
    MODE_LEMON,
    MODE_LIME,
    NeighborhoodSample,
    SamplingAborted,
    attributions,
    d_max_for,
    fit_surrogate,
    sample_neighborhood,
    sample_size,
)


class ExplainError(Exception):
    """Explanation failed; granularity reached is attached for resumption."""

    def __init__(self, message: str, granularity: Optional[int] = None):
        super().__init__(message)
        self.granularity = granularity


@dataclass
class ExplainerConfig:
    K: int = 5
    epsilon: float = 0.1
    s_min: int = 500
    s_max: int = 3000
    mode: str = MODE_LEMON
    disable_dual: bool = False
    disable_potential: bool = False
    fixed_granularity: Optional[int] = None
    include_names: bool = False
    literal_cfs: bool = False
    anchor_intercept: bool = True

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.mode not in (MODE_LEMON, MODE_LIME):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def effective_mode(self) -> str:
        return MODE_LIME if self.disable_potential else self.mode

    @classmethod
    def lime_baseline(cls, **overrides) -> "ExplainerConfig":
        """Token-level exclusion-only baseline (dual explanations kept for comparability)."""
        defaults = dict(mode=MODE_LIME, disable_potential=True, fixed_granularity=1)
        defaults.update(overrides)
        return cls(**defaults)


@dataclass
class ExplanationEntry:
    index: int
    feature: object  # InterpretableFeature
    w: float
    p: float

    def to_json(self) -> dict:
        return {"feature": self.feature.to_json(), "w": self.w, "p": self.p}


@dataclass
class Explanation:
    pair_id: str
    side: str
    granularity: int
    entries: list[ExplanationEntry]
    f_x: float
    threshold: float
    cfs_hat: float
    cfs_actual: float
    k_g: int
    seed: int
    sample_count: int
    d_max: int
    d_x: int
    degenerate: bool = False
    early_exit: bool = False
    space: Optional[InterpretableSpace] = field(default=None, repr=False)
    greedy_pair: Optional[RecordPair] = field(default=None, repr=False)

    @property
    def is_match(self) -> bool:
        return self.f_x > self.threshold

    def to_json(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "side": self.side,
            "granularity": self.granularity,
            "threshold": self.threshold,
            "score": self.f_x,
            "entries": [e.to_json() for e in self.entries],
            "cfs_hat": self.cfs_hat,
            "cfs_actual": self.cfs_actual,
            "k_g": self.k_g,
            "seed": self.seed,
            "sample_count": self.sample_count,
            "d_max": self.d_max,
            "d_x": self.d_x,
            "degenerate": self.degenerate,
            "early_exit": self.early_exit,
        }


@dataclass
class DualExplanation:
    pair_id: str
    for_a: Explanation
    for_b: Optional[Explanation] = None  # None for a joint (dual-disabled) explanation

    @property
    def sides(self) -> list[Explanation]:
        return [e for e in (self.for_a, self.for_b) if e is not None]

    def to_json(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "a": self.for_a.to_json(),
            "b": self.for_b.to_json() if self.for_b else None,
        }


def rng_for(seed: int, pair_id: str, side: str, granularity: int, salt: str = "") -> np.random.Generator:
    """Per-explanation stream derived from stable identifiers, reproducible under parallelism."""
    key = f"{seed}|{pair_id}|{side}|{granularity}|{salt}".encode()
    digest = hashlib.sha256(key).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "big"))


def inc_list(entries: Sequence[ExplanationEntry]) -> list[tuple[ExplanationEntry, float]]:
    """Positive inc_i = max(-w_i, p_i), descending (ties keep lower index first)."""
    scored = [(e, max(-e.w, e.p)) for e in entries]
    scored = [(e, v) for e, v in scored if v > 0]
    return sorted(scored, key=lambda t: (-t[1], t[0].index))


def dec_list(entries: Sequence[ExplanationEntry]) -> list[tuple[ExplanationEntry, float]]:
    """Positive dec_i = w_i, descending."""
    scored = [(e, e.w) for e in entries if e.w > 0]
    return sorted(scored, key=lambda t: (-t[1], t[0].index))


def predicted_cfs(e: Explanation, k: int) -> float:
    """Predicted counterfactual strength of k greedy steps."""
    if e.is_match:
        steps = dec_list(e.entries)
        total = sum(v for _, v in steps[:k])
        return e.threshold - (e.f_x - total)
    steps = inc_list(e.entries)
    total = sum(v for _, v in steps[:k])
    return (e.f_x + total) - e.threshold


def greedy_k(e: Explanation, epsilon: float) -> int:
    """Smallest step count reaching predicted strength epsilon, else the full list length."""
    steps = dec_list(e.entries) if e.is_match else inc_list(e.entries)
    for k in range(len(steps) + 1):
        if predicted_cfs(e, k) >= epsilon:
            return k
    return len(steps)


def greedy_vector(e: Explanation) -> np.ndarray:
    """Perturbation vector of the greedy counterfactual strategy."""
    states = np.zeros(e.d_x, dtype=np.int8)
    if e.is_match:
        for entry, _ in dec_list(e.entries)[: e.k_g]:
            states[entry.index] = A
    else:
        for entry, _ in inc_list(e.entries)[: e.k_g]:
            states[entry.index] = A if -entry.w > entry.p else M
    return states


def actual_cfs(
    e: Explanation,
    matcher,
    rng: Optional[np.random.Generator] = None,
    literal: bool = False,
) -> tuple[float, float, RecordPair]:
    """Realize the greedy strategy and measure the threshold margin it achieves.

    Returns (cfs, realized score, perturbed pair). The default form is positive
    iff the perturbed pair crosses the matcher threshold; literal=True keeps the
    uncorrected algebra for fidelity experiments.
    """
    if rng is None:
        rng = rng_for(e.seed, e.pair_id, e.side, e.granularity, salt="greedy")
    states = greedy_vector(e)
    pair_g, plan = translate(e.space, states, matcher, rng)
    if plan.candidate_scores:
        realized = max(plan.candidate_scores)
    else:
        realized = matcher.predict_batch([pair_g])[0]
    if literal:
        cfs = (e.threshold - (e.f_x - realized)) if e.is_match else ((e.f_x + realized) - e.threshold)
    else:
        cfs = (e.threshold - realized) if e.is_match else (realized - e.threshold)
    return cfs, realized, pair_g


def _harmonic(a: float, b: float) -> float:
    if a <= 0 or b <= 0:
        return float("-inf")
    return a * b / (a + b)


def granularity_schedule(N: int, fixed: Optional[int]) -> list[int]:
    if fixed is not None:
        return [fixed]
    out = []
    n = 1
    while n < 2 * N:
        out.append(n)
        n *= 2
    return out


def explain_side(
    matcher,
    pair: RecordPair,
    side: str,
    config: ExplainerConfig,
    seed: int,
    f_x: Optional[float] = None,
    K: Optional[int] = None,
) -> Explanation:
    """Run the granularity-doubling loop for one side (or the joint space)."""
    threshold = getattr(matcher, "threshold", 0.5)
    if f_x is None:
        f_x = matcher.predict_batch([pair])[0]
    K = K if K is not None else config.K
    if side == "ab":
        N = max(max_tokens_N(pair.a), max_tokens_N(pair.b))
    else:
        N = max_tokens_N(pair.side(side))
    mode = config.effective_mode
    best: Optional[Explanation] = None
    best_hm = float("-inf")
    for n in granularity_schedule(N, config.fixed_granularity):
        rng = rng_for(seed, pair.pair_id, side, n)
        space = build_space(pair, side, n, config.include_names)
        try:
            sample = sample_neighborhood(
                space, mode, matcher, rng, s_min=config.s_min, s_max=config.s_max
            )
            fit = fit_surrogate(sample, K, f_x, anchor_intercept=config.anchor_intercept)
            entries = [
                ExplanationEntry(i, space.features[i], w, p)
                for i, w, p in attributions(fit)
            ]
            e = Explanation(
                pair_id=pair.pair_id,
                side=side,
                granularity=n,
                entries=entries,
                f_x=f_x,
                threshold=threshold,
                cfs_hat=0.0,
                cfs_actual=0.0,
                k_g=0,
                seed=seed,
                sample_count=len(sample),
                d_max=d_max_for(space.d_x),
                d_x=space.d_x,
                degenerate=fit.degenerate,
                space=space,
            )
            e.k_g = greedy_k(e, config.epsilon)
            e.cfs_hat = predicted_cfs(e, e.k_g)
            cfs, _, pair_g = actual_cfs(e, matcher, rng=rng, literal=config.literal_cfs)
            e.cfs_actual = cfs
            e.greedy_pair = pair_g
        except SamplingAborted as err:
            raise ExplainError(str(err), granularity=n) from err
        if e.cfs_hat >= config.epsilon and e.cfs_actual >= config.epsilon:
            e.early_exit = True
            return e
        hm = _harmonic(e.cfs_hat, e.cfs_actual)
        if best is None or hm > best_hm:
            best, best_hm = e, hm
    assert best is not None
    return best


def explain(matcher, pair: RecordPair, config: Optional[ExplainerConfig] = None, seed: int = 0) -> DualExplanation:
    """Produce dual explanations (or a single joint one when dual is disabled)."""
    config = config or ExplainerConfig()
    f_x = matcher.predict_batch([pair])[0]
    if config.disable_dual:
        joint = explain_side(matcher, pair, "ab", config, seed, f_x=f_x, K=2 * config.K)
        return DualExplanation(pair.pair_id, joint, None)
    e_a = explain_side(matcher, pair, "a", config, seed, f_x=f_x)
    e_b = explain_side(matcher, pair, "b", config, seed, f_x=f_x)
    return DualExplanation(pair.pair_id, e_a, e_b)


def explain_lime_em(matcher, pair: RecordPair, K: int = 10, seed: int = 0) -> DualExplanation:
    """Standalone LIME-for-EM: one joint token-level exclusion explanation."""
    config = ExplainerConfig(
        K=max(1, K // 2),
        mode=MODE_LIME,
        disable_dual=True,
        disable_potential=True,
        fixed_granularity=1,
    )
    return explain(matcher, pair, config, seed)


class LemonExplainer:
    """Estimator-style front end: configure once, explain many pairs."""

    def __init__(
        self,
        matcher=None,
        K: int = 5,
        epsilon: float = 0.1,
        s_min: int = 500,
        s_max: int = 3000,
        mode: str = MODE_LEMON,
        disable_dual: bool = False,
        disable_potential: bool = False,
        fixed_granularity: Optional[int] = None,
        include_names: bool = False,
        literal_cfs: bool = False,
        seed: int = 0,
    ):
        self.matcher = matcher
        self.K = K
        self.epsilon = epsilon
        self.s_min = s_min
        self.s_max = s_max
        self.mode = mode
        self.disable_dual = disable_dual
        self.disable_potential = disable_potential
        self.fixed_granularity = fixed_granularity
        self.include_names = include_names
        self.literal_cfs = literal_cfs
        self.seed = seed

    def get_params(self, deep: bool = True) -> dict:
        return {
            "matcher": self.matcher,
            "K": self.K,
            "epsilon": self.epsilon,
            "s_min": self.s_min,
            "s_max": self.s_max,
            "mode": self.mode,
            "disable_dual": self.disable_dual,
            "disable_potential": self.disable_potential,
            "fixed_granularity": self.fixed_granularity,
            "include_names": self.include_names,
            "literal_cfs": self.literal_cfs,
            "seed": self.seed,
        }

    def set_params(self, **params) -> "LemonExplainer":
        for k, v in params.items():
            if not hasattr(self, k):
                raise ValueError(f"unknown parameter {k!r}")
            setattr(self, k, v)
        return self

    @property
    def config(self) -> ExplainerConfig:
        return ExplainerConfig(
            K=self.K,
            epsilon=self.epsilon,
            s_min=self.s_min,
            s_max=self.s_max,
            mode=self.mode,
            disable_dual=self.disable_dual,
            disable_potential=self.disable_potential,
            fixed_granularity=self.fixed_granularity,
            include_names=self.include_names,
            literal_cfs=self.literal_cfs,
        )

    def explain(self, pair: RecordPair, seed: Optional[int] = None) -> DualExplanation:
        if self.matcher is None:
            raise ValueError("matcher is not set")
        return explain(self.matcher, pair, self.config, self.seed if seed is None else seed)

    def explain_batch(self, pairs: Sequence[RecordPair], seed: Optional[int] = None) -> list[DualExplanation]:
        return [self.explain(p, seed) for p in pairs]
