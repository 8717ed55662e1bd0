"""Neighborhood sampling, kernel weighting, and the sparse weighted linear surrogate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .interpretable import A, M, P, InterpretableSpace, realize_candidates

RIDGE_DAMPING = 1e-6
SSE_EPS = 1e-12

MODE_LIME = "lime"
MODE_LEMON = "lemon"


class SamplingAborted(Exception):
    """Matcher failure while scoring the neighborhood; carries progress for resume."""

    def __init__(self, message: str, completed: int, total: int):
        super().__init__(message)
        self.completed = completed
        self.total = total


def d_max_for(d_x: int) -> int:
    return max(5, d_x // 5)


def kernel_weight(distance: float, d_max: int) -> float:
    """exp(-2 D / D_max); any non-P state counts distance 1."""
    if d_max < 1:
        raise ValueError("D_max must be >= 1")
    return math.exp(-2.0 * distance / d_max)


def sample_size(d_x: int, s_min: int = 500, s_max: int = 3000) -> int:
    return max(s_min, min(30 * d_x, s_max))


def m_subset_bound(d_x: int) -> int:
    return max(3, d_x // 3)


@dataclass
class NeighborhoodSample:
    states: np.ndarray  # (S, d_x) int8 over {P, A, M}
    y: np.ndarray  # matcher scores
    weights: np.ndarray  # kernel weights in (0, 1]
    mode: str

    def __len__(self) -> int:
        return len(self.y)


def draw_states(space_d_x: int, mode: str, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw perturbation vectors: uniform-size A-subsets, plus sparse M-subsets in lemon mode."""
    d_x = space_d_x
    dmax = min(d_max_for(d_x), d_x)
    mbound = m_subset_bound(d_x)
    states = np.zeros((size, d_x), dtype=np.int8)
    for i in range(size):
        a_size = int(rng.integers(0, dmax + 1))
        if a_size:
            a_idx = rng.choice(d_x, size=a_size, replace=False)
            states[i, a_idx] = A
        if mode == MODE_LEMON:
            if rng.random() < 0.5:
                m_size = 0
            else:
                m_size = int(rng.integers(0, mbound + 1))
            if m_size:
                free = np.flatnonzero(states[i] == P)
                m_size = min(m_size, len(free))
                if m_size:
                    m_idx = rng.choice(free, size=m_size, replace=False)
                    states[i, m_idx] = M
    return states


def sample_neighborhood(
    space: InterpretableSpace,
    mode: str,
    matcher,
    rng: np.random.Generator,
    s_min: int = 500,
    s_max: int = 3000,
    batch_size: int = 64,
) -> NeighborhoodSample:
    """Sample S perturbation vectors, translate and score them, attach kernel weights.

    All candidate pairs (including injection-target candidates of M-vectors) are
    scored through matcher batches; per vector y is the score of the chosen
    (argmax) candidate.
    """
    d_x = space.d_x
    S = sample_size(d_x, s_min, s_max)
    states = draw_states(d_x, mode, rng, S)

    candidates = []
    slices: list[tuple[int, int]] = []
    for i in range(S):
        cands, _, _, _ = realize_candidates(space, states[i], rng)
        slices.append((len(candidates), len(cands)))
        candidates.extend(cands)

    scores: list[float] = []
    bs = getattr(matcher, "batch_size", None) or batch_size
    for start in range(0, len(candidates), bs):
        chunk = candidates[start : start + bs]
        try:
            scores.extend(matcher.predict_batch(chunk))
        except Exception as e:
            raise SamplingAborted(str(e), completed=start, total=len(candidates)) from e

    y = np.empty(S, dtype=np.float64)
    for i, (start, count) in enumerate(slices):
        y[i] = max(scores[start : start + count])

    distances = (states != P).sum(axis=1)
    dmax = d_max_for(d_x)
    weights = np.exp(-2.0 * distances / dmax)
    return NeighborhoodSample(states=states, y=y, weights=weights, mode=mode)


@dataclass
class SurrogateFit:
    selected: tuple[int, ...]  # feature indices in selection order
    beta_a: dict[int, float]
    beta_m: dict[int, float]
    weighted_sse: float
    intercept: float
    mode: str
    degenerate: bool = False

    def to_json(self) -> dict:
        return {
            "selected": list(self.selected),
            "beta_a": {str(i): v for i, v in self.beta_a.items()},
            "beta_m": {str(i): v for i, v in self.beta_m.items()},
            "weighted_sse": self.weighted_sse,
            "intercept": self.intercept,
            "mode": self.mode,
            "degenerate": self.degenerate,
        }


def _dummy_columns(states: np.ndarray, mode: str) -> np.ndarray:
    """P-referenced dummy coding: one A column per feature, plus one M column in lemon mode."""
    a_cols = (states == A).astype(np.float64)
    if mode == MODE_LIME:
        return a_cols
    m_cols = (states == M).astype(np.float64)
    d_x = states.shape[1]
    X = np.empty((states.shape[0], 2 * d_x))
    X[:, 0::2] = a_cols
    X[:, 1::2] = m_cols
    return X


def _wls_sse(X: np.ndarray, y: np.ndarray, w: np.ndarray, cols: list[int], ridge: float) -> tuple[np.ndarray, float]:
    Xc = X[:, cols]
    Xw = Xc * w[:, None]
    A_mat = Xc.T @ Xw + ridge * np.eye(len(cols))
    b = Xw.T @ y
    beta = np.linalg.solve(A_mat, b)
    resid = y - Xc @ beta
    return beta, float(w @ (resid * resid))


def fit_surrogate(
    sample: NeighborhoodSample,
    K: int,
    f_x: float,
    anchor_intercept: bool = True,
    ridge: float = RIDGE_DAMPING,
) -> SurrogateFit:
    """Forward-selected weighted least squares on dummy-coded states.

    The intercept is fixed at f(x) by regressing residuals (set
    anchor_intercept=False for the strict no-intercept reading). In lemon mode a
    feature's A and M dummies are selected together.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if len(sample) == 0:
        raise ValueError("sample is empty")
    mode = sample.mode
    y = sample.y - f_x if anchor_intercept else sample.y.copy()
    w = sample.weights
    d_x = sample.states.shape[1]
    X = _dummy_columns(sample.states, mode)
    group = 2 if mode == MODE_LEMON else 1

    if np.ptp(sample.y) == 0.0:
        return SurrogateFit((), {}, {}, float(w @ (y * y)), f_x, mode, degenerate=True)

    selected: list[int] = []
    sel_cols: list[int] = []
    best_sse = float(w @ (y * y))
    beta = np.zeros(0)
    while len(selected) < min(K, d_x):
        best_candidate = None
        best_candidate_sse = None
        best_candidate_beta = None
        for j in range(d_x):
            if j in selected:
                continue
            cols = sel_cols + [group * j + g for g in range(group)]
            cand_beta, sse = _wls_sse(X, y, w, cols, ridge)
            # strict < with ascending j gives the lowest-index tie-break
            if best_candidate_sse is None or sse < best_candidate_sse:
                best_candidate, best_candidate_sse, best_candidate_beta = j, sse, cand_beta
        if best_candidate is None or best_sse - best_candidate_sse <= SSE_EPS:
            break
        selected.append(best_candidate)
        sel_cols += [group * best_candidate + g for g in range(group)]
        best_sse = best_candidate_sse
        beta = best_candidate_beta

    beta_a: dict[int, float] = {}
    beta_m: dict[int, float] = {}
    for pos, feat in enumerate(selected):
        beta_a[feat] = float(beta[group * pos])
        if group == 2:
            beta_m[feat] = float(beta[group * pos + 1])
    return SurrogateFit(tuple(selected), beta_a, beta_m, best_sse, f_x, mode)


def attributions(fit: SurrogateFit) -> list[tuple[int, float, float]]:
    """Per selected feature: (index, w_i = -beta_A, p_i = beta_M or 0)."""
    out = []
    for i in fit.selected:
        w_i = -fit.beta_a.get(i, 0.0)
        p_i = fit.beta_m.get(i, 0.0)
        out.append((i, w_i, p_i))
    return out
