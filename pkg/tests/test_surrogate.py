import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emexplain.surrogate import (
    A,
    M,
    MODE_LEMON,
    MODE_LIME,
    P,
    NeighborhoodSample,
    attributions,
    d_max_for,
    draw_states,
    fit_surrogate,
    kernel_weight,
    m_subset_bound,
    sample_size,
)


def rng(seed=0):
    return np.random.default_rng(seed)


# --- formula suite ---------------------------------------------------------


def test_kernel_weight_values():
    assert abs(kernel_weight(0, 5) - 1.0) < 1e-12
    assert abs(kernel_weight(5, 5) - math.exp(-2)) < 1e-12
    assert abs(kernel_weight(2.5, 5) - math.exp(-1)) < 1e-12


def test_sample_size_rules():
    assert sample_size(10) == 500
    assert sample_size(50) == 1500
    assert sample_size(200) == 3000


def test_d_max_rule():
    assert d_max_for(10) == 5
    assert d_max_for(24) == 5
    assert d_max_for(25) == 5
    assert d_max_for(26) == 5
    assert d_max_for(100) == 20


def test_m_subset_bound():
    assert m_subset_bound(12) == 4
    assert m_subset_bound(6) == 3
    assert m_subset_bound(300) == 100


def test_zero_m_fraction():
    # bound 4 -> P(m=0) = 0.5 + 0.5/5 = 0.6
    states = draw_states(12, MODE_LEMON, rng(7), 20_000)
    zero_m = np.mean((states == M).sum(axis=1) == 0)
    assert abs(zero_m - 0.6) < 0.02


def test_lime_mode_never_injects():
    states = draw_states(12, MODE_LIME, rng(3), 2000)
    assert not np.any(states == M)


def test_a_subset_size_bounded_by_dmax():
    states = draw_states(40, MODE_LEMON, rng(1), 5000)
    a_sizes = (states == A).sum(axis=1)
    assert a_sizes.max() <= min(d_max_for(40), 40)


# --- WLS oracle ------------------------------------------------------------


def enumerate_states(d_x, mode):
    alphabet = [P, A] if mode == MODE_LIME else [P, A, M]
    return np.array(list(itertools.product(alphabet, repeat=d_x)), dtype=np.int8)


def dummy_columns(states, mode):
    a_cols = (states == A).astype(float)
    if mode == MODE_LIME:
        return a_cols
    m_cols = (states == M).astype(float)
    X = np.empty((states.shape[0], 2 * states.shape[1]))
    X[:, 0::2] = a_cols
    X[:, 1::2] = m_cols
    return X


def oracle_wls(states, y, w, cols, mode):
    """Independent closed-form weighted least squares on the chosen dummy columns."""
    X = dummy_columns(states, mode)[:, cols]
    W = np.diag(w)
    beta = np.linalg.pinv(X.T @ W @ X) @ X.T @ W @ y
    resid = y - X @ beta
    return beta, float(resid @ (w * resid))


def additive_scores(states, coeffs):
    # f(z) = 0.5 + sum c_i * [i present]
    present = states == P
    return 0.5 + present @ np.asarray(coeffs)


def make_sample(states, y, mode):
    distances = (states != P).sum(axis=1)
    w = np.exp(-2.0 * distances / d_max_for(states.shape[1]))
    return NeighborhoodSample(states=states, y=np.asarray(y, float), weights=w, mode=mode)


def test_additive_matcher_recovery():
    coeffs = (0.2, -0.1, 0.05)
    states = enumerate_states(3, MODE_LIME)
    y = additive_scores(states, coeffs)
    sample = make_sample(states, y, MODE_LIME)
    f_x = float(y[np.all(states == P, axis=1)][0])
    fit = fit_surrogate(sample, K=3, f_x=f_x)
    got = {i: w for i, w, _ in attributions(fit)}
    for i, c in enumerate(coeffs):
        assert abs(got[i] - c) < 0.01


def test_k1_selects_largest_reduction():
    coeffs = (0.2, -0.1, 0.05)
    states = enumerate_states(3, MODE_LIME)
    y = additive_scores(states, coeffs)
    sample = make_sample(states, y, MODE_LIME)
    f_x = float(y[np.all(states == P, axis=1)][0])
    fit = fit_surrogate(sample, K=1, f_x=f_x)
    # oracle: best single feature by weighted SSE
    best = min(
        range(3),
        key=lambda j: oracle_wls(states, y - f_x, sample.weights, [j], MODE_LIME)[1],
    )
    assert fit.selected == (best,) == (0,)


def test_constant_matcher_degenerate():
    states = enumerate_states(3, MODE_LEMON)
    sample = make_sample(states, np.full(len(states), 0.7), MODE_LEMON)
    fit = fit_surrogate(sample, K=3, f_x=0.7)
    assert fit.degenerate
    assert attributions(fit) == []


def test_sign_convention():
    from emexplain.surrogate import SurrogateFit

    fit = SurrogateFit((4,), {4: -0.3}, {4: 0.25}, 0.0, 0.5, MODE_LEMON)
    assert attributions(fit) == [(4, 0.3, 0.25)]


def test_lime_mode_p_always_zero(overlap_matcher, product_pair):
    states = enumerate_states(4, MODE_LIME)
    y = additive_scores(states, (0.1, 0.05, -0.02, 0.07))
    sample = make_sample(states, y, MODE_LIME)
    fit = fit_surrogate(sample, K=4, f_x=float(y[0]))
    assert all(p == 0.0 for _, _, p in attributions(fit))


@pytest.mark.parametrize("mode", [MODE_LIME, MODE_LEMON])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_oracle_equivalence_random_targets(mode, seed):
    """fit_surrogate coefficients match the closed-form oracle on its selected columns."""
    g = rng(seed)
    d_x = 4
    states = enumerate_states(d_x, mode)
    y = g.normal(0.5, 0.2, size=len(states))
    sample = make_sample(states, y, mode)
    f_x = float(y[np.all(states == P, axis=1)][0])
    fit = fit_surrogate(sample, K=3, f_x=f_x)
    group = 1 if mode == MODE_LIME else 2
    cols = [group * j + g2 for j in fit.selected for g2 in range(group)]
    beta, sse = oracle_wls(states, y - f_x, sample.weights, cols, mode)
    got = []
    for pos, j in enumerate(fit.selected):
        got.append(fit.beta_a[j])
        if group == 2:
            got.append(fit.beta_m[j])
    assert np.allclose(got, beta, atol=0.02)
    assert abs(fit.weighted_sse - sse) < 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_forward_selection_step_optimality(seed):
    """Each greedy step picks the group whose addition minimizes weighted SSE (exhaustively checked)."""
    g = rng(100 + seed)
    d_x = 5
    mode = MODE_LEMON
    states = enumerate_states(d_x, mode)
    y = g.normal(0.5, 0.25, size=len(states))
    sample = make_sample(states, y, mode)
    f_x = float(y[np.all(states == P, axis=1)][0])
    fit = fit_surrogate(sample, K=3, f_x=f_x)
    resid_target = y - f_x
    chosen_cols: list[int] = []
    for step, feat in enumerate(fit.selected):
        sses = {}
        for j in range(d_x):
            if j in fit.selected[:step]:
                continue
            cols = chosen_cols + [2 * j, 2 * j + 1]
            sses[j] = oracle_wls(states, resid_target, sample.weights, cols, mode)[1]
        best = min(sses.values())
        assert sses[feat] <= best + 1e-9
        chosen_cols += [2 * feat, 2 * feat + 1]


def test_selection_stops_at_k():
    states = enumerate_states(6, MODE_LIME)
    y = rng(9).normal(0.5, 0.3, size=len(states))
    sample = make_sample(states, y, MODE_LIME)
    fit = fit_surrogate(sample, K=2, f_x=float(y[0]))
    assert len(fit.selected) <= 2


@given(st.integers(min_value=1, max_value=60))
def test_kernel_weight_in_unit_interval(d):
    dmax = d_max_for(d * 5)
    for dist in range(d + 1):
        w = kernel_weight(dist, dmax)
        assert 0.0 < w <= 1.0
