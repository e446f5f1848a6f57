"""Randomised invariants driven by hypothesis."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from sketchtrack.metrics import captured_profile, eta, gamma, power_profile
from sketchtrack.selftest import crandn, random_psd, random_unitary
from sketchtrack.solver import prox_l21, row_norms
from sketchtrack.svt import singular_value_shrink

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 6), st.integers(1, 5), st.floats(0.01, 5))
def test_prox_shrinks_each_row_by_alpha(seed, G, T, alpha):
    W = crandn(np.random.default_rng(seed), G, T)
    out = row_norms(prox_l21(W, alpha))
    np.testing.assert_allclose(out, np.maximum(row_norms(W) - alpha, 0), atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(2, 7))
def test_gamma_bounds_and_majorization(seed, n):
    rng = np.random.default_rng(seed)
    S = random_psd(rng, n, rank=int(rng.integers(1, n + 1)))
    p, ph = power_profile(S), captured_profile(S, random_unitary(rng, n))
    assert np.all(eta(ph) <= eta(p) + 1e-12)
    assert 0 <= gamma(p, ph) <= 1
    assert abs(gamma(p, p) - 1) < 1e-12


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 8), st.integers(1, 8), st.floats(0.0, 4.0))
def test_shrink_matches_svd(seed, a, b, tau):
    Y = crandn(np.random.default_rng(seed), a, b)
    U, s, Vh = np.linalg.svd(Y, full_matrices=False)
    ref = (U * np.maximum(s - tau, 0)) @ Vh
    np.testing.assert_allclose(singular_value_shrink(Y, tau), ref, atol=1e-9)
