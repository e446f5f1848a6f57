import math

import numpy as np
import pytest

from sketchtrack.array_model import ArrayGeometry, ula_response
from sketchtrack.channel import ScatteringProfile, simulate_batch, snr_to_sigma
from sketchtrack.errors import ConfigInvalid, DimMismatch, UnsupportedOperator
from sketchtrack.metrics import ordered_basis
from sketchtrack.selftest import crandn
from sketchtrack.svt import (SvtConfig, singular_value_shrink, svt_complete, svt_complete_batch,
                             svt_subspace)


def rank_one_instance(seed, M=16, T=32, m=8):
    rng = np.random.default_rng(seed)
    A = np.outer(crandn(rng, M), crandn(rng, T))
    masks = np.stack([np.sort(rng.choice(M, m, replace=False)) for _ in range(T)])
    return A, masks, np.take_along_axis(A, masks.T, axis=0)


def test_fully_observed_small_tau_returns_input(rng):
    A = crandn(rng, 6, 9)
    masks = np.tile(np.arange(6), (9, 1))
    X = svt_complete(A, masks, 6, SvtConfig(tau=1e-12, tol=1e-14))
    assert np.abs(X - A).max() <= 1e-8


def test_rank_one_completion_with_defaults():
    A, masks, obs = rank_one_instance(2)
    X = svt_complete(obs, masks, 16)
    assert np.linalg.norm(X - A) / np.linalg.norm(A) <= 1e-3


def test_rank_one_success_rate():
    # the thresholded program is not exact on every draw; most instances are recovered
    hits = 0
    for seed in range(20):
        A, masks, obs = rank_one_instance(100 + seed)
        hits += np.linalg.norm(svt_complete(obs, masks, 16) - A) / np.linalg.norm(A) <= 1e-3
    assert hits >= 15


def test_zero_observations(rng):
    masks = np.stack([np.sort(rng.choice(8, 3, replace=False)) for _ in range(5)])
    res = svt_complete(np.zeros((3, 5)), masks, 8, return_info=True)
    assert np.all(res.X == 0) and res.iters == 0


def test_shrinkage_of_singular_values(rng):
    Y = crandn(rng, 7, 11)
    for tau in (0.5, 2.0, 100.0):
        sv = np.linalg.svd(Y, compute_uv=False)
        got = np.linalg.svd(singular_value_shrink(Y, tau), compute_uv=False)
        assert np.allclose(got, np.maximum(sv - tau, 0), atol=1e-10)
    tall = crandn(rng, 11, 4)
    U, s, Vh = np.linalg.svd(tall, full_matrices=False)
    assert np.allclose(singular_value_shrink(tall, 1.0), (U * np.maximum(s - 1, 0)) @ Vh)


def test_subspace_examples(rng):
    assert np.all(svt_subspace(np.zeros((4, 6))) == 0)
    Q, _ = np.linalg.qr(crandn(rng, 5, 3))
    T = 3
    S = svt_subspace(Q * math.sqrt(T))
    lam = np.sort(np.linalg.eigvalsh(S))[::-1]
    assert np.allclose(lam, [1, 1, 1, 0, 0], atol=1e-12)


def test_single_scatterer_pipeline():
    geom = ArrayGeometry.ula(32)
    th = 0.3
    batch, _ = simulate_batch(ScatteringProfile.discrete([th], [1.0]), geom, 200, 16,
                              snr_to_sigma(30.0), np.random.default_rng(0))
    S = svt_subspace(svt_complete_batch(batch))
    u1 = ordered_basis(S)[:, 0]
    assert abs(np.vdot(u1, ula_response(geom, th))) / math.sqrt(32) >= 0.9


def test_errors(rng):
    batch, _ = simulate_batch(ScatteringProfile.discrete([0.0], [1.0]), ArrayGeometry.ula(8),
                              4, 3, 1.0, rng, sampler="phase")
    with pytest.raises(UnsupportedOperator):
        svt_complete_batch(batch)
    with pytest.raises(DimMismatch):
        svt_complete(np.zeros((3, 4)), np.zeros((4, 2), dtype=int), 8)
    with pytest.raises(ConfigInvalid):
        SvtConfig(tau=-1)
    with pytest.raises(ConfigInvalid):
        SvtConfig(delta=0)
