import math

import numpy as np
import pytest

from sketchtrack.array_model import ArrayGeometry, build_grid, custom_grid
from sketchtrack.errors import DimMismatch, NonCanonicalGrid
from sketchtrack.operators import (DenseOperator, FFT2DOperator, FFTOperator, fft_adjoint,
                                   fft_forward, make_operator)
from sketchtrack.selftest import crandn, random_instance

MASK = np.array([0, 3, 7, 12])


def dense_forward(grid, mask, w):
    return grid.matrix[mask] @ w / math.sqrt(mask.size)


def test_forward_unit_vector(grid16):
    w = np.zeros(32)
    w[5] = 1
    assert np.allclose(fft_forward(w, MASK, grid16), grid16.matrix[MASK, 5] / 2, atol=1e-13)


def test_forward_linear_and_dense(grid16, rng):
    u, v = crandn(rng, 32), crandn(rng, 32)
    f = lambda w: fft_forward(w, MASK, grid16)  # noqa: E731
    assert np.abs(f(u + v) - f(u) - f(v)).max() <= 1e-12
    ref = dense_forward(grid16, MASK, u)
    assert np.linalg.norm(f(u) - ref) / np.linalg.norm(ref) <= 1e-10


def test_adjoint(grid16, rng):
    assert np.all(fft_adjoint(np.zeros(4), MASK, grid16) == 0)
    u, r = crandn(rng, 32), crandn(rng, 4)
    lhs = np.vdot(r, fft_forward(u, MASK, grid16))
    rhs = np.vdot(fft_adjoint(r, MASK, grid16), u)
    assert abs(lhs - rhs) <= 1e-12 * abs(lhs)
    ref = grid16.matrix[MASK].conj().T @ r / 2
    assert np.linalg.norm(fft_adjoint(r, MASK, grid16) - ref) / np.linalg.norm(ref) <= 1e-10


def test_fft_path_rejects_non_canonical(ula16, rng):
    grid = custom_grid(ula16, np.linspace(-1, 1, 32))
    with pytest.raises(NonCanonicalGrid):
        fft_forward(np.zeros(32), MASK, grid)
    with pytest.raises(NonCanonicalGrid):
        fft_adjoint(np.zeros(4), MASK, grid)


def test_fft_input_checks(grid16):
    with pytest.raises(DimMismatch):
        fft_forward(np.zeros(31), MASK, grid16)
    with pytest.raises(DimMismatch):
        fft_forward(np.zeros(32), [0, 16], grid16)
    with pytest.raises(DimMismatch):
        fft_adjoint(np.zeros(3), MASK, grid16)


@pytest.mark.parametrize("planar", [None, ((4, 4), (8, 8)), ((2, 8), (4, 16))])
def test_batched_operators_match_dense(rng, planar):
    batch, grid = random_instance(rng, m=4, T=5, planar=planar)
    fast = make_operator(batch, grid, "fft")
    assert isinstance(fast, FFT2DOperator if planar else FFTOperator)
    dense = DenseOperator.from_batch(batch, grid)
    W, R = crandn(rng, grid.G, 5), crandn(rng, 4, 5)
    for a, b in ((fast.forward(W), dense.forward(W)), (fast.adjoint(R), dense.adjoint(R))):
        assert np.linalg.norm(a - b) / np.linalg.norm(b) <= 1e-10


def test_auto_path_selection(rng, ula16):
    batch, grid = random_instance(rng)
    assert make_operator(batch, grid).path == "fft"
    phase, grid = random_instance(rng, sampler="phase")
    assert make_operator(phase, grid).path == "dense"
    with pytest.raises(NonCanonicalGrid):
        make_operator(phase, grid, "fft")
    odd = custom_grid(ula16, np.linspace(-1, 1, 20))
    assert make_operator(batch, odd).path == "dense"
