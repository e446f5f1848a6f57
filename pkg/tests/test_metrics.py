import numpy as np
import pytest

from sketchtrack.array_model import ArrayGeometry, build_grid
from sketchtrack.errors import (DegenerateProfile, LengthMismatch, NotPSD, NotUnitary,
                                ZeroMatrix)
from sketchtrack.metrics import (captured_power, captured_profile, eta, gamma, ordered_basis,
                                 power_profile, subspace_gamma)
from sketchtrack.selftest import crandn, random_psd, random_unitary
from sketchtrack.solver import CovarianceEstimate


def test_power_profile_examples():
    assert np.allclose(power_profile(np.eye(2)), [0.5, 0.5])
    v = np.array([1, 1j, -1]) / np.sqrt(3)
    assert np.allclose(power_profile(np.outer(v, v.conj())), [1, 0, 0], atol=1e-12)


def test_power_profile_matches_characteristic_polynomial(rng):
    S = random_psd(rng, 4)
    roots = np.sort(np.roots(np.poly(S)).real)[::-1]
    assert np.allclose(power_profile(S), roots / roots.sum(), atol=1e-9)


def test_power_profile_errors():
    with pytest.raises(ZeroMatrix):
        power_profile(np.zeros((3, 3)))
    with pytest.raises(NotPSD):
        power_profile(np.diag([1.0, -0.5]))
    with pytest.raises(NotPSD):
        power_profile(np.array([[1, 1], [0, 1]]))
    with pytest.raises(LengthMismatch):
        power_profile(np.ones((2, 3)))


def test_captured_profile_examples(rng):
    S = random_psd(rng, 5)
    lam, U = np.linalg.eigh(S)
    assert np.allclose(captured_profile(S, U[:, ::-1]), power_profile(S), atol=1e-12)
    assert captured_power(np.diag([2.0, 0.0]), np.eye(2))[0] == pytest.approx(2.0)
    q = captured_power(S, random_unitary(rng, 5))
    assert q.sum() == pytest.approx(np.trace(S).real, rel=1e-10)
    with pytest.raises(NotUnitary):
        captured_profile(S, 2 * np.eye(5))


def test_gamma_examples():
    p = np.array([1.0, 0, 0, 0])
    assert gamma(p, p) == 1.0
    assert gamma(p, np.array([0.5, 0.5, 0, 0])) == pytest.approx(0.5)
    assert gamma(np.array([0.6, 0.4, 0, 0]), np.array([0.4, 0.6, 0, 0])) == pytest.approx(2 / 3)


def test_gamma_errors():
    with pytest.raises(LengthMismatch):
        gamma(np.ones(2) / 2, np.ones(3) / 3)
    with pytest.raises(DegenerateProfile):
        gamma(np.zeros(3), np.ones(3) / 3)


def test_majorization_and_range(rng):
    for _ in range(100):
        n = int(rng.integers(2, 7))
        S = random_psd(rng, n, rank=int(rng.integers(1, n + 1)))
        p, ph = power_profile(S), captured_profile(S, random_unitary(rng, n))
        assert np.all(eta(p) >= eta(ph) - 1e-12)
        assert eta(p)[-1] == pytest.approx(1) and eta(ph)[-1] == pytest.approx(1)
        assert 0.0 <= gamma(p, ph) <= 1.0


def test_scale_invariance(rng):
    S = random_psd(rng, 4)
    ph = captured_profile(S, random_unitary(rng, 4))
    assert gamma(power_profile(S), ph) == pytest.approx(gamma(power_profile(7.5 * S), ph))


def test_prefix_beamformer_certificate(rng):
    for _ in range(30):
        S = random_psd(rng, 5, rank=3)
        U = random_unitary(rng, 5)
        g = gamma(power_profile(S), captured_profile(S, U))
        lam = np.sort(np.linalg.eigvalsh(S))[::-1]
        for k in range(1, 6):
            Uk = U[:, :k]
            captured = np.trace(Uk.conj().T @ S @ Uk).real
            assert captured >= g * lam[:k].sum() - 1e-9


def test_ties_ordered_by_captured_power():
    S_true = np.diag([1.0, 3.0, 2.0])
    U = ordered_basis(np.eye(3), S_true)
    assert np.allclose(np.abs(U), np.eye(3)[:, [1, 2, 0]])
    assert subspace_gamma(S_true, np.eye(3)) == pytest.approx(1.0)


def test_factored_and_dense_agree(rng):
    grid = build_grid(ArrayGeometry.ula(8), 16)
    w = np.zeros(16)
    w[[2, 3, 9]] = [1.0, 0.5, 0.25]
    est = CovarianceEstimate(grid, w)
    S_true = random_psd(rng, 8)
    assert subspace_gamma(S_true, est) == pytest.approx(subspace_gamma(S_true, est.dense()),
                                                        abs=1e-9)


def test_perfect_estimate_scores_one(rng):
    S = random_psd(rng, 6)
    assert subspace_gamma(S, 3.0 * S) == pytest.approx(1.0)
    F = crandn(rng, 6, 2)
    low = F @ F.conj().T
    assert subspace_gamma(low, low) == pytest.approx(1.0)
