"""Subspace quality metric based on cumulative captured power.

Given the true covariance ``S`` and an estimate ``S_hat``:

* ``p``: eigenvalues of ``S`` sorted non-increasing, normalised to sum 1.
* ``p_hat``: power of ``S`` captured by each eigenvector of ``S_hat`` (in the
  estimate's own eigen-order), normalised.
* ``gamma = 1 - max_k (eta_p(k) - eta_phat(k)) / eta_p(k)`` with ``eta`` the
  cumulative sums.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateProfile, LengthMismatch, NotPSD, NotUnitary, ZeroMatrix
from .solver import CovarianceEstimate

_TIE_RTOL = 1e-10


def _hermitian(S, tol=1e-9):
    S = np.asarray(S, dtype=complex)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise LengthMismatch("covariance must be square")
    scale = max(np.abs(S).max(), 1e-300)
    if np.abs(S - S.conj().T).max() > tol * scale:
        raise NotPSD("matrix is not Hermitian")
    return 0.5 * (S + S.conj().T)


def power_profile(S) -> np.ndarray:
    """Normalised eigenvalue profile of a Hermitian PSD matrix (non-increasing)."""
    S = _hermitian(S)
    lam = np.linalg.eigvalsh(S)[::-1]
    tr = float(lam.sum())
    if tr <= 1e-15:
        raise ZeroMatrix("covariance has (numerically) zero trace")
    if lam[-1] < -1e-6 * tr:
        raise NotPSD(f"minimum eigenvalue {lam[-1]:.3g} is too negative")
    lam = np.clip(lam, 0.0, None)
    return lam / lam.sum()


def captured_power(S_true, U_hat) -> np.ndarray:
    """Unnormalised ``q_i = u_i^H S u_i``."""
    S = _hermitian(S_true)
    U = np.asarray(U_hat, dtype=complex)
    if U.shape != S.shape:
        raise LengthMismatch("basis and covariance sizes differ")
    if np.abs(U.conj().T @ U - np.eye(U.shape[1])).max() > 1e-9:
        raise NotUnitary("estimated basis is not unitary")
    return np.clip(np.einsum("ij,ik,kj->j", U.conj(), S, U).real, 0.0, None)


def captured_profile(S_true, U_hat) -> np.ndarray:
    q = captured_power(S_true, U_hat)
    total = q.sum()
    if total <= 1e-15:
        raise ZeroMatrix("true covariance has zero power")
    return q / total


def gamma(p, p_hat) -> float:
    p = np.asarray(p, dtype=float)
    p_hat = np.asarray(p_hat, dtype=float)
    if p.shape != p_hat.shape:
        raise LengthMismatch("profiles must have the same length")
    if p.size == 0 or p.sum() <= 0:
        raise DegenerateProfile("true profile is zero")
    eta = np.cumsum(p)
    eta_hat = np.cumsum(p_hat)
    if eta[0] <= 0:
        raise DegenerateProfile("true profile has a leading zero")
    nu = float(np.max((eta - eta_hat) / eta))
    return float(min(1.0, max(0.0, 1.0 - nu)))


def eta(p) -> np.ndarray:
    return np.cumsum(np.asarray(p, dtype=float))


def ordered_basis(S_hat, S_true=None) -> np.ndarray:
    """Eigenbasis of ``S_hat`` sorted by eigenvalue, then captured power, then index.

    ``S_hat`` may be a dense matrix or a :class:`CovarianceEstimate`, in which
    case the ``M x k`` factor is decomposed by SVD instead of forming ``S_hat``.
    """
    if isinstance(S_hat, CovarianceEstimate):
        F = S_hat.factor()
        M = S_hat.grid.geometry.M
        if F.shape[1] == 0:
            U, lam = np.eye(M, dtype=complex), np.zeros(M)
        else:
            U, sv, _ = np.linalg.svd(F, full_matrices=True)
            lam = np.zeros(M)
            lam[: sv.size] = sv**2
    else:
        H = _hermitian(S_hat)
        lam, U = np.linalg.eigh(H)
        lam, U = lam[::-1], U[:, ::-1]
    return _sort_basis(lam, U, S_true)


def _sort_basis(lam, U, S_true):
    order = np.argsort(-lam, kind="stable")
    lam, U = lam[order], U[:, order]
    if S_true is None:
        return U
    top = max(abs(lam[0]), 1e-300)
    # group (numerically) equal eigenvalues, then order inside groups by captured power
    group = np.concatenate([[0], np.cumsum(np.abs(np.diff(lam)) > _TIE_RTOL * top)])
    q = np.einsum("ij,ik,kj->j", U.conj(), np.asarray(S_true), U).real
    idx = np.arange(lam.size)
    order = np.lexsort((idx, -q, group))
    return U[:, order]


def subspace_gamma(S_true, S_hat, p_true=None) -> float:
    """End-to-end metric for an estimate (dense matrix or factored)."""
    p = power_profile(S_true) if p_true is None else p_true
    U = ordered_basis(S_hat, S_true)
    return gamma(p, captured_profile(S_true, U))
