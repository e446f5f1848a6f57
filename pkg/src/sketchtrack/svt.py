"""Singular value thresholding baseline for the batch comparison.

The ``M x T`` snapshot matrix is observed only on the selected antennas of
each column.  SVT completes it, and the subspace estimate is the sample
covariance of the completion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import OperatorKind, SketchBatch
from .errors import ConfigInvalid, DimMismatch, UnsupportedOperator


@dataclass
class SvtConfig:
    """``tau``/``delta`` default to ``5 sqrt(M T)`` and ``1.2 M T / |Omega|``."""

    tau: float | None = None
    delta: float | None = None
    max_iters: int = 1000
    tol: float = 1e-4

    def __post_init__(self):
        if self.tau is not None and self.tau <= 0:
            raise ConfigInvalid("tau must be positive")
        if self.delta is not None and self.delta <= 0:
            raise ConfigInvalid("delta must be positive")
        if self.max_iters < 1:
            raise ConfigInvalid("max_iters must be positive")


@dataclass
class SvtResult:
    X: np.ndarray
    iters: int
    residual: float


def singular_value_shrink(Y: np.ndarray, tau: float) -> np.ndarray:
    """Soft-threshold the singular values of ``Y`` at ``tau``.

    Works through the Gram matrix of the short side: with ``Y Y^H = U L U^H``
    the result is ``U_k diag(1 - tau / s_k) U_k^H Y`` over ``s_k > tau``.
    """
    wide = Y.shape[0] <= Y.shape[1]
    Z = Y if wide else Y.conj().T
    lam, U = np.linalg.eigh(Z @ Z.conj().T)
    s = np.sqrt(np.clip(lam, 0.0, None))
    keep = s > tau
    if not keep.any():
        return np.zeros_like(Y)
    Uk = U[:, keep]
    out = (Uk * (1.0 - tau / s[keep])) @ (Uk.conj().T @ Z)
    return out if wide else out.conj().T


def svt_complete(observed: np.ndarray, masks: np.ndarray, M: int,
                 config: SvtConfig | None = None, return_info: bool = False):
    """Complete an ``M x T`` matrix from ``observed[:, t]`` at rows ``masks[t]``.

    ``observed`` is ``m x T`` and ``masks`` is ``T x m`` (zero-based rows).
    """
    cfg = config or SvtConfig()
    obs = np.asarray(observed, dtype=complex)
    masks = np.asarray(masks, dtype=np.intp)
    m, T = obs.shape
    if masks.shape != (T, m):
        raise DimMismatch("masks must be T x m to match the observations")
    if masks.size and (masks.min() < 0 or masks.max() >= M):
        raise DimMismatch("mask index outside the array")

    cols = np.broadcast_to(np.arange(T)[:, None], masks.shape)
    omega = np.zeros((M, T), dtype=bool)
    omega[masks, cols] = True
    data = np.zeros((M, T), dtype=complex)
    data[masks, cols] = obs.T

    tau = 5.0 * math.sqrt(M * T) if cfg.tau is None else cfg.tau
    delta = 1.2 * M * T / omega.sum() if cfg.delta is None else cfg.delta
    norm_obs = float(np.linalg.norm(data))
    X = np.zeros((M, T), dtype=complex)
    if norm_obs == 0.0:
        return SvtResult(X, 0, 0.0) if return_info else X

    Y = np.zeros((M, T), dtype=complex)
    rel = math.inf
    k = 0
    for k in range(1, cfg.max_iters + 1):
        X = singular_value_shrink(Y, tau)
        resid = np.where(omega, data - X, 0.0)
        rel = float(np.linalg.norm(resid)) / norm_obs
        if rel <= cfg.tol:
            break
        Y += delta * resid
    return SvtResult(X, k, rel) if return_info else X


def svt_complete_batch(batch: SketchBatch, config: SvtConfig | None = None, return_info=False):
    if batch.kind is not OperatorKind.BINARY:
        raise UnsupportedOperator("SVT needs antenna-selection observations")
    return svt_complete(batch.X, batch.index_array(), batch.M, config, return_info)


def svt_subspace(completed: np.ndarray) -> np.ndarray:
    """``(1/T) X X^H`` of the completed matrix."""
    X = np.asarray(completed)
    S = X @ X.conj().T / X.shape[1]
    return 0.5 * (S + S.conj().T)
