"""Per-slot sensing maps ``W -> [G_t W[:, t]]_t`` and their adjoints.

Each slot ``t`` has a normalised dictionary ``G_t = B_t A / sqrt(m)`` where
``A`` is the ``M x G`` grid response matrix.  Three implementations share the
same ``forward``/``adjoint`` surface:

``FFTOperator``
    Canonical ULA grid with antenna selection.  Using zero-based antenna
    index ``k`` and grid index ``i``, ``[A w]_k = (-1)**k * G * ifft(w)[k]``;
    the adjoint is a zero-embedded, sign-modulated forward FFT.
``FFT2DOperator``
    Canonical planar grid with antenna selection (2-D transforms plus a
    per-column phase from the centred element positions).
``DenseOperator``
    Anything else: stores the ``T x m x G`` stack of ``G_t`` explicitly.
"""

from __future__ import annotations

import math

import numpy as np

from .array_model import AngularGrid
from .channel import OperatorKind, SketchBatch
from .errors import DimMismatch, NonCanonicalGrid


def _check_mask(mask, M):
    mask = np.asarray(mask, dtype=np.intp)
    if mask.size and (mask.min() < 0 or mask.max() >= M):
        raise DimMismatch("mask index outside the array")
    return mask


def fft_forward(w: np.ndarray, mask, grid: AngularGrid) -> np.ndarray:
    """``(1/sqrt(m)) (A w)[mask]`` for a single grid-domain vector ``w``."""
    if not grid.canonical or not grid.geometry.is_ula:
        raise NonCanonicalGrid("the 1-D FFT path needs a canonical ULA grid")
    mask = _check_mask(mask, grid.geometry.M)
    w = np.asarray(w)
    if w.shape != (grid.G,):
        raise DimMismatch(f"expected a vector of length {grid.G}")
    op = FFTOperator(grid, mask[None, :])
    return op.forward(w[:, None])[:, 0]


def fft_adjoint(r: np.ndarray, mask, grid: AngularGrid) -> np.ndarray:
    """``(1/sqrt(m)) A^H E_mask r`` where ``E_mask`` zero-embeds into ``C^M``."""
    if not grid.canonical or not grid.geometry.is_ula:
        raise NonCanonicalGrid("the 1-D FFT path needs a canonical ULA grid")
    mask = _check_mask(mask, grid.geometry.M)
    r = np.asarray(r)
    if r.shape != (mask.size,):
        raise DimMismatch("residual length must equal the mask size")
    op = FFTOperator(grid, mask[None, :])
    return op.adjoint(r[:, None])[:, 0]


class FFTOperator:
    path = "fft"

    def __init__(self, grid: AngularGrid, indices: np.ndarray):
        if not grid.canonical or not grid.geometry.is_ula:
            raise NonCanonicalGrid("the 1-D FFT path needs a canonical ULA grid")
        self.G = grid.G
        self.M = grid.geometry.M
        self.idx = np.asarray(indices, dtype=np.intp)
        self.T, self.m = self.idx.shape
        self._rows = self.idx.T  # m x T
        self._sign = np.where(self._rows % 2 == 0, 1.0, -1.0)
        self._scale = 1.0 / math.sqrt(self.m)

    def forward(self, W: np.ndarray) -> np.ndarray:
        full = np.fft.ifft(W, axis=0) * self.G
        return np.take_along_axis(full, self._rows, axis=0) * (self._sign * self._scale)

    def adjoint(self, R: np.ndarray) -> np.ndarray:
        emb = np.zeros((self.G, R.shape[1]), dtype=complex)
        np.put_along_axis(emb, self._rows, R * (self._sign * self._scale), axis=0)
        return np.fft.fft(emb, axis=0)


class FFT2DOperator:
    path = "fft2d"

    def __init__(self, grid: AngularGrid, indices: np.ndarray):
        geom = grid.geometry
        if not grid.canonical or geom.is_ula or grid.shape is None:
            raise NonCanonicalGrid("the 2-D FFT path needs a canonical planar grid")
        self.Gx, self.Gy = grid.shape
        self.Mx, self.My = geom.Mx, geom.My
        self.G, self.M = grid.G, geom.M
        self.idx = np.asarray(indices, dtype=np.intp)
        self.T, self.m = self.idx.shape
        self._rows = self.idx.T
        x0, y0 = np.divmod(self._rows, self.My)
        self._sign = np.where((x0 + y0) % 2 == 0, 1.0, -1.0)
        self._scale = 1.0 / math.sqrt(self.m)
        ux = -1.0 + 2.0 * np.arange(self.Gx) / self.Gx
        uy = -1.0 + 2.0 * np.arange(self.Gy) / self.Gy
        # column phase from the centred element offsets
        cx = np.exp(-1j * np.pi * (self.Mx - 1) / 2.0 * ux)
        cy = np.exp(-1j * np.pi * (self.My - 1) / 2.0 * uy)
        self._col = np.outer(cx, cy)[:, :, None]

    def forward(self, W: np.ndarray) -> np.ndarray:
        T = W.shape[1]
        Wg = W.reshape(self.Gx, self.Gy, T) * self._col
        full = np.fft.ifft2(Wg, axes=(0, 1)) * self.G
        arr = full[: self.Mx, : self.My, :].reshape(self.M, T)
        return np.take_along_axis(arr, self._rows, axis=0) * (self._sign * self._scale)

    def adjoint(self, R: np.ndarray) -> np.ndarray:
        T = R.shape[1]
        emb = np.zeros((self.Gx, self.Gy, T), dtype=complex)
        flat = np.zeros((self.M, T), dtype=complex)
        np.put_along_axis(flat, self._rows, R * (self._sign * self._scale), axis=0)
        emb[: self.Mx, : self.My, :] = flat.reshape(self.Mx, self.My, T)
        out = np.fft.fft2(emb, axes=(0, 1)) * self._col.conj()
        return out.reshape(self.G, T)


class DenseOperator:
    path = "dense"

    def __init__(self, mats: np.ndarray):
        """``mats`` is the ``T x m x G`` stack of normalised dictionaries."""
        self.mats = np.asarray(mats, dtype=complex)
        self.T, self.m, self.G = self.mats.shape
        self._mats_h = np.conj(np.swapaxes(self.mats, 1, 2))

    @classmethod
    def from_batch(cls, batch: SketchBatch, grid: AngularGrid) -> "DenseOperator":
        return cls(dense_stack(batch, grid))

    def forward(self, W: np.ndarray) -> np.ndarray:
        return np.matmul(self.mats, W.T[:, :, None])[:, :, 0].T

    def adjoint(self, R: np.ndarray) -> np.ndarray:
        return np.matmul(self._mats_h, R.T[:, :, None])[:, :, 0].T


def dense_stack(batch: SketchBatch, grid: AngularGrid) -> np.ndarray:
    """``T x m x G`` stack of ``B_eff(t) A / sqrt(m)``."""
    A = grid.matrix
    scale = 1.0 / math.sqrt(batch.m)
    if batch.kind is OperatorKind.BINARY:
        return A[batch.index_array()] * scale
    return np.matmul(batch.effective_stack(), A) * scale


def fft_eligible(batch: SketchBatch, grid: AngularGrid) -> bool:
    return grid.canonical and batch.kind is OperatorKind.BINARY


def make_operator(batch: SketchBatch, grid: AngularGrid, path: str = "auto"):
    """Build the sensing map for ``batch`` on ``grid``.

    ``path`` is ``"auto"`` (FFT when eligible), ``"fft"`` or ``"dense"``.
    """
    if batch.M != grid.geometry.M:
        raise DimMismatch(f"batch is for M={batch.M}, grid for M={grid.geometry.M}")
    if path not in ("auto", "fft", "dense"):
        raise ValueError(f"unknown operator path {path!r}")
    if path == "dense" or (path == "auto" and not fft_eligible(batch, grid)):
        return DenseOperator.from_batch(batch, grid)
    if not fft_eligible(batch, grid):
        raise NonCanonicalGrid("FFT path needs a canonical grid and antenna selection")
    if grid.geometry.is_ula:
        return FFTOperator(grid, batch.index_array())
    return FFT2DOperator(grid, batch.index_array())
