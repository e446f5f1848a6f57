"""Diagonal-covariance program used as an independent check of the solver.

For a fixed antenna-selection operator, the row-sparse program is equivalent
to

    minimise_{p >= 0}  tr((Gc diag(p) Gc^H + I)^{-1} C) + sum(p),

with ``Gc = B A / sqrt(m)`` and ``C = X X^H / T``, and the minimisers are
related through ``p_i = ||W_i|| / sqrt(T)``.  The program is convex in ``p``
and small, so plain projected gradient with Armijo backtracking is enough.
It is deliberately restricted to toy sizes.
"""

from __future__ import annotations

import math

import numpy as np

from .array_model import AngularGrid
from .channel import OperatorKind, SketchBatch
from .errors import ScaleTooLarge, UnsupportedOperator

MAX_M = 16
MAX_G = 32


def reduced_objective(p: np.ndarray, Gc: np.ndarray, C: np.ndarray) -> float:
    K = (Gc * p) @ Gc.conj().T + np.eye(Gc.shape[0])
    return float(np.trace(np.linalg.solve(K, C)).real + p.sum())


def reduced_gradient(p: np.ndarray, Gc: np.ndarray, C: np.ndarray) -> np.ndarray:
    K = (Gc * p) @ Gc.conj().T + np.eye(Gc.shape[0])
    Kinv_G = np.linalg.solve(K, Gc)  # m x G
    # d/dp_i tr(K^{-1} C) = -g_i^H K^{-1} C K^{-1} g_i
    quad = np.einsum("mi,mn,ni->i", Kinv_G.conj(), C, Kinv_G).real
    return 1.0 - quad


def reduced_program_oracle(batch: SketchBatch, grid: AngularGrid, max_iters: int = 5000,
                           tol: float = 1e-12) -> np.ndarray:
    """Solve the diagonal program for a time-invariant selection batch."""
    if grid.geometry.M > MAX_M or grid.G > MAX_G:
        raise ScaleTooLarge(f"oracle limited to M <= {MAX_M}, G <= {MAX_G}")
    if batch.kind is not OperatorKind.BINARY or not batch.is_time_invariant():
        raise UnsupportedOperator("oracle needs one fixed antenna-selection operator")
    m, T, G = batch.m, batch.T, grid.G
    Gc = grid.matrix[batch.operators[0].indices] / math.sqrt(m)
    C = batch.X @ batch.X.conj().T / T
    C = 0.5 * (C + C.conj().T)

    p = np.full(G, float(np.trace(C).real) / (m * G))
    f = reduced_objective(p, Gc, C)
    step = 1.0
    for _ in range(max_iters):
        g = reduced_gradient(p, Gc, C)
        while True:
            p_new = np.maximum(p - step * g, 0.0)
            d = p_new - p
            f_new = reduced_objective(p_new, Gc, C)
            if f_new <= f + g @ d + (0.5 / step) * (d @ d) or step < 1e-20:
                break
            step *= 0.5
        moved = np.linalg.norm(d)
        p, f = p_new, f_new
        if moved <= tol * max(1.0, np.linalg.norm(p)):
            break
        step *= 2.0  # let the step recover after backtracking
    return p
