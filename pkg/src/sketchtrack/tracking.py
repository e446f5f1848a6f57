"""Sliding-window subspace tracking.

The tracker keeps the latest ``T`` sketches in a ring buffer together with
the matching columns of ``W``.  Each push overwrites the oldest slot, zeroes
its coefficient column, and runs ``k_inner`` accelerated iterations starting
from the current ``W`` (momentum restarted at every push).  Until the window
is full, only the filled slots enter the objective, with ``zeta = sqrt(n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .array_model import AngularGrid
from .channel import OperatorKind, SamplingOperator
from .errors import DimMismatch, InvalidDim, InvalidQ
from .operators import DenseOperator, FFT2DOperator, FFTOperator
from .solver import POWER_ITER_MARGIN, Problem, covariance_weights, fista_steps, row_norms


@dataclass
class TrackerConfig:
    k_inner: int = 1

    def __post_init__(self):
        if self.k_inner < 1:
            raise InvalidDim("k_inner must be at least 1")


class SubspaceTracker:
    """Online estimator over a window of ``T`` sketches."""

    def __init__(self, T: int, grid: AngularGrid, config: TrackerConfig | None = None):
        if int(T) != T or T < 1:
            raise InvalidDim(f"window size must be a positive integer, got {T}")
        self.T = int(T)
        self.grid = grid
        self.config = config or TrackerConfig()
        self.G = grid.G
        self.m: int | None = None
        self.kind: OperatorKind | None = None
        self.count = 0
        self.pos = 0
        self.steps = 0
        self.W = np.zeros((self.G, self.T), dtype=complex)
        self.X: np.ndarray | None = None
        self.operators: list[SamplingOperator | None] = [None] * self.T

    # -- storage ---------------------------------------------------------------

    def _allocate(self, op: SamplingOperator):
        self.m, self.kind = op.m, op.kind
        self.X = np.zeros((self.m, self.T), dtype=complex)
        self._fft = self.grid.canonical and op.kind is OperatorKind.BINARY
        if self._fft:
            self._idx = np.zeros((self.T, self.m), dtype=np.intp)
        else:
            self._mats = np.zeros((self.T, self.m, self.G), dtype=complex)
            self._lam = np.zeros(self.T)

    def _store(self, j: int, x: np.ndarray, op: SamplingOperator):
        self.X[:, j] = x
        self.W[:, j] = 0.0
        self.operators[j] = op
        if self._fft:
            self._idx[j] = op.indices
        else:
            Gt = op.effective() @ self.grid.matrix / math.sqrt(self.m)
            self._mats[j] = Gt
            self._lam[j] = np.linalg.eigvalsh(Gt @ Gt.conj().T)[-1]

    def problem(self) -> Problem:
        """Objective over the filled part of the window."""
        n = self.count
        if self._fft:
            cls = FFTOperator if self.grid.geometry.is_ula else FFT2DOperator
            op = cls(self.grid, self._idx[:n])
        else:
            op = DenseOperator(self._mats[:n])
        return Problem(op, self.X[:, :n])

    def beta(self, problem: Problem) -> float:
        if self._fft:
            return problem.G / (problem.m * problem.zeta)
        return POWER_ITER_MARGIN * float(self._lam[: self.count].max()) / problem.zeta

    # -- public ----------------------------------------------------------------

    def push(self, sketch, op: SamplingOperator) -> np.ndarray:
        """Insert a sketch, update ``W`` and return the covariance weights."""
        x = np.asarray(sketch, dtype=complex).ravel()
        if self.m is None:
            self._allocate(op)
        if op.m != self.m or x.size != self.m or op.kind is not self.kind:
            raise DimMismatch("sketch/operator do not match the tracker's stream")
        if op.M != self.grid.geometry.M:
            raise DimMismatch("operator array size differs from the grid")
        self._store(self.pos, x, op)
        self.pos = (self.pos + 1) % self.T
        self.count = min(self.count + 1, self.T)
        self.steps += 1

        n = self.count
        prob = self.problem()
        W, _, _ = fista_steps(prob, self.W[:, :n], self.beta(prob), self.config.k_inner)
        self.W[:, :n] = W
        return self.weights()

    def weights(self) -> np.ndarray:
        if self.count == 0:
            return np.zeros(self.G)
        return covariance_weights(self.W[:, : self.count], self.m, self.count)

    def kkt_residual(self) -> float:
        if self.count == 0:
            return 0.0
        return self.problem().kkt_residual(self.W[:, : self.count])

    def window(self):
        """``(X, operators)`` of the filled slots, in slot order."""
        n = self.count
        return self.X[:, :n].copy(), list(self.operators[:n])


def tracker_init(T: int, grid: AngularGrid, config: TrackerConfig | None = None) -> SubspaceTracker:
    return SubspaceTracker(T, grid, config)


def tracker_push(state: SubspaceTracker, sketch, operator: SamplingOperator):
    weights = state.push(sketch, operator)
    return state, weights


def dominant_support(W: np.ndarray, q: int):
    """Indices of the ``q`` strongest rows (descending, ties by index) and all strengths."""
    G = W.shape[0]
    if int(q) != q or not 1 <= q <= G:
        raise InvalidQ(f"q must lie in [1, {G}], got {q}")
    strengths = row_norms(W) ** 2
    order = np.argsort(-strengths, kind="stable")
    return order[: int(q)], strengths


def recovery_time(gammas: np.ndarray, t_tr: int, steady: int = 50,
                  fraction: float = 0.8) -> int | None:
    """Steps after ``t_tr`` until gamma regains ``fraction`` of its pre-switch median.

    ``gammas[i]`` is the metric at step ``i + 1``; the reference median is
    taken over the ``steady`` steps before the switch.  Returns ``None`` if the
    level is never reached.
    """
    g = np.asarray(gammas, dtype=float)
    pre = g[max(0, t_tr - 1 - steady): t_tr - 1]
    if pre.size == 0:
        return None
    level = fraction * float(np.median(pre))
    after = np.nonzero(g[t_tr - 1:] >= level)[0]
    return int(after[0]) if after.size else None


def band_rows(grid: AngularGrid, theta_lo: float, theta_hi: float, slack: int = 0) -> np.ndarray:
    """ULA grid rows whose angle lies in ``[theta_lo, theta_hi]``, widened by ``slack`` rows."""
    a = np.asarray(grid.angles)
    inside = np.nonzero((a >= theta_lo) & (a <= theta_hi))[0]
    if inside.size == 0:
        inside = np.array([int(np.argmin(np.abs(a - 0.5 * (theta_lo + theta_hi))))])
    lo = max(0, int(inside.min()) - slack)
    hi = min(grid.G - 1, int(inside.max()) + slack)
    return np.arange(lo, hi + 1)


def support_in_rows(support, rows) -> bool:
    """True when every index of ``support`` is one of ``rows``."""
    return bool(np.isin(np.asarray(support), np.asarray(rows)).all())
