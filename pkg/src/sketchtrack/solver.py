r"""Row-sparse least squares over an angular dictionary.

The estimator minimises

.. math::

    f(W) = \frac{1}{2\zeta} \sum_t \|\check G_t W_{:,t} - X_{:,t}\|^2
           + \sum_i \|W_{i,:}\|, \qquad \zeta = \sqrt{T},

over the ``G x T`` coefficient matrix ``W``.  ``run_fbs`` is the relaxed
forward-backward iteration and ``run_fista`` its Nesterov-accelerated variant.
The row norms of the minimiser give the covariance weights
``s_i = ||W_i|| / (m sqrt(T))``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .array_model import AngularGrid
from .channel import SketchBatch
from .errors import ConfigInvalid, DimMismatch, NonpositiveAlpha
from .operators import FFT2DOperator, FFTOperator, make_operator

ZERO_ROW_TOL = 1e-12
POWER_ITER_MARGIN = 1.01


class BetaMode(str, enum.Enum):
    AUTO = "auto"
    ANALYTIC = "analytic"
    POWER = "power"


@dataclass
class SolverConfig:
    """Iteration controls.

    ``step`` and ``relax`` only matter for :func:`run_fbs`; ``None`` means
    ``1/beta``.  When ``eps`` is set, the forward-backward ranges
    ``step in [eps, 2/beta - eps]`` and ``relax in [eps, 1]`` are enforced.
    """

    max_iters: int = 500
    rel_tol: float = 1e-6
    beta_mode: BetaMode = BetaMode.AUTO
    step: float | None = None
    relax: float = 1.0
    eps: float | None = None
    zeta: float | None = None
    path: str = "auto"
    track_objective: bool = True
    track_kkt: bool = False

    def __post_init__(self):
        self.beta_mode = BetaMode(self.beta_mode)
        if self.max_iters < 0:
            raise ConfigInvalid("max_iters must be nonnegative")
        if self.rel_tol < 0:
            raise ConfigInvalid("rel_tol must be nonnegative")
        if self.zeta is not None and self.zeta <= 0:
            raise ConfigInvalid("zeta must be positive")


@dataclass
class SolveResult:
    W: np.ndarray
    objective_trace: np.ndarray
    iters: int
    kkt_residual: float
    beta: float
    converged: bool = False
    kkt_trace: np.ndarray = field(default_factory=lambda: np.empty(0))


class Problem:
    """Sensing operator plus data for one solve (or one tracking window)."""

    def __init__(self, op, X: np.ndarray, zeta: float | None = None):
        X = np.asarray(X, dtype=complex)
        if X.shape != (op.m, op.T):
            raise DimMismatch(f"sketch matrix {X.shape} does not match operator ({op.m}, {op.T})")
        self.op = op
        self.X = X
        self.G = op.G
        self.m = op.m
        self.T = op.T
        self.zeta = math.sqrt(self.T) if zeta is None else float(zeta)

    @classmethod
    def from_batch(cls, batch: SketchBatch, grid: AngularGrid, path: str = "auto",
                   zeta: float | None = None) -> "Problem":
        return cls(make_operator(batch, grid, path), batch.X, zeta)

    def _check(self, W):
        if W.shape != (self.G, self.T):
            raise DimMismatch(f"W has shape {W.shape}, expected ({self.G}, {self.T})")

    def residual(self, W):
        return self.op.forward(W) - self.X

    def f1(self, W) -> float:
        self._check(W)
        r = self.residual(W)
        return float(np.vdot(r, r).real) / (2.0 * self.zeta)

    def objective(self, W) -> float:
        return self.f1(W) + l21_norm(W)

    def grad(self, W):
        self._check(W)
        return self.op.adjoint(self.residual(W)) / self.zeta

    @property
    def analytic_ok(self) -> bool:
        return isinstance(self.op, (FFTOperator, FFT2DOperator))

    def lipschitz(self, mode: BetaMode | str = BetaMode.AUTO) -> float:
        mode = BetaMode(mode)
        if mode is BetaMode.AUTO:
            mode = BetaMode.ANALYTIC if self.analytic_ok else BetaMode.POWER
        if mode is BetaMode.ANALYTIC:
            if not self.analytic_ok:
                raise ConfigInvalid("analytic Lipschitz constant needs antenna selection "
                                    "on a canonical grid")
            return self.G / (self.m * self.zeta)
        return power_iteration_lambda(self.op) / self.zeta

    def step_beta(self, mode: BetaMode | str = BetaMode.AUTO) -> float:
        """Lipschitz constant used for step sizes (power estimates get a margin)."""
        mode = BetaMode(mode)
        if mode is BetaMode.AUTO:
            mode = BetaMode.ANALYTIC if self.analytic_ok else BetaMode.POWER
        beta = self.lipschitz(mode)
        return beta * POWER_ITER_MARGIN if mode is BetaMode.POWER else beta

    def kkt_residual(self, W) -> float:
        g = self.grad(W)
        norms = row_norms(W)
        zero = norms < ZERO_ROW_TOL
        res = 0.0
        if zero.any():
            res = max(res, float(np.max(np.maximum(row_norms(g[zero]) - 1.0, 0.0))))
        if (~zero).any():
            nz = ~zero
            dev = g[nz] + W[nz] / norms[nz, None]
            res = max(res, float(np.max(row_norms(dev))))
        return res


def power_iteration_lambda(op, tol: float = 1e-10, max_iters: int = 5000) -> float:
    """``max_t lambda_max(G_t G_t^H)`` by per-slot power iteration."""
    rng = np.random.default_rng(0x5EED)
    V = rng.standard_normal((op.m, op.T)) + 1j * rng.standard_normal((op.m, op.T))
    V /= np.linalg.norm(V, axis=0)
    lam = np.zeros(op.T)
    for _ in range(max_iters):
        U = op.forward(op.adjoint(V))
        new = np.einsum("ij,ij->j", V.conj(), U).real
        nrm = np.linalg.norm(U, axis=0)
        nrm[nrm == 0] = 1.0
        V = U / nrm
        done = np.all(np.abs(new - lam) <= tol * np.maximum(np.abs(new), 1e-300))
        lam = new
        if done:
            break
    return float(lam.max())


def row_norms(W: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(W.real**2 + W.imag**2, axis=1))


def l21_norm(W: np.ndarray) -> float:
    return float(row_norms(W).sum())


def prox_l21(W: np.ndarray, alpha: float) -> np.ndarray:
    """Row-wise shrinkage: ``W_i <- (||W_i|| - alpha)_+ / ||W_i|| * W_i``."""
    if not alpha > 0:
        raise NonpositiveAlpha(f"shrinkage level must be positive, got {alpha}")
    n = row_norms(W)
    scale = np.zeros_like(n)
    keep = n > alpha
    scale[keep] = (n[keep] - alpha) / n[keep]
    return W * scale[:, None]


# --- module-level conveniences mirroring the Problem methods -----------------

def objective(W, batch: SketchBatch, grid: AngularGrid, path: str = "auto", zeta=None) -> float:
    return Problem.from_batch(batch, grid, path, zeta).objective(W)


def grad_f1(W, batch: SketchBatch, grid: AngularGrid, path: str = "auto", zeta=None):
    return Problem.from_batch(batch, grid, path, zeta).grad(W)


def lipschitz(batch: SketchBatch, grid: AngularGrid, mode="auto", zeta=None) -> float:
    return Problem.from_batch(batch, grid, "auto", zeta).lipschitz(mode)


def kkt_residual(W, batch: SketchBatch, grid: AngularGrid, path: str = "auto", zeta=None) -> float:
    return Problem.from_batch(batch, grid, path, zeta).kkt_residual(W)


# --- iterations ---------------------------------------------------------------

def _rel_change(delta: float, scale: float) -> float:
    if delta == 0.0:
        return 0.0
    return delta / scale if scale > 0 else math.inf


def _initial(problem: Problem, W0):
    if W0 is None:
        return np.zeros((problem.G, problem.T), dtype=complex)
    W0 = np.array(W0, dtype=complex)
    problem._check(W0)
    return W0


def run_fbs(batch_or_problem, grid: AngularGrid | None = None,
            config: SolverConfig | None = None, W0=None) -> SolveResult:
    """Relaxed forward-backward splitting with constant step and relaxation."""
    cfg = config or SolverConfig()
    problem = _as_problem(batch_or_problem, grid, cfg)
    beta = problem.step_beta(cfg.beta_mode)
    step = 1.0 / beta if cfg.step is None else float(cfg.step)
    relax = float(cfg.relax)
    if cfg.eps is not None:
        eps = float(cfg.eps)
        if not 0 < eps < min(1.0, 1.0 / beta):
            raise ConfigInvalid(f"eps must lie in (0, min(1, 1/beta)) = (0, {min(1, 1 / beta):.4g})")
        if not eps <= step <= 2.0 / beta - eps:
            raise ConfigInvalid("step size outside [eps, 2/beta - eps]")
        if not eps <= relax <= 1.0:
            raise ConfigInvalid("relaxation outside [eps, 1]")
    elif not (0 < step < 2.0 / beta and 0 < relax <= 1.0):
        raise ConfigInvalid("step must lie in (0, 2/beta) and relaxation in (0, 1]")

    W = _initial(problem, W0)
    trace, kkt = [], []
    converged = False
    k = 0
    for k in range(1, cfg.max_iters + 1):
        Z = W - step * problem.grad(W)
        W_new = W + relax * (prox_l21(Z, step) - W)
        change = _rel_change(float(np.linalg.norm(W_new - W)), float(np.linalg.norm(W_new)))
        W = W_new
        if cfg.track_objective:
            trace.append(problem.objective(W))
        if cfg.track_kkt:
            kkt.append(problem.kkt_residual(W))
        if change <= cfg.rel_tol:
            converged = True
            break
    return SolveResult(W, np.asarray(trace), k, problem.kkt_residual(W), beta, converged,
                       np.asarray(kkt))


def nesterov_next(t: float) -> float:
    """``t_{k+1} = (1 + sqrt(4 t_k^2 + 1)) / 2``."""
    return 0.5 * (1.0 + math.sqrt(4.0 * t * t + 1.0))


def fista_steps(problem: Problem, W: np.ndarray, beta: float, n_iters: int,
                rel_tol: float = 0.0, trace: list | None = None, kkt: list | None = None):
    """Run up to ``n_iters`` accelerated iterations from ``W`` with fresh momentum.

    Returns ``(W, iterations_run, converged)``.
    """
    step = 1.0 / beta
    Z = W
    t = 1.0
    for k in range(1, n_iters + 1):
        W_new = prox_l21(Z - step * problem.grad(Z), step)
        t_new = nesterov_next(t)
        a = 1.0 + (t - 1.0) / t_new
        Z = W + a * (W_new - W)
        change = _rel_change(float(np.linalg.norm(W_new - W)), float(np.linalg.norm(W_new)))
        W, t = W_new, t_new
        if trace is not None:
            trace.append(problem.objective(W))
        if kkt is not None:
            kkt.append(problem.kkt_residual(W))
        if change <= rel_tol:
            return W, k, True
    return W, n_iters, False


def run_fista(batch_or_problem, grid: AngularGrid | None = None,
              config: SolverConfig | None = None, W0=None) -> SolveResult:
    """Forward-backward splitting with Nesterov extrapolation, step ``1/beta``."""
    cfg = config or SolverConfig()
    problem = _as_problem(batch_or_problem, grid, cfg)
    beta = problem.step_beta(cfg.beta_mode)
    W = _initial(problem, W0)
    trace = [] if cfg.track_objective else None
    kkt = [] if cfg.track_kkt else None
    W, k, converged = fista_steps(problem, W, beta, cfg.max_iters, cfg.rel_tol, trace, kkt)
    return SolveResult(W, np.asarray(trace or []), k, problem.kkt_residual(W), beta,
                       converged, np.asarray(kkt or []))


def _as_problem(obj, grid, cfg: SolverConfig) -> Problem:
    if isinstance(obj, Problem):
        return obj
    if grid is None:
        raise ValueError("a grid is required when passing a SketchBatch")
    return Problem.from_batch(obj, grid, cfg.path, cfg.zeta)


# --- covariance reconstruction -----------------------------------------------

@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    """``S = A diag(weights) A^H`` kept in factored form."""

    grid: AngularGrid
    weights: np.ndarray

    def factor(self, support_only: bool = True) -> np.ndarray:
        """``A diag(sqrt(weights))``, optionally restricted to nonzero weights."""
        w = self.weights
        A = self.grid.matrix
        if support_only:
            nz = w > 0
            return A[:, nz] * np.sqrt(w[nz])
        return A * np.sqrt(w)

    def dense(self) -> np.ndarray:
        F = self.factor()
        S = F @ F.conj().T
        return 0.5 * (S + S.conj().T)


def covariance_weights(W: np.ndarray, m: int, T: int) -> np.ndarray:
    return row_norms(W) / (m * math.sqrt(T))


def reconstruct_covariance(W_star: np.ndarray, grid: AngularGrid, m: int, T: int) -> CovarianceEstimate:
    if W_star.shape[0] != grid.G:
        raise DimMismatch("coefficient rows must match the grid size")
    return CovarianceEstimate(grid, covariance_weights(W_star, m, T))
