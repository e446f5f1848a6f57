"""Fast numerical self-checks of the core invariants.

Each check returns a :class:`Check`; ``run_checks`` runs them all.  The sizes
are small so the whole suite finishes in a few seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .array_model import ArrayGeometry, build_grid, steering
from .channel import SketchBatch, draw_operator, true_covariance, ScatteringProfile
from .channel import simulate_batch, snr_to_sigma
from .metrics import captured_profile, eta, gamma, power_profile
from .operators import DenseOperator, make_operator
from .reduced import reduced_program_oracle
from .solver import (Problem, SolverConfig, prox_l21, row_norms, run_fbs, run_fista)
from .svt import singular_value_shrink


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def __post_init__(self):
        self.passed = bool(self.passed)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_instance(rng, M=16, G=32, m=4, T=8, sampler="binary", planar=None):
    """Random batch on a canonical grid with i.i.d. Gaussian sketches."""
    if planar:
        geom = ArrayGeometry.rect(*planar[0])
        grid = build_grid(geom, planar[1])
    else:
        geom = ArrayGeometry.ula(M)
        grid = build_grid(geom, G)
    ops = [draw_operator(sampler, m, geom.M, rng, slot=t) for t in range(T)]
    return SketchBatch(crandn(rng, m, T), ops, 1.0), grid


def random_unitary(rng, n):
    Q, R = np.linalg.qr(crandn(rng, n, n))
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_psd(rng, n, rank=None):
    F = crandn(rng, n, rank or n)
    S = F @ F.conj().T
    return 0.5 * (S + S.conj().T)


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def check_unit_modulus(rng) -> Check:
    g1 = ArrayGeometry.ula(16)
    a = steering(g1, rng.uniform(-g1.theta_max, g1.theta_max, 20))
    grid = build_grid(ArrayGeometry.rect(4, 4), (8, 8))
    dev = max(np.abs(np.abs(a) - 1).max(), np.abs(np.abs(grid.matrix) - 1).max())
    return Check("unit_modulus", dev <= 1e-12, f"max deviation {dev:.2e}")


def check_canonical_completeness(rng) -> Check:
    grid = build_grid(ArrayGeometry.ula(16), 32)
    A = grid.matrix
    err = _rel(A @ A.conj().T, 32 * np.eye(16))
    return Check("canonical_completeness", err <= 1e-9, f"relative error {err:.2e}")


def check_fft_dense(rng) -> Check:
    worst = 0.0
    for k in range(10):
        planar = [((4, 4), (8, 8))] if k % 5 == 4 else [None]
        batch, grid = random_instance(rng, m=4 + 4 * (k % 2), planar=planar[0])
        fast = Problem(make_operator(batch, grid, "fft"), batch.X)
        slow = Problem(DenseOperator.from_batch(batch, grid), batch.X)
        W = crandn(rng, grid.G, batch.T)
        worst = max(worst, _rel(fast.grad(W), slow.grad(W)))
    return Check("fft_dense_gradient", worst <= 1e-10, f"max relative error {worst:.2e}")


def check_adjoint(rng) -> Check:
    batch, grid = random_instance(rng)
    op = make_operator(batch, grid, "fft")
    W, R = crandn(rng, grid.G, batch.T), crandn(rng, batch.m, batch.T)
    lhs, rhs = np.vdot(R, op.forward(W)), np.vdot(op.adjoint(R), W)
    err = abs(lhs - rhs) / abs(lhs)
    return Check("adjoint_identity", err <= 1e-12, f"relative mismatch {err:.2e}")


def check_descent_lemma(rng) -> Check:
    worst = -math.inf
    for _ in range(50):
        batch, grid = random_instance(rng)
        p = Problem.from_batch(batch, grid)
        beta = p.lipschitz()
        W, V = crandn(rng, grid.G, batch.T), crandn(rng, grid.G, batch.T)
        bound = p.f1(V) + np.vdot(p.grad(V), W - V).real + 0.5 * beta * np.linalg.norm(W - V) ** 2
        worst = max(worst, p.f1(W) - bound)
    return Check("descent_lemma", worst <= 1e-9, f"max violation {worst:.2e}")


def check_prox_nonexpansive(rng) -> Check:
    worst = -math.inf
    for _ in range(50):
        U, V = crandn(rng, 6, 5), crandn(rng, 6, 5)
        a = rng.uniform(0.1, 3)
        worst = max(worst, np.linalg.norm(prox_l21(U, a) - prox_l21(V, a)) - np.linalg.norm(U - V))
    return Check("prox_nonexpansive", worst <= 1e-12, f"max excess {worst:.2e}")


def check_fbs_monotone(rng) -> Check:
    batch, grid = random_instance(rng, T=6)
    res = run_fbs(batch, grid, SolverConfig(max_iters=200, rel_tol=0))
    inc = float(np.max(np.diff(res.objective_trace)))
    return Check("fbs_monotone", inc <= 1e-12, f"largest increase {inc:.2e}")


def check_algorithm_agreement(rng) -> Check:
    worst = 0.0
    for _ in range(3):
        batch, grid = random_instance(rng, M=8, G=16, m=4, T=6)
        cfg = SolverConfig(max_iters=20000, rel_tol=1e-12)
        a = run_fbs(batch, grid, cfg).objective_trace[-1]
        b = run_fista(batch, grid, cfg).objective_trace[-1]
        worst = max(worst, abs(a - b) / abs(b))
    return Check("fbs_fista_agreement", worst <= 1e-6, f"max relative gap {worst:.2e}")


def check_kkt(rng) -> Check:
    batch, grid = random_instance(rng, T=6)
    res = run_fista(batch, grid, SolverConfig(max_iters=20000, rel_tol=1e-8))
    return Check("kkt_residual", res.kkt_residual <= 1e-3, f"residual {res.kkt_residual:.2e}")


def check_reduced_oracle(rng) -> Check:
    geom = ArrayGeometry.ula(8)
    grid = build_grid(geom, 16)
    prof = ScatteringProfile.discrete([grid.angles[5]], [1.0])
    batch, _ = simulate_batch(prof, geom, 200, 4, snr_to_sigma(20), rng, fixed_operator=True)
    p = reduced_program_oracle(batch, grid)
    res = run_fista(batch, grid, SolverConfig(max_iters=20000, rel_tol=1e-10,
                                              track_objective=False))
    err = _rel(row_norms(res.W) / math.sqrt(200), p)
    return Check("reduced_program_equivalence", err <= 0.05, f"relative error {err:.2e}")


def check_majorization(rng) -> Check:
    worst = -math.inf
    for _ in range(20):
        S = random_psd(rng, 6, rank=int(rng.integers(1, 7)))
        p = power_profile(S)
        ph = captured_profile(S, random_unitary(rng, 6))
        worst = max(worst, float(np.max(eta(ph) - eta(p))))
        g = gamma(p, ph)
        if not 0 <= g <= 1:
            return Check("majorization", False, f"gamma {g} outside [0, 1]")
    return Check("majorization", worst <= 1e-12, f"max prefix excess {worst:.2e}")


def check_svt_shrink(rng) -> Check:
    Y = crandn(rng, 8, 12)
    tau = 2.0
    sv = np.linalg.svd(Y, compute_uv=False)
    got = np.linalg.svd(singular_value_shrink(Y, tau), compute_uv=False)
    err = float(np.abs(got - np.maximum(sv - tau, 0)).max())
    return Check("svt_shrinkage", err <= 1e-10, f"max singular value error {err:.2e}")


def check_block_toeplitz(rng) -> Check:
    grid = build_grid(ArrayGeometry.rect(4, 4), (8, 8))
    s = rng.uniform(0, 1, grid.G)
    S = (grid.matrix * s) @ grid.matrix.conj().T
    B = S.reshape(4, 4, 4, 4).transpose(0, 2, 1, 3)  # B[x, x', y, y'], y fastest
    err = max(np.abs(B[1:, 1:] - B[:-1, :-1]).max(),              # blocks depend on x - x'
              np.abs(B[:, :, 1:, 1:] - B[:, :, :-1, :-1]).max(),  # each block Toeplitz
              np.abs(B - B.transpose(1, 0, 3, 2).conj()).max())   # B[x', x] = B[x, x']^H
    return Check("block_toeplitz", err <= 1e-9, f"max structure violation {err:.2e}")


def check_true_covariance(rng) -> Check:
    geom = ArrayGeometry.ula(8)
    S = true_covariance(ScatteringProfile.uniform_band(0.1, 0.5, n_points=7), geom)
    err = float(np.abs(S[1:, 1:] - S[:-1, :-1]).max())
    lam = np.linalg.eigvalsh(S)[0]
    ok = err <= 1e-10 and lam >= -1e-9 * np.trace(S).real
    return Check("covariance_toeplitz_psd", ok, f"toeplitz error {err:.2e}, min eig {lam:.2e}")


CHECKS = (check_unit_modulus, check_canonical_completeness, check_fft_dense, check_adjoint,
          check_descent_lemma, check_prox_nonexpansive, check_fbs_monotone,
          check_algorithm_agreement, check_kkt, check_reduced_oracle, check_majorization,
          check_svt_shrink, check_block_toeplitz, check_true_covariance)


def run_checks(seed: int = 0) -> list[Check]:
    out = []
    for i, fn in enumerate(CHECKS):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        try:
            out.append(fn(rng))
        except Exception as exc:  # a crash is a failed check, not a crashed suite
            out.append(Check(fn.__name__.removeprefix("check_"), False, f"error: {exc!r}"))
    return out
