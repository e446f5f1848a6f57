"""Channel snapshots, sampling operators and noisy sketches.

Random draws always go through a caller-supplied ``numpy.random.Generator``.
For batch simulation the consumption order is fixed: first the ``T`` sampling
operators (slot by slot), then the path gains (``L x T``), then the array
noise (``M x T``).  This keeps a run reproducible from its seed alone.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .array_model import ArrayGeometry, steering
from .errors import (
    AngleOutOfRange,
    DimMismatch,
    EmptyProfile,
    FormatError,
    InvalidDim,
    OutputUnwritable,
)


def complex_normal(rng: np.random.Generator, shape, scale=1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian with ``E|z|^2 = scale**2``."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) * (np.asarray(scale) / math.sqrt(2.0))


@dataclass(frozen=True, eq=False)
class ScatteringProfile:
    """Discrete scatterers: AoAs (radians, or unit 3-vectors) and powers."""

    angles: np.ndarray
    powers: np.ndarray

    def __post_init__(self):
        ang = np.asarray(self.angles, dtype=float)
        pw = np.asarray(self.powers, dtype=float).ravel()
        if pw.size == 0:
            raise EmptyProfile("scattering profile has no components")
        if ang.shape[0] != pw.size:
            raise DimMismatch("angles and powers must have the same length")
        if np.any(pw < 0) or not np.all(np.isfinite(pw)):
            raise ValueError("scatterer powers must be finite and nonnegative")
        object.__setattr__(self, "angles", ang)
        object.__setattr__(self, "powers", pw)

    @classmethod
    def discrete(cls, angles, powers) -> "ScatteringProfile":
        return cls(np.atleast_1d(np.asarray(angles, dtype=float)),
                   np.atleast_1d(np.asarray(powers, dtype=float)))

    @classmethod
    def uniform_band(cls, theta_lo: float, theta_hi: float, total_power: float = 1.0,
                     n_points: int = 100) -> "ScatteringProfile":
        """Power spread uniformly over ``[theta_lo, theta_hi]`` (radians).

        The band is represented by ``n_points`` equispaced point scatterers
        of power ``total_power / n_points``.
        """
        if n_points < 1:
            raise EmptyProfile("a band needs at least one point")
        if theta_hi < theta_lo:
            raise ValueError("band edges are reversed")
        angles = np.linspace(theta_lo, theta_hi, n_points)
        return cls(angles, np.full(n_points, total_power / n_points))

    @property
    def total_power(self) -> float:
        return float(self.powers.sum())

    def check_range(self, geometry: ArrayGeometry) -> None:
        if geometry.is_ula and np.any(np.abs(self.angles) > geometry.theta_max * (1 + 1e-12)):
            raise AngleOutOfRange("scatterer outside the served angular range")


def true_covariance(profile: ScatteringProfile, geometry: ArrayGeometry) -> np.ndarray:
    """``S = sum_l sigma_l^2 a(theta_l) a(theta_l)^H``."""
    profile.check_range(geometry)
    A = steering(geometry, profile.angles)
    S = (A * profile.powers) @ A.conj().T
    return 0.5 * (S + S.conj().T)


def sample_channel(profile: ScatteringProfile, geometry: ArrayGeometry,
                   rng: np.random.Generator) -> np.ndarray:
    """One channel snapshot ``h = sum_l w_l a(theta_l)``."""
    return sample_channels(profile, geometry, 1, rng)[:, 0]


def sample_channels(profile: ScatteringProfile, geometry: ArrayGeometry, T: int,
                    rng: np.random.Generator) -> np.ndarray:
    """``T`` i.i.d. snapshots as an ``M x T`` matrix."""
    profile.check_range(geometry)
    A = steering(geometry, profile.angles)
    w = complex_normal(rng, (profile.powers.size, T), np.sqrt(profile.powers)[:, None])
    return A @ w


class OperatorKind(str, enum.Enum):
    BINARY = "binary"
    PHASE = "phase"


@dataclass(frozen=True, eq=False)
class SamplingOperator:
    """Per-slot ``m x M`` projection.

    ``BINARY`` operators store the sorted zero-based antenna indices;
    ``PHASE`` operators store the raw matrix with entries
    ``exp(j theta) / sqrt(M)``.
    """

    kind: OperatorKind
    M: int
    slot: int = 0
    indices: np.ndarray | None = None
    matrix: np.ndarray | None = None
    bits: int = 0

    @property
    def m(self) -> int:
        return int(self.indices.size if self.kind is OperatorKind.BINARY else self.matrix.shape[0])

    def dense(self) -> np.ndarray:
        if self.kind is OperatorKind.BINARY:
            B = np.zeros((self.m, self.M))
            B[np.arange(self.m), self.indices] = 1.0
            return B
        return self.matrix

    @cached_property
    def whitener(self) -> np.ndarray:
        """``(B B^H)^{-1/2}``; identity for antenna selection."""
        if self.kind is OperatorKind.BINARY:
            return np.eye(self.m)
        BBh = self.matrix @ self.matrix.conj().T
        lam, V = np.linalg.eigh(0.5 * (BBh + BBh.conj().T))
        if lam.min() <= 1e-12 * lam.max():
            raise InvalidDim("phase-shift operator is rank deficient")
        return (V / np.sqrt(lam)) @ V.conj().T

    def effective(self) -> np.ndarray:
        """Operator seen by the solver after noise whitening (orthonormal rows)."""
        if self.kind is OperatorKind.BINARY:
            return self.dense()
        return self.whitener @ self.matrix

    def same_as(self, other: "SamplingOperator") -> bool:
        if self.kind is not other.kind or self.M != other.M:
            return False
        if self.kind is OperatorKind.BINARY:
            return np.array_equal(self.indices, other.indices)
        return np.array_equal(self.matrix, other.matrix)


def draw_selection(m: int, M: int, rng: np.random.Generator, slot: int = 0) -> SamplingOperator:
    """Uniformly random ``m``-subset of the ``M`` antennas (sorted)."""
    if not 1 <= m <= M:
        raise InvalidDim(f"need 1 <= m <= M, got m={m}, M={M}")
    idx = np.sort(rng.choice(M, size=m, replace=False))
    idx.setflags(write=False)
    return SamplingOperator(OperatorKind.BINARY, M, slot, indices=idx)


def draw_phase_shift(m: int, M: int, bits: int, rng: np.random.Generator,
                     slot: int = 0) -> SamplingOperator:
    """Random ``m x M`` phase-shift matrix quantised to ``2**bits`` phases."""
    if m < 1 or M < 1 or bits < 1:
        raise InvalidDim("need m >= 1, M >= 1 and bits >= 1")
    levels = 1 << bits
    k = rng.integers(0, levels, size=(m, M))
    mat = np.exp(2j * np.pi * k / levels) / math.sqrt(M)
    mat.setflags(write=False)
    return SamplingOperator(OperatorKind.PHASE, M, slot, matrix=mat, bits=bits)


def draw_operator(kind, m: int, M: int, rng: np.random.Generator, bits: int = 5,
                  slot: int = 0) -> SamplingOperator:
    kind = OperatorKind(kind)
    if kind is OperatorKind.BINARY:
        return draw_selection(m, M, rng, slot)
    return draw_phase_shift(m, M, bits, rng, slot)


def make_sketch(h: np.ndarray, op: SamplingOperator, sigma: float,
                rng: np.random.Generator | None = None, noiseless: bool = False) -> np.ndarray:
    """Noise-normalised sketch ``x = W (B h + B n) / sigma``.

    ``n`` is white array noise of variance ``sigma**2`` and ``W`` whitens the
    projected noise (the identity for antenna selection).  With
    ``noiseless=True`` the noise draw is skipped but the ``1/sigma`` scaling is
    kept.
    """
    h = np.asarray(h)
    if h.shape != (op.M,):
        raise DimMismatch(f"channel has shape {h.shape}, operator expects ({op.M},)")
    if sigma <= 0:
        raise ValueError("noise standard deviation must be positive")
    y = h.astype(complex)
    if not noiseless:
        y = y + complex_normal(rng, op.M, sigma)
    return _project(op, y) / sigma


def _project(op: SamplingOperator, y: np.ndarray) -> np.ndarray:
    if op.kind is OperatorKind.BINARY:
        return y[op.indices]
    return op.whitener @ (op.matrix @ y)


@dataclass(eq=False)
class SketchBatch:
    """``m x T`` noise-normalised sketches with their per-slot operators."""

    X: np.ndarray
    operators: list[SamplingOperator]
    noise_sigma: float = 1.0
    M: int = field(default=0)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=complex)
        if self.X.ndim != 2:
            raise DimMismatch("sketch matrix must be 2-D")
        if len(self.operators) != self.X.shape[1]:
            raise DimMismatch("one operator per sketch column is required")
        if not self.operators:
            raise InvalidDim("a batch needs at least one slot")
        k0, m0, M0 = self.operators[0].kind, self.operators[0].m, self.operators[0].M
        for op in self.operators:
            if op.kind is not k0 or op.m != m0 or op.M != M0:
                raise DimMismatch("operators must share kind, m and M")
        if m0 != self.X.shape[0]:
            raise DimMismatch("sketch length differs from operator rows")
        self.M = M0

    @property
    def m(self) -> int:
        return int(self.X.shape[0])

    @property
    def T(self) -> int:
        return int(self.X.shape[1])

    @property
    def kind(self) -> OperatorKind:
        return self.operators[0].kind

    @property
    def bits(self) -> int:
        return self.operators[0].bits

    def index_array(self) -> np.ndarray:
        """``T x m`` antenna indices (binary batches only)."""
        if self.kind is not OperatorKind.BINARY:
            raise ValueError("index array is defined for antenna selection only")
        return np.stack([op.indices for op in self.operators]).astype(np.intp)

    def effective_stack(self) -> np.ndarray:
        """``T x m x M`` whitened operators."""
        return np.stack([op.effective() for op in self.operators])

    def is_time_invariant(self) -> bool:
        first = self.operators[0]
        return all(first.same_as(op) for op in self.operators[1:])

    def columns(self, cols) -> "SketchBatch":
        cols = list(range(self.T))[cols] if isinstance(cols, slice) else list(cols)
        return SketchBatch(self.X[:, cols], [self.operators[c] for c in cols],
                           self.noise_sigma)


def simulate_batch(profile: ScatteringProfile, geometry: ArrayGeometry, T: int, m: int,
                   sigma: float, rng: np.random.Generator, sampler="binary", bits: int = 5,
                   fixed_operator: bool = False, noiseless: bool = False):
    """Draw ``T`` slots of sketches; returns ``(batch, H)`` with ``H`` the true channels.

    With ``fixed_operator`` the first operator is reused in every slot.
    """
    M = geometry.M
    if fixed_operator:
        op0 = draw_operator(sampler, m, M, rng, bits)
        ops = [SamplingOperator(op0.kind, M, t, op0.indices, op0.matrix, op0.bits)
               for t in range(T)]
    else:
        ops = [draw_operator(sampler, m, M, rng, bits, slot=t) for t in range(T)]
    H = sample_channels(profile, geometry, T, rng)
    Y = H if noiseless else H + complex_normal(rng, (M, T), sigma)
    X = np.empty((m, T), dtype=complex)
    for t, op in enumerate(ops):
        X[:, t] = _project(op, Y[:, t])
    X /= sigma
    return SketchBatch(X, ops, sigma), H


def snr_to_sigma(snr_db: float, total_power: float = 1.0) -> float:
    """Noise std for a training SNR ``E||h||^2 / E||n||^2 = P / sigma^2``."""
    return math.sqrt(total_power / 10.0 ** (snr_db / 10.0))


# --- binary sketch file -------------------------------------------------------
#
# little-endian; header: magic "SKCH", u16 version, u8 kind (0 binary / 1 phase),
# u8 bits, u32 m, u32 M, u32 T, f64 sigma.  Operators follow: binary -> T*m
# int32 indices (slot-major); phase -> T matrices m x M, complex interleaved
# f64, column-major.  Then X, m x T, column-major complex interleaved f64.

_MAGIC = b"SKCH"
_MAT_MAGIC = b"CMAT"
_VERSION = 1
_HEADER = struct.Struct("<4sHBBIIId")
_MAT_HEADER = struct.Struct("<4sHII")


def _complex_bytes(A: np.ndarray) -> bytes:
    return np.asarray(A, dtype="<c16").ravel(order="F").tobytes()


def _complex_from(buf: bytes, offset: int, shape) -> tuple[np.ndarray, int]:
    n = int(np.prod(shape))
    arr = np.frombuffer(buf, dtype="<c16", count=n, offset=offset)
    return arr.reshape(shape, order="F").astype(complex), offset + 16 * n


def _read(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from None


def _write(path, data: bytes) -> None:
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise OutputUnwritable(f"cannot write {path}: {exc}") from None


def write_batch(path, batch: SketchBatch) -> None:
    kind = 0 if batch.kind is OperatorKind.BINARY else 1
    parts = [_HEADER.pack(_MAGIC, _VERSION, kind, batch.bits, batch.m, batch.M, batch.T,
                          float(batch.noise_sigma))]
    if kind == 0:
        parts.append(batch.index_array().astype("<i4").tobytes())
    else:
        parts.extend(_complex_bytes(op.matrix) for op in batch.operators)
    parts.append(_complex_bytes(batch.X))
    _write(path, b"".join(parts))


def read_batch(path) -> SketchBatch:
    buf = _read(path)
    if len(buf) < _HEADER.size:
        raise FormatError("file too short for a sketch header")
    magic, version, kind, bits, m, M, T, sigma = _HEADER.unpack_from(buf, 0)
    if magic != _MAGIC or version != _VERSION:
        raise FormatError("not a sketch batch file (bad magic or version)")
    off = _HEADER.size
    ops = []
    try:
        if kind == 0:
            idx = np.frombuffer(buf, dtype="<i4", count=T * m, offset=off).reshape(T, m)
            off += 4 * T * m
            for t in range(T):
                ii = idx[t].astype(np.intp)
                ii.setflags(write=False)
                ops.append(SamplingOperator(OperatorKind.BINARY, M, t, indices=ii))
        elif kind == 1:
            for t in range(T):
                mat, off = _complex_from(buf, off, (m, M))
                mat.setflags(write=False)
                ops.append(SamplingOperator(OperatorKind.PHASE, M, t, matrix=mat, bits=bits))
        else:
            raise FormatError(f"unknown operator kind {kind}")
        X, off = _complex_from(buf, off, (m, T))
    except ValueError as exc:
        raise FormatError(f"truncated sketch file: {exc}") from exc
    return SketchBatch(X, ops, sigma)


def write_matrix(path, A: np.ndarray) -> None:
    """Complex matrix file: magic "CMAT", u16 version, u32 rows, u32 cols, data."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    _write(path, _MAT_HEADER.pack(_MAT_MAGIC, _VERSION, *A.shape) + _complex_bytes(A))


def read_matrix(path) -> np.ndarray:
    buf = _read(path)
    if len(buf) < _MAT_HEADER.size:
        raise FormatError("file too short for a matrix header")
    magic, version, rows, cols = _MAT_HEADER.unpack_from(buf, 0)
    if magic != _MAT_MAGIC or version != _VERSION:
        raise FormatError("not a matrix file")
    try:
        A, _ = _complex_from(buf, _MAT_HEADER.size, (rows, cols))
    except ValueError as exc:
        raise FormatError(f"truncated matrix file: {exc}") from exc
    return A
