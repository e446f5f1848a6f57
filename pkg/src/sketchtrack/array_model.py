"""Array geometries, steering vectors and angular grids.

Two array families are supported:

* ``ULA``: a uniform linear array of ``M`` elements whose spacing is tied to
  the served angular range, ``d = lambda / (2 sin(theta_max))``.  Element ``k``
  (zero-based) of the response at AoA ``theta`` is
  ``exp(j k pi sin(theta) / sin(theta_max))``.
* ``RECT2D``: an ``Mx x My`` planar lattice centred at the origin with
  normalised spacings ``dx_bar = dx / (lambda/2)`` and ``dy_bar``.  AoAs are
  unit 3-vectors and responses are flattened with the ``y`` index running
  fastest.

The canonical grids produced by :func:`build_grid` are the ones for which the
response matrix is an oversampled DFT matrix, which is what the FFT solver
path relies on.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    AngleOutOfRange,
    GridTooCoarse,
    InvalidDim,
    NotUnitVector,
    WrongGeometry,
)

_ANGLE_SLACK = 1e-12


class ArrayKind(str, enum.Enum):
    ULA = "ula"
    RECT2D = "rect2d"


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class ArrayGeometry:
    """Physical description of the receive array.

    Use :meth:`ula` or :meth:`rect` rather than the raw constructor.
    """

    kind: ArrayKind
    M: int
    theta_max: float | None = None
    spacing: float | None = None
    Mx: int | None = None
    My: int | None = None
    dx: float | None = None
    dy: float | None = None

    @classmethod
    def ula(cls, M: int, theta_max: float = math.pi / 3) -> "ArrayGeometry":
        if int(M) != M or M < 1:
            raise InvalidDim(f"antenna count must be a positive integer, got {M}")
        # theta_max = pi/2 is admitted (half-wavelength spacing)
        if not 0.0 < theta_max <= math.pi / 2:
            raise AngleOutOfRange(f"theta_max must lie in (0, pi/2], got {theta_max}")
        return cls(ArrayKind.ULA, int(M), theta_max=float(theta_max),
                   spacing=1.0 / math.sin(theta_max))

    @classmethod
    def rect(cls, Mx: int, My: int, dx: float = math.sqrt(2.0),
             dy: float = math.sqrt(2.0)) -> "ArrayGeometry":
        """Planar lattice; ``dx``/``dy`` are in units of half a wavelength."""
        for n in (Mx, My):
            if int(n) != n or n < 1:
                raise InvalidDim(f"lattice sizes must be positive integers, got {Mx}x{My}")
        if dx <= 0 or dy <= 0:
            raise InvalidDim("element spacings must be positive")
        return cls(ArrayKind.RECT2D, int(Mx) * int(My), Mx=int(Mx), My=int(My),
                   dx=float(dx), dy=float(dy))

    @property
    def is_ula(self) -> bool:
        return self.kind is ArrayKind.ULA

    def to_dict(self) -> dict:
        if self.is_ula:
            return {"kind": "ula", "M": self.M, "theta_max_deg": math.degrees(self.theta_max)}
        return {"kind": "rect2d", "Mx": self.Mx, "My": self.My, "dx": self.dx, "dy": self.dy}

    @classmethod
    def from_dict(cls, d: dict) -> "ArrayGeometry":
        kind = str(d.get("kind", "ula")).lower()
        if kind == "ula":
            return cls.ula(int(d["M"]), math.radians(float(d.get("theta_max_deg", 60.0))))
        if kind == "rect2d":
            return cls.rect(int(d["Mx"]), int(d["My"]), float(d.get("dx", math.sqrt(2))),
                            float(d.get("dy", math.sqrt(2))))
        raise WrongGeometry(f"unknown array kind {kind!r}")


def ula_response(geometry: ArrayGeometry, theta) -> np.ndarray:
    """Steering vector(s) of a ULA.

    ``theta`` may be a scalar (returns shape ``(M,)``) or a 1-D array of ``L``
    angles (returns ``(M, L)``).
    """
    if not geometry.is_ula:
        raise WrongGeometry("ula_response requires a ULA geometry")
    th = np.asarray(theta, dtype=float)
    if np.any(np.abs(th) > geometry.theta_max * (1 + _ANGLE_SLACK)):
        raise AngleOutOfRange(f"angle outside [-theta_max, theta_max] = "
                              f"+-{geometry.theta_max:.6g}")
    u = np.sin(th) / math.sin(geometry.theta_max)
    k = np.arange(geometry.M, dtype=float)
    return np.exp(1j * np.pi * np.multiply.outer(k, u))


def rect_response(geometry: ArrayGeometry, xi) -> np.ndarray:
    """Steering vector(s) of a planar lattice for unit direction(s) ``xi``.

    ``xi`` has shape ``(3,)`` or ``(L, 3)``; the output is ``(M,)`` or
    ``(M, L)`` with antenna ``(x, y)`` stored at ``x * My + y``.
    """
    if geometry.kind is not ArrayKind.RECT2D:
        raise WrongGeometry("rect_response requires a RECT2D geometry")
    v = np.asarray(xi, dtype=float)
    single = v.ndim == 1
    v = np.atleast_2d(v)
    if v.shape[-1] != 3:
        raise NotUnitVector("directions must be 3-vectors")
    if np.any(np.abs(np.linalg.norm(v, axis=1) - 1.0) > 1e-9):
        raise NotUnitVector("direction vectors must have unit norm")
    ox = np.arange(geometry.Mx) - (geometry.Mx - 1) / 2.0
    oy = np.arange(geometry.My) - (geometry.My - 1) / 2.0
    # (2 pi / lambda) <xi, r> with r measured in half-wavelengths -> pi * dbar * offset * xi
    px = np.pi * geometry.dx * np.multiply.outer(ox, v[:, 0])  # Mx x L
    py = np.pi * geometry.dy * np.multiply.outer(oy, v[:, 1])  # My x L
    phase = px[:, None, :] + py[None, :, :]
    out = np.exp(1j * phase).reshape(geometry.M, -1)
    return out[:, 0] if single else out


def steering(geometry: ArrayGeometry, angles) -> np.ndarray:
    """Dispatch to the response function for ``geometry``; returns ``M x L``."""
    if geometry.is_ula:
        return ula_response(geometry, np.atleast_1d(angles))
    return rect_response(geometry, np.atleast_2d(angles))


@dataclass(frozen=True, eq=False)
class AngularGrid:
    """A discrete AoA dictionary.

    ``angles`` holds radians for a ULA and unit 3-vectors (rows) for a planar
    array.  ``shape`` is ``(Gx, Gy)`` for planar grids and ``None`` otherwise.
    """

    geometry: ArrayGeometry
    angles: np.ndarray
    canonical: bool = False
    shape: tuple[int, int] | None = field(default=None)

    @property
    def G(self) -> int:
        return int(self.angles.shape[0])

    @cached_property
    def matrix(self) -> np.ndarray:
        """The ``M x G`` response matrix (read-only)."""
        mat = steering(self.geometry, self.angles)
        mat.setflags(write=False)
        return mat

    def sin_normalized(self) -> np.ndarray:
        """ULA only: ``sin(theta_i) / sin(theta_max)`` for each grid point."""
        if not self.geometry.is_ula:
            raise WrongGeometry("normalized sine is defined for ULA grids only")
        return np.sin(self.angles) / math.sin(self.geometry.theta_max)

    def to_dict(self) -> dict:
        d = {"geometry": self.geometry.to_dict(), "canonical": self.canonical}
        if self.canonical:
            d["G"] = list(self.shape) if self.shape else self.G
        else:
            d["angles"] = np.asarray(self.angles).tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AngularGrid":
        geom = ArrayGeometry.from_dict(d["geometry"])
        if d.get("canonical", True):
            G = d["G"]
            return build_grid(geom, tuple(G) if isinstance(G, (list, tuple)) else int(G))
        return custom_grid(geom, np.asarray(d["angles"], dtype=float))


def build_grid(geometry: ArrayGeometry, G) -> AngularGrid:
    """Canonical DFT-structured grid.

    For a ULA, ``G`` is an integer and the grid points are
    ``theta_i = arcsin((-1 + 2 i / G) sin(theta_max))`` for ``i = 0..G-1``.
    For a planar array, ``G`` is ``(Gx, Gy)`` and the grid is the lattice of
    directions whose ``(x, y)`` projections are uniform in
    ``[-1/dx_bar, 1/dx_bar) x [-1/dy_bar, 1/dy_bar)``.

    Sizes must be powers of two so the FFT path applies.
    """
    if geometry.is_ula:
        if isinstance(G, tuple):
            raise InvalidDim("ULA grids take a scalar size")
        G = int(G)
        if G < geometry.M:
            raise GridTooCoarse(f"grid size {G} is smaller than the array size {geometry.M}")
        if not (_is_pow2(G) and _is_pow2(geometry.M)):
            raise InvalidDim("canonical grids need M and G to be powers of two")
        u = -1.0 + 2.0 * np.arange(G) / G
        angles = np.arcsin(u * math.sin(geometry.theta_max))
        angles.setflags(write=False)
        return AngularGrid(geometry, angles, canonical=True)

    if not isinstance(G, tuple) or len(G) != 2:
        raise InvalidDim("planar grids take a (Gx, Gy) size")
    Gx, Gy = int(G[0]), int(G[1])
    if Gx < geometry.Mx or Gy < geometry.My:
        raise GridTooCoarse(f"grid {Gx}x{Gy} is coarser than the array "
                            f"{geometry.Mx}x{geometry.My}")
    for n, mdim in ((Gx, geometry.Mx), (Gy, geometry.My)):
        if not (_is_pow2(mdim) and _is_pow2(n)):
            raise InvalidDim("canonical planar grids need power-of-two sizes")
    xmax, ymax = 1.0 / geometry.dx, 1.0 / geometry.dy
    if xmax**2 + ymax**2 > 1.0 + 1e-12:
        raise WrongGeometry("spacings too small: the canonical grid leaves the unit sphere "
                            "(need 1/dx^2 + 1/dy^2 <= 1)")
    gx = (-1.0 + 2.0 * np.arange(Gx) / Gx) * xmax
    gy = (-1.0 + 2.0 * np.arange(Gy) / Gy) * ymax
    XX, YY = np.meshgrid(gx, gy, indexing="ij")
    xs, ys = XX.ravel(), YY.ravel()
    zs = np.sqrt(np.clip(1.0 - xs**2 - ys**2, 0.0, None))
    angles = np.stack([xs, ys, zs], axis=1)
    angles.setflags(write=False)
    return AngularGrid(geometry, angles, canonical=True, shape=(Gx, Gy))


def custom_grid(geometry: ArrayGeometry, angles) -> AngularGrid:
    """Arbitrary grid; solved through the dense operator path."""
    a = np.array(angles, dtype=float)
    if geometry.is_ula:
        a = np.atleast_1d(a)
        if np.any(np.abs(a) > geometry.theta_max * (1 + _ANGLE_SLACK)):
            raise AngleOutOfRange("grid angle outside the served range")
    else:
        a = np.atleast_2d(a)
        if a.shape[1] != 3 or np.any(np.abs(np.linalg.norm(a, axis=1) - 1.0) > 1e-9):
            raise NotUnitVector("planar grid points must be unit 3-vectors")
    if a.shape[0] < geometry.M:
        raise GridTooCoarse(f"grid size {a.shape[0]} is smaller than the array size {geometry.M}")
    a.setflags(write=False)
    return AngularGrid(geometry, a, canonical=False)


def response_matrix(grid: AngularGrid) -> np.ndarray:
    """``M x G`` matrix whose columns are the steering vectors of ``grid``."""
    return grid.matrix


def nearest_grid_index(grid: AngularGrid, theta: float) -> int:
    """Index of the ULA grid point closest to ``theta`` in normalised sine."""
    u = math.sin(theta) / math.sin(grid.geometry.theta_max)
    return int(np.argmin(np.abs(grid.sin_normalized() - u)))
