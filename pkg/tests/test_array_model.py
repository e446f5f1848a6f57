import math

import numpy as np
import pytest

from sketchtrack.array_model import (ArrayGeometry, build_grid, custom_grid, nearest_grid_index,
                                     rect_response, response_matrix, steering, ula_response)
from sketchtrack.errors import (AngleOutOfRange, GridTooCoarse, InvalidDim, NotUnitVector,
                                WrongGeometry)


def test_ula_spacing_rule():
    g = ArrayGeometry.ula(8, 0.7)
    assert abs(g.spacing * math.sin(g.theta_max) - 1) <= 1e-12


def test_ula_broadside_is_all_ones():
    assert np.allclose(ula_response(ArrayGeometry.ula(4), 0.0), np.ones(4), atol=1e-15)


def test_ula_endpoint_alternates():
    g = ArrayGeometry.ula(2)
    assert np.allclose(ula_response(g, g.theta_max), [1, -1], atol=1e-12)


def test_ula_matches_entry_formula():
    g = ArrayGeometry.ula(8)
    th = g.theta_max / 3
    k = np.arange(8)
    ref = np.exp(1j * k * np.pi * math.sin(th) / math.sin(g.theta_max))
    assert np.abs(ula_response(g, th) - ref).max() <= 1e-12


def test_ula_vectorised_shape():
    g = ArrayGeometry.ula(8)
    assert ula_response(g, np.array([0.1, -0.2, 0.3])).shape == (8, 3)


def test_ula_errors():
    g = ArrayGeometry.ula(4)
    with pytest.raises(AngleOutOfRange):
        ula_response(g, g.theta_max + 0.01)
    with pytest.raises(WrongGeometry):
        ula_response(ArrayGeometry.rect(2, 2), 0.0)
    with pytest.raises(AngleOutOfRange):
        ArrayGeometry.ula(4, 0.0)
    with pytest.raises(InvalidDim):
        ArrayGeometry.ula(0)


def test_rect_broadside_is_all_ones():
    g = ArrayGeometry.rect(3, 2)
    assert np.allclose(rect_response(g, [0, 0, 1]), np.ones(6))


def test_rect_half_integer_offsets():
    g = ArrayGeometry.rect(2, 2, 1.0, 1.0)
    ref = np.exp(1j * np.pi * np.array([-0.5, -0.5, 0.5, 0.5]))
    assert np.abs(rect_response(g, [1, 0, 0]) - ref).max() <= 1e-12


def test_rect_matches_formula_on_grid_point(rng):
    g = ArrayGeometry.rect(4, 8)
    grid = build_grid(g, (8, 16))
    xi = grid.angles[int(rng.integers(grid.G))]
    ref = np.empty(32, dtype=complex)
    for x in range(4):
        for y in range(8):
            r = ((x - 1.5) * g.dx, (y - 3.5) * g.dy)
            ref[x * 8 + y] = np.exp(1j * np.pi * (xi[0] * r[0] + xi[1] * r[1]))
    assert np.abs(rect_response(g, xi) - ref).max() <= 1e-12


def test_rect_errors():
    with pytest.raises(NotUnitVector):
        rect_response(ArrayGeometry.rect(2, 2), [1, 1, 0])
    with pytest.raises(WrongGeometry):
        rect_response(ArrayGeometry.ula(4), [0, 0, 1])


def test_grid_half_wavelength_example():
    grid = build_grid(ArrayGeometry.ula(4, math.pi / 2), 4)
    assert np.allclose(np.sin(grid.angles), [-1, -0.5, 0, 0.5], atol=1e-12)
    assert np.allclose(np.degrees(grid.angles), [-90, -30, 0, 30], atol=1e-9)


def test_grid_default_size():
    g = ArrayGeometry.ula(64)
    grid = build_grid(g, 128)
    assert grid.G == 128 and grid.canonical
    assert grid.angles[0] == pytest.approx(-g.theta_max, abs=1e-12)
    assert np.allclose(grid.sin_normalized(), -1 + 2 * np.arange(128) / 128, atol=1e-12)


@pytest.mark.parametrize("M,G", [(16, 16), (16, 32), (16, 128), (64, 128)])
def test_canonical_completeness(M, G):
    A = response_matrix(build_grid(ArrayGeometry.ula(M), G))
    err = np.linalg.norm(A @ A.conj().T - G * np.eye(M)) / np.linalg.norm(G * np.eye(M))
    assert err <= 1e-9


def test_square_grid_is_scaled_unitary():
    A = response_matrix(build_grid(ArrayGeometry.ula(16), 16))
    assert np.abs(A.conj().T @ A - 16 * np.eye(16)).max() <= 1e-9


def test_response_matrix_columns():
    grid = build_grid(ArrayGeometry.ula(8), 16)
    A = response_matrix(grid)
    assert np.allclose(A[:, 8], 1.0)  # theta = 0 sits at index G/2
    assert np.allclose(np.linalg.norm(A, axis=0), math.sqrt(8))
    c = -16 + 2 * np.arange(16)
    omega = np.exp(1j * np.pi / 16)
    assert np.allclose(A, omega ** np.multiply.outer(np.arange(8), c), atol=1e-12)
    assert not A.flags.writeable


def test_grid_errors():
    g = ArrayGeometry.ula(16)
    with pytest.raises(GridTooCoarse):
        build_grid(g, 8)
    with pytest.raises(InvalidDim):
        build_grid(g, 48)
    with pytest.raises(WrongGeometry):
        build_grid(ArrayGeometry.rect(4, 4, 1.0, 1.0), (8, 8))
    with pytest.raises(GridTooCoarse):
        build_grid(ArrayGeometry.rect(4, 4), (2, 8))


def test_rect_grid_lattice():
    g = ArrayGeometry.rect(4, 4)
    grid = build_grid(g, (8, 8))
    xi = grid.angles
    assert np.all(xi[:, 0] ** 2 + xi[:, 1] ** 2 <= 1 + 1e-12)
    assert np.allclose(np.linalg.norm(xi, axis=1), 1)
    assert np.unique(np.round(xi[:, 0], 12)).size == 8
    assert xi[:, 0].min() == pytest.approx(-1 / g.dx)


def test_custom_grid_and_nearest():
    g = ArrayGeometry.ula(8)
    grid = custom_grid(g, np.linspace(-0.9, 0.9, 12))
    assert not grid.canonical and grid.G == 12
    with pytest.raises(AngleOutOfRange):
        custom_grid(g, [2.0] * 8)
    canon = build_grid(g, 16)
    assert nearest_grid_index(canon, canon.angles[5]) == 5


def test_global_phase_is_immaterial(rng):
    grid = build_grid(ArrayGeometry.ula(8), 16)
    A = grid.matrix
    s = rng.uniform(0, 1, 16)
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, 16))
    S1 = (A * s) @ A.conj().T
    A2 = A * phases
    S2 = (A2 * s) @ A2.conj().T
    assert np.abs(S1 - S2).max() <= 1e-12


def test_unit_modulus(rng):
    g = ArrayGeometry.ula(32)
    a = steering(g, rng.uniform(-g.theta_max, g.theta_max, 50))
    assert np.abs(np.abs(a) - 1).max() <= 1e-12


def test_serialisation_round_trip():
    for geom, G in [(ArrayGeometry.ula(16, 0.9), 32), (ArrayGeometry.rect(4, 2), (8, 4))]:
        grid = build_grid(geom, G)
        back = type(grid).from_dict(grid.to_dict())
        assert back.geometry == geom
        assert np.allclose(back.angles, grid.angles)
    cg = custom_grid(ArrayGeometry.ula(4), [-0.5, 0, 0.2, 0.5])
    assert np.allclose(type(cg).from_dict(cg.to_dict()).angles, cg.angles)
