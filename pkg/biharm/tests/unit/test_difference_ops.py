"""Tests for difference quotients, whole-array operators and ghost filling."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biharm.core.difference_ops import (
    BcScheme,
    LatticeField,
    bilaplacian_box,
    diff,
    discrete_bilaplacian,
    discrete_hessian,
    discrete_laplacian,
    fill_ghosts,
    hessian_box,
    laplacian_box,
    shift,
)
from biharm.core.errors import BoundaryDataError, ShapeMismatchError, StencilDomainError, ValidationError
from biharm.core.lattice import build_grid

from ..conftest import random_field


@pytest.mark.unit
def test_quadratic_second_differences_are_exact(grid_2d):
    """Test second differences are exact on quadratics."""
    field = LatticeField.from_function(grid_2d, lambda p: p[..., 0] ** 2 + 3.0 * p[..., 0] * p[..., 1])
    hess = discrete_hessian(field, (3, 4))
    assert hess[0][0] == pytest.approx(2.0, abs=1e-9)
    assert hess[1][1] == pytest.approx(0.0, abs=1e-9)
    assert hess[0][1] == pytest.approx(3.0, abs=1e-9)
    assert discrete_laplacian(field, (2, 2)) == pytest.approx(2.0, abs=1e-9)


@pytest.mark.unit
def test_quartic_bilaplacian_is_exact():
    """Test the 13-point bilaplacian is exact on quartics."""
    grid = build_grid(2, 10)
    field = LatticeField.from_function(grid, lambda p: p[..., 0] ** 4 + p[..., 0] ** 2 * p[..., 1] ** 2)
    # Δ²(x^4 + x^2 y^2) = 24 + 8
    assert discrete_bilaplacian(field, (5, 5)) == pytest.approx(32.0, rel=1e-7)
    box = bilaplacian_box(field.as_box(), grid.h)
    assert box[grid.interior_mask].mean() == pytest.approx(32.0, rel=1e-6)


@pytest.mark.unit
def test_differences_of_linear_function():
    """Test all first differences are exact on a linear function."""
    grid = build_grid(1, 8)
    field = LatticeField.from_function(grid, lambda p: 2.0 * p[..., 0] + 1.0)
    for variant in ("forward", "backward", "centered"):
        assert diff(field, 0, variant, (4,)) == pytest.approx(2.0)


@pytest.mark.unit
def test_pointwise_and_box_operators_agree(grid_2d, rng):
    """Test the pointwise and whole-array operators give the same values."""
    field = random_field(grid_2d, rng)
    hess = hessian_box(field.as_box(), grid_2d.h)
    lap = laplacian_box(field.as_box(), grid_2d.h)
    point = (2, 5)
    box = grid_2d.box_index(point)
    pointwise = discrete_hessian(field, point)
    for i in range(2):
        for j in range(2):
            assert hess[(i, j) + box] == pytest.approx(pointwise[i][j])
    assert lap[box] == pytest.approx(discrete_laplacian(field, point))


@pytest.mark.unit
def test_stencil_leaving_extended_grid_raises(grid_2d, rng):
    """Test a stencil reaching past the ghost layer raises."""
    field = random_field(grid_2d, rng)
    with pytest.raises(StencilDomainError):
        diff(field, 0, "forward", (grid_2d.m + 1, 3))
    with pytest.raises(StencilDomainError):
        discrete_bilaplacian(field, (0, 3))


@pytest.mark.unit
def test_shift_zero_fills():
    box = np.arange(5.0)
    assert shift(box, 0, 1).tolist() == [1.0, 2.0, 3.0, 4.0, 0.0]
    assert shift(box, 0, -2).tolist() == [0.0, 0.0, 0.0, 1.0, 2.0]


@pytest.mark.unit
def test_fill_ghosts_mirror_and_zero(grid_2d, rng):
    """Test mirror and zero ghost filling."""
    interior = rng.standard_normal(grid_2d.interior_shape)
    field = LatticeField.from_interior(grid_2d, interior)
    mirror = fill_ghosts(field, "centered")
    zero = fill_ghosts(field, BcScheme.ONE_SIDED_ZERO)
    assert mirror.at((-1, 3)) == field.at((1, 3))
    assert mirror.at((grid_2d.m + 1, 2)) == field.at((grid_2d.m - 1, 2))
    assert mirror.at((3, -1)) == field.at((3, 1))
    # Ghosts next to singular boundary points stay zero.
    assert mirror.at((-1, 0)) == 0.0
    assert np.all(zero.as_box()[grid_2d.ghost_mask] == 0.0)
    assert np.array_equal(zero.interior(), interior)


@pytest.mark.unit
def test_fill_ghosts_rejects_boundary_values(grid_2d):
    """Test ghost filling refuses nonzero boundary values."""
    box = np.zeros(grid_2d.box_shape)
    box[grid_2d.box_index((0, 3))] = 0.5
    with pytest.raises(BoundaryDataError):
        fill_ghosts(LatticeField.from_box(grid_2d, box), "centered")


@pytest.mark.unit
def test_scheme_aliases():
    assert BcScheme.parse("mirror") is BcScheme.CENTERED_MIRROR
    assert BcScheme.parse("One_Sided") is BcScheme.ONE_SIDED_ZERO
    with pytest.raises(ValidationError):
        BcScheme.parse("neumann")


@pytest.mark.unit
def test_lattice_field_validates_shape_and_values(grid_2d):
    """Test LatticeField rejects wrong lengths and non-finite values."""
    with pytest.raises(ShapeMismatchError):
        LatticeField(grid_2d, np.zeros(3))
    values = np.zeros(grid_2d.count("member"))
    values[0] = np.nan
    with pytest.raises(ValidationError):
        LatticeField(grid_2d, values)


@pytest.mark.unit
@settings(max_examples=25, deadline=None)
@given(scale=st.floats(min_value=-1e3, max_value=1e3, allow_nan=False), seed=st.integers(0, 2**16))
def test_bilaplacian_is_linear(scale, seed):
    """Test the whole-array bilaplacian is linear."""
    grid = build_grid(2, 6)
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(grid.box_shape)
    b = rng.standard_normal(grid.box_shape)
    lhs = bilaplacian_box(scale * a + b, grid.h)
    rhs = scale * bilaplacian_box(a, grid.h) + bilaplacian_box(b, grid.h)
    assert np.allclose(lhs, rhs, rtol=1e-9, atol=1e-9 * (1.0 + abs(scale)) * grid.m**4)


@pytest.mark.unit
def test_centered_difference_and_bilaplacian_converge_at_second_order():
    """Halving h twice cuts the D_0 and Δ²_h errors on a smooth field by about four each time."""

    def u(p):
        return np.sin(np.pi * p[..., 0]) * np.cos(np.pi * p[..., 1])

    # exact values at (1/4, 1/4)
    slope = np.pi * 0.5
    bilap = 4.0 * np.pi**4 * 0.5
    slope_errors, bilap_errors = [], []
    for m in (8, 16, 32):
        grid = build_grid(2, m)
        field = LatticeField.from_function(grid, u)
        point = (m // 4, m // 4)
        slope_errors.append(abs(diff(field, 0, "centered", point) - slope))
        bilap_errors.append(abs(discrete_bilaplacian(field, point) - bilap))
    for errors in (slope_errors, bilap_errors):
        ratios = [coarse / fine for coarse, fine in zip(errors, errors[1:])]
        assert all(3.5 <= r <= 4.5 for r in ratios), ratios
