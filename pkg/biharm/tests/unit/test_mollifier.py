"""Tests for B-splines, smoothing operators and the commutation identity."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biharm.core.errors import QuadratureError, ValidationError
from biharm.core.lattice import build_grid
from biharm.core.mollifier import (
    SourceFunction,
    bspline_eval,
    commutation_residual,
    knots,
    polynomial_source,
    quadrature_rule,
    sample_region,
    smooth_axis,
    smooth_source,
)


@pytest.mark.unit
@pytest.mark.parametrize("j", [1, 2, 3, 4])
def test_bspline_has_unit_mass_and_compact_support(j):
    """Test B-spline quadrature weights and support."""
    t, w = quadrature_rule(j)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.all(np.abs(t) <= j / 2)
    assert bspline_eval(j, j / 2 + 0.01) == 0.0
    assert knots(j)[0] == -j / 2 and knots(j)[-1] == j / 2


@pytest.mark.unit
def test_hat_function_values():
    assert bspline_eval(2, 0.0) == 1.0
    assert bspline_eval(2, 0.5) == 0.5
    assert bspline_eval(3, 0.0) == pytest.approx(0.75)
    assert bspline_eval(4, 0.0) == pytest.approx(2.0 / 3.0)
    with pytest.raises(ValidationError):
        bspline_eval(5, 0.0)


@pytest.mark.unit
@pytest.mark.parametrize("j", [2, 3, 4])
def test_second_moment_of_bspline(j):
    """Test the B-spline variance j/12."""
    # Variance of θ_j is j / 12.
    t, w = quadrature_rule(j)
    assert np.sum(w * t**2) == pytest.approx(j / 12.0, rel=1e-13)


@pytest.mark.unit
def test_smoothing_preserves_affine_functions(grid_2d):
    """Test smoothing leaves affine functions unchanged."""
    f = SourceFunction(lambda p: 1.0 + 2.0 * p[..., 0] - p[..., 1], 2, name="affine")
    smoothed = smooth_source(f, grid_2d)
    exact = sample_region(f, grid_2d, "interior")
    assert np.allclose(smoothed.interior(), exact.interior(), atol=1e-14)
    assert np.all(smoothed.as_box()[~grid_2d.interior_mask] == 0.0)


@pytest.mark.unit
def test_smoothing_a_quadratic_adds_the_variance():
    """Test smoothing x^2 adds the kernel variance times h^2."""
    grid = build_grid(1, 8)
    f = SourceFunction(lambda p: p[..., 0] ** 2, 1, name="x^2")
    for j in (2, 3, 4):
        g = smooth_axis(f, 0, grid.h, j)
        x = np.array([[0.25], [0.5]])
        assert np.allclose(g(x), x[:, 0] ** 2 + grid.h**2 * j / 12.0, rtol=1e-13)


@pytest.mark.unit
@settings(max_examples=30, deadline=None)
@given(
    coeffs=st.lists(st.floats(min_value=-5, max_value=5, allow_nan=False), min_size=1, max_size=5),
    degree=st.sampled_from([2, 3, 4]),
    dim=st.sampled_from([1, 2]),
)
def test_commutation_exact_for_quartics(coeffs, degree, dim):
    """Test smoothing commutes with second differences on quartics."""
    grid = build_grid(dim, 8)
    for axis in range(dim):
        f = polynomial_source(coeffs, axis, dim)
        scale = max(1.0, float(np.max(np.abs(sample_region(f.second_partial(axis), grid, "interior").values))))
        assert commutation_residual(f, grid, axis, degree=degree) / scale <= 1e-9


@pytest.mark.unit
def test_commutation_holds_for_smooth_sources_up_to_quadrature():
    """Test commutation on a smooth source up to quadrature error."""
    grid = build_grid(1, 8)
    f = SourceFunction(
        lambda p: np.sin(5.0 * p[..., 0]),
        1,
        name="sin",
        second_partials=(lambda p: -25.0 * np.sin(5.0 * p[..., 0]),),
    )
    assert commutation_residual(f, grid, 0) <= 25.0 * 1e-6


@pytest.mark.unit
def test_commutation_rejects_low_degree(grid_2d):
    """Test commutation needs a kernel of degree two or more."""
    f = polynomial_source([0.0, 0.0, 1.0], 0, 2)
    with pytest.raises(ValidationError):
        commutation_residual(f, grid_2d, 0, degree=1)


@pytest.mark.unit
def test_non_finite_source_raises(grid_2d):
    """Test a non-finite source value raises QuadratureError."""
    f = SourceFunction(lambda p: np.where(p[..., 0] > 0.5, np.inf, 0.0), 2, name="bad")
    with pytest.raises(QuadratureError):
        smooth_source(f, grid_2d)


@pytest.mark.unit
def test_dimension_mismatch_raises(grid_2d):
    """Test a source of the wrong dimension is refused."""
    f = SourceFunction(lambda p: p[..., 0], 1)
    with pytest.raises(ValidationError):
        smooth_source(f, grid_2d)


@pytest.mark.unit
def test_skip_axis_leaves_that_direction_unsmoothed(grid_2d):
    """Test skip_axis smooths every direction but one."""
    f = SourceFunction(lambda p: p[..., 0] ** 2 + p[..., 1] ** 2, 2)
    field = smooth_source(f, grid_2d, skip_axis=1)
    x, y = 0.5, 0.25
    expected = x**2 + grid_2d.h**2 / 6.0 + y**2
    assert field.at((4, 2)) == pytest.approx(expected, rel=1e-13)
