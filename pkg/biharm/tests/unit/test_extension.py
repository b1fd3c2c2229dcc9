"""Tests for the reflection extension, face Fourier series, cutoff and R_h."""

from __future__ import annotations

from math import comb

import numpy as np
import pytest

from biharm.analysis.identities import phi_residual
from biharm.analysis.manufactured import manufactured_pair
from biharm.analysis.studies import extended_case
from biharm.core.difference_ops import LatticeField
from biharm.core.discrete_norms import FaceField
from biharm.core.errors import SupportError, ValidationError
from biharm.core.extension import (
    EXTEND_COEFFS,
    RESTRICT_COEFFS,
    CutoffProfile,
    TraceVariant,
    apply_cutoff,
    extend_even,
    face_data,
    fourier_coeffs,
    inverse_series,
    inverse_trace,
    localize_to_corner,
    periodize,
    project_Rh,
)
from biharm.core.lattice import build_grid
from biharm.core.mollifier import SourceFunction


def _cubic_near_origin() -> SourceFunction:
    def func(p):
        x = p[..., 0]
        return np.where((x >= 0.0) & (x < 0.5), x**2 + x**3, 0.0)

    return SourceFunction(func, 1, name="x^2+x^3", support=(0.0, 0.5))


def _quartic_near_origin() -> SourceFunction:
    def func(p):
        x = p[..., 0]
        return np.where((x >= 0.0) & (x < 0.5), x**2 + x**3 + x**4, 0.0)

    return SourceFunction(func, 1, name="x^2+x^3+x^4", support=(0.0, 0.5))


def _one_sided_difference(f, order: int, delta: float, side: int) -> float:
    """Forward (``side = 1``) or backward (``side = -1``) difference of ``order`` at 0."""
    total = 0.0
    for k in range(order + 1):
        sign = (-1) ** (order - k) if side > 0 else (-1) ** k
        total += sign * comb(order, k) * f(np.array([[side * k * delta]]))[0]
    return total / delta**order


def _second_difference(f, points: np.ndarray, axis: int, delta: float) -> np.ndarray:
    step = np.zeros(points.shape[-1])
    step[axis] = delta
    return (f(points + step) - 2.0 * f(points) + f(points - step)) / delta**2


def _first_difference(f, points: np.ndarray, axis: int, delta: float) -> np.ndarray:
    step = np.zeros(points.shape[-1])
    step[axis] = delta
    return (f(points + step) - f(points - step)) / (2.0 * delta)


@pytest.mark.unit
def test_reflection_coefficients():
    """Test the extension and restriction weights solve their moment equations."""
    assert EXTEND_COEFFS.lam_m1 == pytest.approx(3.0)
    assert EXTEND_COEFFS.lam_m2 == pytest.approx(-0.5)
    assert RESTRICT_COEFFS.lam_m1 == pytest.approx(-3.0)
    assert RESTRICT_COEFFS.lam_m2 == pytest.approx(2.0)
    assert max(EXTEND_COEFFS.residuals()) < 1e-14
    assert max(RESTRICT_COEFFS.residuals()) < 1e-14


@pytest.mark.unit
def test_extension_reproduces_quadratic_and_cubic_terms():
    """Test the extension reproduces x^2 + x^3 across the origin."""
    ext = extend_even(_cubic_near_origin())
    x = np.array([[-0.01], [-0.05], [0.2]])
    assert np.allclose(ext(x), x[:, 0] ** 2 + x[:, 0] ** 3, rtol=1e-12, atol=1e-15)
    assert ext(np.array([[-0.7]]))[0] == 0.0


@pytest.mark.unit
def test_extension_rejects_wide_support():
    """Test a declared support past the bound is refused."""
    u = SourceFunction(lambda p: p[..., 0], 1, support=(0.0, 0.9))
    with pytest.raises(SupportError):
        extend_even(u)


@pytest.mark.unit
def test_localization_keeps_corner_values():
    """Test localization keeps values near the corner and vanishes outside."""
    case = manufactured_pair("sine4", 2)
    local = localize_to_corner(case.u_exact)
    inner = np.array([[0.1, 0.2], [1.0 / 3.0, 0.05]])
    assert np.allclose(local(inner), case.u_exact(inner))
    outer = np.array([[0.61, 0.1], [0.2, 0.9], [-0.1, 0.2]])
    assert np.all(local(outer) == 0.0)
    with pytest.raises(ValidationError):
        localize_to_corner(case.u_exact, flat=0.5, end=0.4)


@pytest.mark.unit
def test_localized_and_extended_partials_match_finite_differences():
    """The product rule closed forms agree with difference quotients inside the bump ramp and across the reflection."""
    local = localize_to_corner(manufactured_pair("sine4", 2).u_exact)
    ext = extend_even(local)
    delta = 2e-5
    ramp = np.array([[0.45, 0.2], [0.5, 0.5], [0.2, 0.55]])
    reflected = np.array([[-0.1, 0.45], [-0.25, 0.5], [0.3, -0.2]])
    for source, points in ((local, ramp), (ext, ramp), (ext, reflected)):
        for axis in range(2):
            expected = _second_difference(source, points, axis, delta)
            assert np.allclose(source.second_partials[axis](points), expected, rtol=1e-5, atol=1e-4)
            slope = _first_difference(source, points, axis, delta)
            assert np.allclose(source.first_partials[axis](points), slope, rtol=1e-6, atol=1e-5)
        lap = sum(source.second_partials[a](points) for a in range(2))
        assert np.allclose(source.laplacian_source()(points), lap)


@pytest.mark.unit
def test_phi_residual_accepts_the_extended_case(grid_2d):
    """The corner-localized, extended case keeps a closed-form Laplacian for the smoothing residual."""
    phi = phi_residual(extended_case(manufactured_pair("sine4", 2)), grid_2d, 0)
    assert np.all(np.isfinite(phi.values))
    assert np.max(np.abs(phi.values)) > 0.0


@pytest.mark.unit
def test_extension_rejects_values_past_the_support_bound():
    """Truncating a source that is nonzero past 2/3 is refused whatever its declared support says."""
    with pytest.raises(SupportError):
        extend_even(manufactured_pair("sine4", 2).u_exact)
    mislabelled = SourceFunction(lambda p: p[..., 0] ** 2, 1, name="x^2", support=(0.0, 0.5))
    with pytest.raises(SupportError):
        extend_even(mislabelled)


@pytest.mark.unit
def test_extension_matches_one_sided_derivatives_through_third_order():
    """Derivative limits of order 0..3 agree across x = 0 while the fourth derivative jumps."""
    u = _quartic_near_origin()
    ext = extend_even(u)
    origin = np.zeros((1, 1))
    assert ext(origin)[0] == u(origin)[0]

    def gap(order, delta):
        return abs(_one_sided_difference(ext, order, delta, 1) - _one_sided_difference(ext, order, delta, -1))

    for order in (1, 2, 3):
        ratio = gap(order, 0.02) / gap(order, 0.01)
        assert 1.6 <= ratio <= 2.4, (order, ratio)
    # u'''' = 24 on the right, -120 on the left
    assert gap(4, 0.01) == pytest.approx(144.0, rel=0.05)
    assert gap(4, 0.02) / gap(4, 0.01) < 1.2


@pytest.mark.unit
def test_fourier_series_round_trip(rng):
    """Test the face Fourier series reproduces the face values."""
    m = 8
    points = np.arange(-m, m).reshape(-1, 1)
    g = FaceField(1, 2, 1.0 / m, points, rng.standard_normal(2 * m))
    gamma = fourier_coeffs(g, m)
    assert gamma.coeffs.shape == (2 * m,)
    assert np.allclose(inverse_series(gamma).real, periodize(g, m), atol=1e-12)
    assert np.max(np.abs(inverse_series(gamma).imag)) < 1e-12


@pytest.mark.unit
def test_fourier_checks_spacing_and_support():
    """Test a mismatched spacing and data outside the period are rejected."""
    g = FaceField(1, 2, 0.125, np.array([[0]]), np.array([1.0]))
    with pytest.raises(ValidationError):
        fourier_coeffs(g, 16)
    outside = FaceField(1, 2, 0.125, np.array([[8]]), np.array([1.0]))
    with pytest.raises(SupportError):
        periodize(outside, 8)


@pytest.mark.unit
@pytest.mark.parametrize("variant", [TraceVariant.CENTERED, TraceVariant.ONE_SIDED])
def test_inverse_trace_reproduces_face_data(variant, rng):
    """Test the lifted field has zero trace and the prescribed normal difference."""
    grid = build_grid(2, 8)
    m, h = grid.m, grid.h
    g = FaceField(1, 2, h, np.arange(0, m).reshape(-1, 1), rng.standard_normal(m))
    slab = inverse_trace(fourier_coeffs(g, m), grid, variant)
    assert np.all(slab.level(0) == 0.0)
    if variant is TraceVariant.CENTERED:
        normal = (slab.level(1) - slab.level(-1)) / (2 * h)
    else:
        normal = (slab.level(0) - slab.level(-1)) / h
    assert np.allclose(normal, periodize(g, m), atol=1e-10)


@pytest.mark.unit
def test_cutoff_profile():
    """Test the cutoff plateau and where it vanishes."""
    eta = CutoffProfile()
    assert eta(0.0) == 1.0 and eta(-0.75) == 1.0
    assert eta(0.875) == 0.0 and eta(1.0) == 0.0
    assert 0.0 < eta(0.8) < 1.0
    with pytest.raises(ValidationError):
        CutoffProfile(plateau=0.9, outer=0.8)


@pytest.mark.unit
def test_apply_cutoff_to_lattice_field(grid_2d):
    """Test the cutoff applied to a lattice field."""
    ones = LatticeField(grid_2d, np.ones(grid_2d.count("member")))
    cut = apply_cutoff(ones)
    assert cut.at((2, 3)) == 1.0
    assert cut.at((grid_2d.m, 3)) == 0.0
    with pytest.raises(ValidationError):
        apply_cutoff(np.ones(3))


@pytest.mark.unit
@pytest.mark.parametrize("variant", ["mirror", "star"])
def test_restriction_vanishes_on_the_hyperplane(variant, rng):
    """Test the restriction vanishes at the hyperplane and fills the layer below."""
    values = rng.standard_normal(12)
    out = project_Rh(values, [-4], variant)
    assert out[4] == pytest.approx(0.0, abs=1e-14)  # coordinate 0
    if variant == "mirror":
        assert out[3] == out[5]  # coordinate -1 mirrors +1
    else:
        assert np.all(out[:4] == 0.0)
    x = 2
    expected = values[4 + x] - 3.0 * values[4 - x] + 2.0 * values[4 - 2 * x]
    assert out[4 + x] == pytest.approx(expected)


@pytest.mark.unit
def test_restriction_rejects_unknown_variant():
    with pytest.raises(ValidationError):
        project_Rh(np.zeros(4), [0], "odd")


@pytest.mark.unit
def test_face_data_support_rule():
    """Test face data is stored on the non-negative face points only."""
    grid = build_grid(2, 8)
    u_tilde = extend_even(localize_to_corner(manufactured_pair("poly-clamped", 2).u_exact))
    g = face_data(u_tilde, grid, 1, "centered")
    lookup = g.as_dict()
    assert lookup[(0,)] == 0.0  # tangential axis 0 precedes the normal axis
    assert g.size == grid.m + 1
    g0 = face_data(u_tilde, grid, 0, "one-sided")
    assert g0.points[:, 0].tolist() == list(range(grid.m + 1))


@pytest.mark.unit
def test_trace_variant_parsing():
    assert TraceVariant.parse("star") is TraceVariant.ONE_SIDED
    assert TraceVariant.parse("Centered") is TraceVariant.CENTERED
    assert TraceVariant.for_scheme("one-sided") is TraceVariant.ONE_SIDED
    with pytest.raises(ValidationError):
        TraceVariant.parse("upwind")


@pytest.mark.unit
@pytest.mark.parametrize("variant", ["mirror", "star"])
@pytest.mark.parametrize("n", [2, 3])
def test_restriction_commutes_with_normal_differences(variant, n, rng):
    """Restricting tangentially then differencing along the normal equals the reverse order."""
    h = 1.0 / 8
    values = rng.standard_normal((12,) * (n - 1) + (7,))
    origin = [-4] * (n - 1) + [-1]
    tangential = list(range(n - 1))

    def forward(a):
        out = np.zeros_like(a)
        out[..., :-1] = (a[..., 1:] - a[..., :-1]) / h
        return out

    def backward(a):
        out = np.zeros_like(a)
        out[..., 1:] = (a[..., 1:] - a[..., :-1]) / h
        return out

    for difference in (forward, backward):
        restricted_first = difference(project_Rh(values, origin, variant, axes=tangential))
        differenced_first = project_Rh(difference(values), origin, variant, axes=tangential)
        assert np.allclose(restricted_first, differenced_first, rtol=0.0, atol=1e-10)
