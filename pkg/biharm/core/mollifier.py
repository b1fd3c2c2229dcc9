"""Centered B-splines and the smoothing operators built on them.

``T^{h,j}_i f(x) = ∫ f(x + h t e_i) θ_j(t) dt`` is evaluated with composite
Gauss-Legendre quadrature whose panels end at the knots of ``θ_j``. With four
nodes per panel the rule is exact for polynomial integrands of degree 7.
Tensor smoothing applies the one-axis operator repeatedly to wrapped
callables.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Iterable, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from .difference_ops import LatticeField
from .errors import QuadratureError, ValidationError
from .lattice import GridSpec

LOGGER = logging.getLogger(__name__)

Evaluator = Callable[[np.ndarray], np.ndarray]

SUPPORTED_DEGREES = (1, 2, 3, 4)
DEFAULT_NODES_PER_PANEL = 4


@dataclass(frozen=True)
class SourceFunction:
    """A real function on R^n evaluated on arrays of points shaped ``(..., n)``.

    ``first_partials[i]``, ``second_partials[i]`` and ``laplacian`` are optional
    closed forms used by the commutation and consistency diagnostics.
    """

    func: Evaluator
    dim: int
    name: str = "f"
    smoothness: Optional[float] = None
    support: Optional[Tuple[float, float]] = None
    second_partials: Optional[Tuple[Evaluator, ...]] = field(default=None, repr=False)
    laplacian: Optional[Evaluator] = field(default=None, repr=False)
    first_partials: Optional[Tuple[Evaluator, ...]] = field(default=None, repr=False)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if points.shape[-1] != self.dim:
            raise ValidationError(
                f"{self.name} expects points with last axis {self.dim}, got {points.shape}"
            )
        return np.asarray(self.func(points), dtype=float)

    def second_partial(self, axis: int) -> "SourceFunction":
        if self.second_partials is None:
            raise ValidationError(f"{self.name} has no closed-form second derivatives")
        return SourceFunction(
            self.second_partials[axis], self.dim, name=f"d{axis + 1}{axis + 1} {self.name}"
        )

    def laplacian_source(self) -> "SourceFunction":
        if self.laplacian is None:
            raise ValidationError(f"{self.name} has no closed-form Laplacian")
        return SourceFunction(self.laplacian, self.dim, name=f"lap {self.name}")

    def renamed(self, name: str) -> "SourceFunction":
        return replace(self, name=name)


def bspline_eval(j: int, t):
    """Centered B-spline ``θ_j`` of degree ``j - 1`` evaluated at ``t`` (scalar or array)."""
    if j not in SUPPORTED_DEGREES:
        raise ValidationError(f"B-spline index must be one of {SUPPORTED_DEGREES}, got {j}")
    arr = np.asarray(t, dtype=float)
    a = np.abs(arr)
    if j == 1:
        out = np.where(a <= 0.5, 1.0, 0.0)
    elif j == 2:
        out = np.maximum(0.0, 1.0 - a)
    elif j == 3:
        out = np.where(
            a <= 0.5,
            0.75 - a**2,
            np.where(a <= 1.5, 0.5 * (1.5 - a) ** 2, 0.0),
        )
    else:
        out = np.where(
            a <= 1.0,
            2.0 / 3.0 - a**2 + 0.5 * a**3,
            np.where(a <= 2.0, (2.0 - a) ** 3 / 6.0, 0.0),
        )
    return float(out) if np.ndim(t) == 0 else out


def knots(j: int) -> np.ndarray:
    """Breakpoints of ``θ_j``: ``-j/2, -j/2 + 1, ..., j/2``."""
    return np.arange(j + 1) - 0.5 * j


@lru_cache(maxsize=32)
def quadrature_rule(j: int, nodes_per_panel: int = DEFAULT_NODES_PER_PANEL) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes ``t_q`` and weights ``w_q θ_j(t_q)`` so that ``Σ w g(t) ≈ ∫ g θ_j``."""
    if j not in SUPPORTED_DEGREES:
        raise ValidationError(f"B-spline index must be one of {SUPPORTED_DEGREES}, got {j}")
    ref_nodes, ref_weights = leggauss(nodes_per_panel)
    edges = knots(j)
    nodes = []
    weights = []
    for left, right in zip(edges[:-1], edges[1:]):
        half = 0.5 * (right - left)
        mid = 0.5 * (right + left)
        nodes.append(mid + half * ref_nodes)
        weights.append(half * ref_weights)
    t = np.concatenate(nodes)
    w = np.concatenate(weights) * bspline_eval(j, t)
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


def _checked(name: str, values: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise QuadratureError(f"Non-finite integrand while smoothing {name}")
    return values


def smooth_axis(
    f: SourceFunction,
    axis: int,
    h: float,
    degree: int = 2,
    nodes_per_panel: int = DEFAULT_NODES_PER_PANEL,
) -> SourceFunction:
    """``T^{h,degree}_axis f`` as a new callable. Degree 0 is the identity."""
    if degree == 0:
        return f
    if not 0 <= axis < f.dim:
        raise ValidationError(f"Axis {axis} out of range for dimension {f.dim}")
    t, w = quadrature_rule(degree, nodes_per_panel)

    def smoothed(points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        shift = np.zeros((t.size,) + (1,) * (points.ndim - 1) + (f.dim,))
        shift[..., axis] = h * t.reshape((t.size,) + (1,) * (points.ndim - 1))
        values = _checked(f.name, f(points[None, ...] + shift))
        return np.tensordot(w, values, axes=(0, 0))

    return SourceFunction(
        smoothed,
        f.dim,
        name=f"T{degree}_{axis + 1} {f.name}",
        smoothness=f.smoothness,
    )


def smooth_tensor(
    f: SourceFunction,
    h: float,
    axes: Iterable[int],
    degree: int = 2,
    nodes_per_panel: int = DEFAULT_NODES_PER_PANEL,
) -> SourceFunction:
    out = f
    for axis in axes:
        out = smooth_axis(out, axis, h, degree, nodes_per_panel)
    return out


def smooth_source(
    f: SourceFunction,
    grid: GridSpec,
    skip_axis: Optional[int] = None,
    *,
    degree: int = 2,
    region: str = "interior",
    nodes_per_panel: int = DEFAULT_NODES_PER_PANEL,
) -> LatticeField:
    """Apply ``T^{h,degree}`` along every axis except ``skip_axis`` and sample on ``region``.

    Points outside ``region`` are zero in the returned field.

    Raises:
        QuadratureError: if ``f`` returns non-finite values at a quadrature node.
    """
    if f.dim != grid.n:
        raise ValidationError(f"Source dimension {f.dim} does not match grid dimension {grid.n}")
    if skip_axis is not None:
        grid.check_axis(skip_axis)
    axes = [axis for axis in range(grid.n) if axis != skip_axis]
    smoothed = smooth_tensor(f, grid.h, axes, degree, nodes_per_panel)
    mask = grid.masks[region]
    coords = grid.coordinates()
    box = np.zeros(grid.box_shape)
    box[mask] = _checked(f.name, smoothed(coords[mask]))
    LOGGER.debug("Smoothed %s on %d points (skip_axis=%s)", f.name, int(mask.sum()), skip_axis)
    return LatticeField.from_box(grid, box)


def commutation_residual(
    f: SourceFunction,
    grid: GridSpec,
    axis: int,
    *,
    degree: int = 2,
    nodes_per_panel: int = DEFAULT_NODES_PER_PANEL,
) -> float:
    """Max over Ω^h of ``|T^{h,degree}_i ∂_i² f - D_i D_{-i} T^{h,degree-2}_i f|``."""
    grid.check_axis(axis)
    if degree not in (2, 3, 4):
        raise ValidationError(f"Commutation needs degree 2, 3 or 4, got {degree}")
    h = grid.h
    points = grid.coordinates()[grid.interior_mask]
    rhs = smooth_axis(f.second_partial(axis), axis, h, degree, nodes_per_panel)(points)
    inner = smooth_axis(f, axis, h, degree - 2, nodes_per_panel)
    step = np.zeros(grid.n)
    step[axis] = h
    lhs = (inner(points + step) - 2.0 * inner(points) + inner(points - step)) / h**2
    residual = _checked(f.name, np.abs(rhs - lhs))
    return float(residual.max()) if residual.size else 0.0


def sample_region(f: SourceFunction, grid: GridSpec, region: str = "member") -> LatticeField:
    """Point values of ``f`` on ``region`` (zero elsewhere)."""
    mask = grid.masks[region]
    box = np.zeros(grid.box_shape)
    box[mask] = _checked(f.name, f(grid.coordinates()[mask]))
    return LatticeField.from_box(grid, box)


def polynomial_source(coefficients: Sequence[float], axis: int, dim: int, name: str = "poly") -> SourceFunction:
    """``Σ c_k x_axis^k`` with its exact second derivative along ``axis``."""
    coeffs = np.asarray(coefficients, dtype=float)
    poly = np.polynomial.Polynomial(coeffs)
    d2 = poly.deriv(2) if coeffs.size > 2 else np.polynomial.Polynomial([0.0])

    def func(points: np.ndarray) -> np.ndarray:
        return poly(points[..., axis])

    def d2_func(points: np.ndarray) -> np.ndarray:
        return d2(points[..., axis]) + 0.0 * points[..., axis]

    partials = tuple(
        d2_func if k == axis else (lambda p: np.zeros(p.shape[:-1])) for k in range(dim)
    )
    return SourceFunction(func, dim, name=name, second_partials=partials, laplacian=d2_func)


__all__ = [
    "SourceFunction",
    "bspline_eval",
    "commutation_residual",
    "knots",
    "polynomial_source",
    "quadrature_rule",
    "sample_region",
    "smooth_axis",
    "smooth_source",
    "smooth_tensor",
]
