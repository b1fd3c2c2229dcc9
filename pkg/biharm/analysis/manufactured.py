"""Manufactured solutions with closed-form derivatives through order four.

Every registered case is a tensor product ``u(x) = Π_i p(x_i)`` of one
profile, so all derivatives follow from the profile's first four.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from ..core.errors import NumericalError, UnknownCaseError, ValidationError
from ..core.mollifier import SourceFunction

LOGGER = logging.getLogger(__name__)

CLAMPED_TOLERANCE = 1e-12
CLAMPED_SAMPLES = 100

Profile = Tuple[Callable[[np.ndarray], np.ndarray], ...]


@dataclass(frozen=True)
class ManufacturedCase:
    """A solution ``u_exact`` of the clamped problem and its source ``f = Δ²u``."""

    name: str
    dim: int
    u_exact: SourceFunction
    f: SourceFunction
    s: float
    clamped: bool
    gradient: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    description: str = ""

    @property
    def discrete_exact(self) -> bool:
        """True when every discrete error is expected to vanish."""
        return self.name == "zero"


def _sine_profile() -> Profile:
    pi = np.pi
    return (
        lambda x: np.sin(pi * x) ** 2,
        lambda x: pi * np.sin(2 * pi * x),
        lambda x: 2 * pi**2 * np.cos(2 * pi * x),
        lambda x: -4 * pi**3 * np.sin(2 * pi * x),
        lambda x: -8 * pi**4 * np.cos(2 * pi * x),
    )


def _poly_profile() -> Profile:
    return (
        lambda x: x**2 * (1 - x) ** 2,
        lambda x: 2 * x - 6 * x**2 + 4 * x**3,
        lambda x: 2 - 12 * x + 12 * x**2,
        lambda x: -12 + 24 * x,
        lambda x: 24.0 + 0.0 * x,
    )


def _product(profile: Profile, points: np.ndarray, orders: Sequence[int]) -> np.ndarray:
    out = np.ones(points.shape[:-1])
    for axis, order in enumerate(orders):
        out = out * profile[order](points[..., axis])
    return out


def _orders(dim: int, at: Dict[int, int]) -> List[int]:
    """Derivative order per axis, e.g. ``{0: 2, 1: 2}`` for ``∂_1² ∂_2²``."""
    return [at.get(axis, 0) for axis in range(dim)]


def tensor_case(name: str, profile: Profile, dim: int, *, s: float, description: str = "") -> ManufacturedCase:
    """Build ``u = Π p(x_i)`` with gradient, second partials, Laplacian and ``Δ²u``."""
    if dim < 1:
        raise ValidationError(f"Dimension must be >= 1, got {dim}")

    def u(points: np.ndarray) -> np.ndarray:
        return _product(profile, points, _orders(dim, {}))

    def gradient(points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.stack([_product(profile, points, _orders(dim, {i: 1})) for i in range(dim)], axis=-1)

    def partial(axis: int) -> Callable[[np.ndarray], np.ndarray]:
        def d2(points: np.ndarray) -> np.ndarray:
            return _product(profile, points, _orders(dim, {axis: 2}))

        return d2

    def first(axis: int) -> Callable[[np.ndarray], np.ndarray]:
        return lambda points: _product(profile, points, _orders(dim, {axis: 1}))

    partials = tuple(partial(a) for a in range(dim))
    firsts = tuple(first(a) for a in range(dim))

    def laplacian(points: np.ndarray) -> np.ndarray:
        return sum(p(points) for p in partials)

    def bilaplacian(points: np.ndarray) -> np.ndarray:
        total = sum(_product(profile, points, _orders(dim, {i: 4})) for i in range(dim))
        for i, j in itertools.combinations(range(dim), 2):
            total = total + 2.0 * _product(profile, points, _orders(dim, {i: 2, j: 2}))
        return total

    u_exact = SourceFunction(
        u,
        dim,
        name=name,
        smoothness=s,
        second_partials=partials,
        laplacian=laplacian,
        first_partials=firsts,
    )
    f = SourceFunction(bilaplacian, dim, name=f"bilap {name}", smoothness=s - 4.0)
    return ManufacturedCase(name, dim, u_exact, f, s, True, gradient, description)


def zero_case(dim: int) -> ManufacturedCase:
    def zero(points: np.ndarray) -> np.ndarray:
        return np.zeros(np.asarray(points).shape[:-1])

    def zero_gradient(points: np.ndarray) -> np.ndarray:
        return np.zeros(np.asarray(points).shape)

    u_exact = SourceFunction(
        zero,
        dim,
        name="zero",
        smoothness=np.inf,
        second_partials=(zero,) * dim,
        laplacian=zero,
        first_partials=(zero,) * dim,
    )
    return ManufacturedCase(
        "zero", dim, u_exact, SourceFunction(zero, dim, name="bilap zero"), 4.0, True, zero_gradient, "u = 0"
    )


CATALOGUE: Dict[str, Callable[[int], ManufacturedCase]] = {
    "sine4": lambda dim: tensor_case(
        "sine4", _sine_profile(), dim, s=4.0, description="prod sin^2(pi x_i)"
    ),
    "poly-clamped": lambda dim: tensor_case(
        "poly-clamped", _poly_profile(), dim, s=4.0, description="prod x_i^2 (1 - x_i)^2"
    ),
    "zero": zero_case,
}


def case_names() -> List[str]:
    return sorted(CATALOGUE)


def boundary_samples(dim: int, count: int = CLAMPED_SAMPLES, seed: int = 0) -> np.ndarray:
    """``count`` points on ∂[0,1]^dim: uniform tangential coordinates on a random face."""
    rng = np.random.default_rng(seed)
    points = rng.uniform(0.0, 1.0, size=(count, dim))
    axes = rng.integers(0, dim, size=count)
    sides = rng.integers(0, 2, size=count).astype(float)
    points[np.arange(count), axes] = sides
    return points


def clamped_defect(case: ManufacturedCase, count: int = CLAMPED_SAMPLES, seed: int = 0) -> float:
    """Largest ``|u|`` or ``|∇u|`` component over sampled boundary points."""
    points = boundary_samples(case.dim, count, seed)
    values = np.abs(case.u_exact(points))
    grads = np.abs(case.gradient(points))
    return float(max(values.max(initial=0.0), grads.max(initial=0.0)))


def manufactured_pair(name: str, dim: int = 2) -> ManufacturedCase:
    """Look up a registered case and check its clamped flag.

    Raises:
        UnknownCaseError: for a name that is not registered.
        NumericalError: if a case flagged as clamped fails the boundary check.
    """
    key = name.strip().lower()
    if key not in CATALOGUE:
        raise UnknownCaseError(name, case_names())
    case = CATALOGUE[key](dim)
    if case.clamped:
        defect = clamped_defect(case)
        if defect > CLAMPED_TOLERANCE:
            raise NumericalError(f"Case {name} is flagged clamped but has boundary defect {defect:.3e}")
    LOGGER.debug("Loaded manufactured case %s (n=%d)", case.name, dim)
    return case


def monomial_source(exponents: Sequence[int], name: str = "") -> SourceFunction:
    """``Π x_i^{e_i}`` with exact second partials and Laplacian."""
    exps = tuple(int(e) for e in exponents)
    dim = len(exps)

    def power(points: np.ndarray, shifts: Dict[int, int]) -> np.ndarray:
        out = np.ones(np.asarray(points).shape[:-1])
        for axis, e in enumerate(exps):
            drop = shifts.get(axis, 0)
            if e < drop:
                return np.zeros(np.asarray(points).shape[:-1])
            coeff = float(np.prod(np.arange(e - drop + 1, e + 1))) if drop else 1.0
            out = out * coeff * points[..., axis] ** (e - drop)
        return out

    def func(points: np.ndarray) -> np.ndarray:
        return power(points, {})

    def partial(axis: int) -> Callable[[np.ndarray], np.ndarray]:
        return lambda points: power(points, {axis: 2})

    def first(axis: int) -> Callable[[np.ndarray], np.ndarray]:
        return lambda points: power(points, {axis: 1})

    partials = tuple(partial(a) for a in range(dim))

    def laplacian(points: np.ndarray) -> np.ndarray:
        return sum(p(points) for p in partials)

    label = name or "x^" + "".join(str(e) for e in exps)
    return SourceFunction(
        func,
        dim,
        name=label,
        second_partials=partials,
        laplacian=laplacian,
        first_partials=tuple(first(a) for a in range(dim)),
    )


def cubic_basis(dim: int) -> List[SourceFunction]:
    """Monomials of total degree at most three (ten of them for ``dim = 2``)."""
    basis = []
    for exps in itertools.product(range(4), repeat=dim):
        if sum(exps) <= 3:
            basis.append(monomial_source(exps))
    return basis


__all__ = [
    "CATALOGUE",
    "ManufacturedCase",
    "boundary_samples",
    "case_names",
    "clamped_defect",
    "cubic_basis",
    "manufactured_pair",
    "monomial_source",
    "tensor_case",
    "zero_case",
]
