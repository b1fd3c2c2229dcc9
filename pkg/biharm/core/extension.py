"""Reflection extension, face Fourier analysis and the discrete inverse trace.

The pipeline in :func:`build_E_hat` turns boundary derivative data of an
extended source into a lattice field with zero boundary values and matching
normal differences. Per face ``x_i = 0`` it runs: face data, period-2
Fourier coefficients, the exponential lift in the normal direction, a tensor
cutoff and the tangential restriction ``R_h`` (or ``R*_h``).
"""

from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .difference_ops import BcScheme, LatticeField
from .discrete_norms import FaceField
from .errors import ConstructionDefectError, SupportError, ValidationError
from .lattice import OFFSET, GridSpec
from .mollifier import SourceFunction

LOGGER = logging.getLogger(__name__)

#: Support bound for sources handed to :func:`extend_even`.
SUPPORT_BOUND = 2.0 / 3.0
SUPPORT_SAMPLES = 31
SUPPORT_TOLERANCE = 1e-12

DEFECT_TOLERANCE = 1e-8


class CoefficientRole(str, enum.Enum):
    EXTEND = "extend"
    RESTRICT = "restrict"


class TraceVariant(str, enum.Enum):
    CENTERED = "centered"
    ONE_SIDED = "one_sided"

    @classmethod
    def for_scheme(cls, scheme: "BcScheme | str") -> "TraceVariant":
        return cls.CENTERED if BcScheme.parse(scheme) is BcScheme.CENTERED_MIRROR else cls.ONE_SIDED

    @classmethod
    def parse(cls, value: "TraceVariant | str") -> "TraceVariant":
        if isinstance(value, TraceVariant):
            return value
        normalized = value.strip().lower().replace("-", "_")
        if normalized in ("centered", "mirror"):
            return cls.CENTERED
        if normalized in ("one_sided", "star", "onesided"):
            return cls.ONE_SIDED
        raise ValidationError(f"Unknown trace variant {value!r}")


@dataclass(frozen=True)
class ExtensionCoefficients:
    """Reflection weights ``(λ_1, λ_{-1}, λ_{-2})`` with ``λ_1 = 1``."""

    lam_m1: float
    lam_m2: float
    role: CoefficientRole

    @classmethod
    def solve(cls, role: "CoefficientRole | str") -> "ExtensionCoefficients":
        """Solve ``λ_{-1} + 2^k λ_{-2} = (-1)^k`` (extend, k = 2, 3) or ``(-1)^{k+1}`` (restrict, k = 0, 1)."""
        role = CoefficientRole(role)
        ks = (2, 3) if role is CoefficientRole.EXTEND else (0, 1)
        shift = 0 if role is CoefficientRole.EXTEND else 1
        matrix = np.array([[1.0, 2.0**k] for k in ks])
        rhs = np.array([(-1.0) ** (k + shift) for k in ks])
        lam_m1, lam_m2 = np.linalg.solve(matrix, rhs)
        return cls(float(lam_m1), float(lam_m2), role)

    @property
    def lam_1(self) -> float:
        return 1.0

    def residuals(self) -> Tuple[float, float]:
        ks = (2, 3) if self.role is CoefficientRole.EXTEND else (0, 1)
        shift = 0 if self.role is CoefficientRole.EXTEND else 1
        return tuple(
            abs(self.lam_m1 + self.lam_m2 * 2.0**k - (-1.0) ** (k + shift)) for k in ks
        )  # type: ignore[return-value]


EXTEND_COEFFS = ExtensionCoefficients.solve(CoefficientRole.EXTEND)
RESTRICT_COEFFS = ExtensionCoefficients.solve(CoefficientRole.RESTRICT)


# --------------------------------------------------------------------- #
# Reflection extension
# --------------------------------------------------------------------- #
def _reflect_sum(
    func: Callable[[np.ndarray], np.ndarray],
    points: np.ndarray,
    coeffs: ExtensionCoefficients,
    bound: float,
    axis_factor: Optional[Tuple[int, int]] = None,
) -> np.ndarray:
    """``Σ_ε Π λ_{ε_a} · func(ε x)`` with ``ε_a = 1`` for ``x_a >= 0`` and ``ε_a ∈ {-1, -2}`` otherwise.

    ``axis_factor = (axis, power)`` multiplies each term by ``ε_axis ** power``
    (chain rule for derivatives of the reflected function). Terms whose
    argument leaves ``[0, bound)`` are zero.
    """
    n = points.shape[-1]
    out = np.zeros(points.shape[:-1])
    negative = points < 0.0
    choices = ((1, 1.0), (-1, coeffs.lam_m1), (-2, coeffs.lam_m2))
    for combo in itertools.product(range(3), repeat=n):
        weight = np.ones(points.shape[:-1])
        args = np.empty_like(points)
        for a, code in enumerate(combo):
            eps, lam = choices[code]
            applies = ~negative[..., a] if code == 0 else negative[..., a]
            weight = weight * np.where(applies, lam, 0.0)
            args[..., a] = eps * points[..., a]
            if axis_factor is not None and axis_factor[0] == a:
                weight = weight * float(eps) ** axis_factor[1]
        inside = np.all((args >= 0.0) & (args < bound), axis=-1) & (weight != 0.0)
        if np.any(inside):
            out[inside] += weight[inside] * np.asarray(func(args[inside]), dtype=float)
    return out


def _support_leak(u: SourceFunction, bound: float) -> float:
    """Largest ``|u|`` sampled on the part of ``[0, 1]^n`` with some coordinate at or past ``bound``, relative."""
    axis = np.union1d(np.linspace(0.0, 1.0, SUPPORT_SAMPLES), [bound])
    points = np.stack(np.meshgrid(*([axis] * u.dim), indexing="ij"), axis=-1).reshape(-1, u.dim)
    values = np.abs(u(points))
    outside = np.max(points, axis=-1) >= bound
    scale = max(1.0, float(values.max(initial=0.0)))
    return float(values[outside].max(initial=0.0)) / scale


def extend_even(u: SourceFunction, *, bound: float = SUPPORT_BOUND) -> SourceFunction:
    """Tensor reflection extension of ``u`` from the orthant to all of R^n.

    ``u`` must vanish outside ``[0, bound)^n``; the result vanishes outside
    ``(-bound, bound)^n``. Closed-form first and second partials and the
    Laplacian are carried over when ``u`` provides them.

    Raises:
        SupportError: if ``u`` declares a support reaching past ``bound`` or
            is nonzero at a sampled point with a coordinate ``>= bound``.
    """
    if u.support is not None and (u.support[0] < 0.0 or u.support[1] > bound + 1e-12):
        raise SupportError(
            f"{u.name} is supported in {u.support}, outside [0, {bound:.4g})"
        )
    leak = _support_leak(u, bound)
    if leak > SUPPORT_TOLERANCE:
        raise SupportError(f"{u.name} is nonzero past {bound:.4g} (relative size {leak:.3e})")
    coeffs = EXTEND_COEFFS

    def func(points: np.ndarray) -> np.ndarray:
        return _reflect_sum(u, np.asarray(points, dtype=float), coeffs, bound)

    def carried(
        inner: Callable[[np.ndarray], np.ndarray], axis: int, power: int
    ) -> Callable[[np.ndarray], np.ndarray]:
        def reflected(points: np.ndarray) -> np.ndarray:
            return _reflect_sum(inner, np.asarray(points, dtype=float), coeffs, bound, (axis, power))

        return reflected

    firsts = None
    if u.first_partials is not None:
        firsts = tuple(carried(u.first_partials[a], a, 1) for a in range(u.dim))

    partials = None
    laplacian = None
    if u.second_partials is not None:
        partials = tuple(carried(u.second_partials[a], a, 2) for a in range(u.dim))

        def laplacian(points: np.ndarray) -> np.ndarray:
            return sum(p(points) for p in partials)  # type: ignore[union-attr]

    return SourceFunction(
        func,
        u.dim,
        name=f"ext {u.name}",
        smoothness=u.smoothness,
        support=(-bound, bound),
        second_partials=partials,
        laplacian=laplacian,
        first_partials=firsts,
    )


def _smooth_step(s: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for ``s <= 0``, 1 for ``s >= 1``."""
    return _smooth_step_jet(s)[0]


def _smooth_step_jet(s: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The step ``a / (a + b)`` with ``a = exp(-1/s)``, ``b = exp(-1/(1-s))`` and its first two derivatives."""
    s = np.asarray(s, dtype=float)
    value = np.where(s >= 1.0, 1.0, 0.0)
    d1 = np.zeros_like(value)
    d2 = np.zeros_like(value)
    ramp = (s > 0.0) & (s < 1.0)
    if np.any(ramp):
        t = s[ramp]
        r = 1.0 - t
        a = np.exp(-1.0 / t)
        b = np.exp(-1.0 / r)
        da = a / t**2
        db = -b / r**2
        dda = a * (1.0 / t**4 - 2.0 / t**3)
        ddb = b * (1.0 / r**4 - 2.0 / r**3)
        total = a + b
        numer = da * b - a * db
        value[ramp] = a / total
        d1[ramp] = numer / total**2
        d2[ramp] = (dda * b - a * ddb) / total**2 - 2.0 * numer * (da + db) / total**3
    return value, d1, d2


def corner_bump(t: np.ndarray, flat: float = 1.0 / 3.0, end: float = 0.6) -> np.ndarray:
    """Equals 1 for ``t <= flat`` and 0 for ``t >= end``."""
    return 1.0 - _smooth_step((np.asarray(t, dtype=float) - flat) / (end - flat))


def corner_bump_jet(
    t: np.ndarray, flat: float = 1.0 / 3.0, end: float = 0.6
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """:func:`corner_bump` with its first and second derivatives in ``t``."""
    width = end - flat
    step, d1, d2 = _smooth_step_jet((np.asarray(t, dtype=float) - flat) / width)
    return 1.0 - step, -d1 / width, -d2 / width**2


def localize_to_corner(u: SourceFunction, *, flat: float = 1.0 / 3.0, end: float = 0.6) -> SourceFunction:
    """Multiply ``u`` by a smooth corner bump so it vanishes outside ``[0, end]^n``.

    Values are unchanged on ``[0, flat]^n`` and the result is zero for
    negative coordinates. Closed-form first partials are carried when ``u``
    has them; with second partials as well the product also keeps second
    partials and a Laplacian
    (``∂_aa(wu) = w_aa u + 2 w_a u_a + w u_aa``).
    """
    if not 0.0 < flat < end <= SUPPORT_BOUND:
        raise ValidationError(f"Need 0 < flat < end <= {SUPPORT_BOUND:.4g}, got {flat}, {end}")

    def localized(
        points: np.ndarray, combine: Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    ) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        bump, d1, d2 = corner_bump_jet(points, flat, end)
        out = np.zeros(points.shape[:-1])
        active = np.all(points >= 0.0, axis=-1) & np.all(points < end, axis=-1)
        if np.any(active):
            out[active] = combine(points[active], bump[active], d1[active], d2[active])
        return out

    def func(points: np.ndarray) -> np.ndarray:
        return localized(points, lambda p, bump, d1, d2: np.prod(bump, axis=-1) * u(p))

    firsts_in = u.first_partials
    seconds_in = u.second_partials
    firsts = None
    partials = None
    laplacian = None
    if firsts_in is not None:

        def make_first(axis: int) -> Callable[[np.ndarray], np.ndarray]:
            def combine(p: np.ndarray, bump: np.ndarray, d1: np.ndarray, d2: np.ndarray) -> np.ndarray:
                others = np.prod(np.delete(bump, axis, axis=-1), axis=-1)
                return others * (d1[..., axis] * u(p) + bump[..., axis] * firsts_in[axis](p))

            return lambda points: localized(points, combine)

        firsts = tuple(make_first(a) for a in range(u.dim))

    if firsts_in is not None and seconds_in is not None:

        def make(axis: int) -> Callable[[np.ndarray], np.ndarray]:
            def combine(p: np.ndarray, bump: np.ndarray, d1: np.ndarray, d2: np.ndarray) -> np.ndarray:
                others = np.prod(np.delete(bump, axis, axis=-1), axis=-1)
                w = others * bump[..., axis]
                w_a = others * d1[..., axis]
                w_aa = others * d2[..., axis]
                return w_aa * u(p) + 2.0 * w_a * firsts_in[axis](p) + w * seconds_in[axis](p)

            return lambda points: localized(points, combine)

        partials = tuple(make(a) for a in range(u.dim))

        def laplacian(points: np.ndarray) -> np.ndarray:
            return sum(p(points) for p in partials)  # type: ignore[union-attr]

    return SourceFunction(
        func,
        u.dim,
        name=f"local {u.name}",
        smoothness=u.smoothness,
        support=(0.0, end),
        second_partials=partials,
        laplacian=laplacian,
        first_partials=firsts,
    )


# --------------------------------------------------------------------- #
# Face Fourier series
# --------------------------------------------------------------------- #
@dataclass(frozen=True, eq=False)
class FourierCoeffs:
    """Coefficients ``γ_k`` for ``k ∈ {-m+1, ..., m}^{n-1}``; array index ``k + m - 1``."""

    m: int
    n: int
    coeffs: np.ndarray

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.arange(-self.m + 1, self.m + 1)

    def norms(self) -> np.ndarray:
        """Euclidean norm ``|k|`` of every wavenumber vector, shaped like ``coeffs``."""
        k = self.wavenumbers.astype(float)
        if self.n == 1:
            return np.zeros(())
        grids = np.meshgrid(*([k] * (self.n - 1)), indexing="ij")
        return np.sqrt(sum(g**2 for g in grids))


def _dft_matrix(m: int, sign: float) -> np.ndarray:
    """``exp(sign · iπ k ξ)`` with rows ``k ∈ {-m+1..m}`` and columns ``ξ = j/m``, ``j ∈ {-m..m-1}``."""
    k = np.arange(-m + 1, m + 1)
    j = np.arange(-m, m)
    return np.exp(sign * 1j * np.pi * np.outer(k, j) / m)


def _apply_along(matrix: np.ndarray, array: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(matrix, array, axes=(1, axis)), 0, axis)


def periodize(g: FaceField, m: int) -> np.ndarray:
    """Dense values on ``[-1, 1)^{n-1}``: array index ``j + m`` holds the point ``j h``.

    Raises:
        SupportError: if a stored point with a nonzero value lies outside ``[-1, 1)^{n-1}``.
    """
    d = g.n - 1
    dense = np.zeros((2 * m,) * d)
    if g.size == 0:
        return dense
    pts = g.points
    inside = np.all((pts >= -m) & (pts <= m - 1), axis=1)
    if np.any(~inside & (g.values != 0.0)):
        raise SupportError("Face data reaches outside [-1, 1)^{n-1}")
    idx = tuple((pts[inside] + m).T)
    np.add.at(dense, idx, g.values[inside])
    return dense


def fourier_coeffs(g: FaceField, m: int) -> FourierCoeffs:
    """``γ_k = (h/2)^{n-1} Σ_ξ g(ξ) exp(-iπ k·ξ)`` over the lattice points of ``[-1, 1)^{n-1}``."""
    if abs(g.h * m - 1.0) > 1e-12:
        raise ValidationError(f"Face spacing {g.h} does not match m={m}")
    dense = periodize(g, m).astype(complex)
    forward = _dft_matrix(m, -1.0)
    for axis in range(g.n - 1):
        dense = _apply_along(forward, dense, axis)
    return FourierCoeffs(m, g.n, dense * (0.5 / m) ** (g.n - 1))


def inverse_series(gamma: FourierCoeffs) -> np.ndarray:
    """Evaluate ``Σ_k γ_k exp(iπ k·ξ)`` at the lattice points of ``[-1, 1)^{n-1}``."""
    out = np.asarray(gamma.coeffs, dtype=complex)
    backward = _dft_matrix(gamma.m, 1.0).T
    for axis in range(gamma.n - 1):
        out = _apply_along(backward, out, axis)
    return out


@dataclass(frozen=True, eq=False)
class TraceSlab:
    """Values on ``[-1, 1)^{n-1} × levels`` with tangential index ``j + m`` and level index ``l - level_min``.

    The last array axis is the normal direction.
    """

    m: int
    n: int
    level_min: int
    values: np.ndarray

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @property
    def levels(self) -> np.ndarray:
        return np.arange(self.level_min, self.level_min + self.values.shape[-1])

    def level(self, l: int) -> np.ndarray:
        return self.values[..., l - self.level_min]

    def coordinates(self) -> List[np.ndarray]:
        """Physical coordinates per axis (tangential axes first, normal last)."""
        tangential = np.arange(-self.m, self.m) * self.h
        return [tangential] * (self.n - 1) + [self.levels * self.h]


def inverse_trace(
    gamma: FourierCoeffs,
    grid: GridSpec,
    variant: "TraceVariant | str",
    *,
    level_max: Optional[int] = None,
) -> TraceSlab:
    """Exponential lift of face data into the normal direction.

    Evaluates ``Σ_k γ_k / N_k · x_n e^{-|k| x_n} e^{iπ k·x'}`` with
    ``N_k = cosh(|k| h)`` (centered) or ``e^{|k| h}`` (one-sided) at levels
    ``x_n = -h .. level_max · h`` (default ``2``). The real part is returned.
    """
    variant = TraceVariant.parse(variant)
    if gamma.m != grid.m or gamma.n != grid.n:
        raise ValidationError("Fourier coefficients do not match the grid")
    h = grid.h
    k_norm = gamma.norms()
    normalizer = np.cosh(k_norm * h) if variant is TraceVariant.CENTERED else np.exp(k_norm * h)
    base = np.asarray(gamma.coeffs, dtype=complex) / normalizer
    level_max = 2 * grid.m if level_max is None else level_max
    levels = np.arange(-1, level_max + 1)
    backward = _dft_matrix(grid.m, 1.0).T
    slabs = []
    max_imag = 0.0
    for l in levels:
        xn = l * h
        coeff = base * (xn * np.exp(-k_norm * xn))
        values = coeff
        for axis in range(grid.n - 1):
            values = _apply_along(backward, values, axis)
        values = np.asarray(values)
        max_imag = max(max_imag, float(np.max(np.abs(values.imag))) if values.size else 0.0)
        slabs.append(values.real)
    LOGGER.debug("inverse_trace %s: max imaginary part %.3e", variant.value, max_imag)
    return TraceSlab(grid.m, grid.n, -1, np.stack(slabs, axis=-1))


# --------------------------------------------------------------------- #
# Cutoff
# --------------------------------------------------------------------- #
@dataclass(frozen=True)
class CutoffProfile:
    """Even cutoff: 1 on ``[-plateau, plateau]``, 0 outside ``(-outer, outer)``, quintic ramp between."""

    plateau: float = 0.75
    outer: float = 0.875

    def __post_init__(self) -> None:
        if not 0.0 < self.plateau < self.outer <= 1.0:
            raise ValidationError(
                f"Cutoff needs 0 < plateau < outer <= 1, got {self.plateau}, {self.outer}"
            )

    def __call__(self, t) -> np.ndarray:
        a = np.abs(np.asarray(t, dtype=float))
        s = np.clip((a - self.plateau) / (self.outer - self.plateau), 0.0, 1.0)
        ramp = s**3 * (10.0 - 15.0 * s + 6.0 * s**2)
        return 1.0 - ramp


DEFAULT_CUTOFF = CutoffProfile()


def _tensor_cutoff(axes: Sequence[np.ndarray], profile: CutoffProfile) -> np.ndarray:
    weights = [profile(a) for a in axes]
    out = weights[0]
    for w in weights[1:]:
        out = np.multiply.outer(out, w)
    return out


def apply_cutoff(field, profile: CutoffProfile = DEFAULT_CUTOFF):
    """Multiply a :class:`LatticeField` or :class:`TraceSlab` by ``η(x_1)···η(x_n)``."""
    if isinstance(field, TraceSlab):
        weight = _tensor_cutoff(field.coordinates(), profile)
        return TraceSlab(field.m, field.n, field.level_min, field.values * weight)
    if isinstance(field, LatticeField):
        coords = field.grid.coordinates()
        weight = np.prod(profile(coords), axis=-1)
        return LatticeField.from_box(field.grid, field.as_box() * weight)
    raise ValidationError(f"apply_cutoff does not support {type(field).__name__}")


# --------------------------------------------------------------------- #
# Discrete restriction R_h / R*_h
# --------------------------------------------------------------------- #
def _read_shifted(values: np.ndarray, origin: int, axis: int, factor: int) -> np.ndarray:
    """``out[x] = values[factor · x]`` along ``axis`` (zero when outside the array)."""
    size = values.shape[axis]
    coords = np.arange(size) + origin
    src = factor * coords - origin
    valid = (src >= 0) & (src < size)
    taken = np.take(values, np.clip(src, 0, size - 1), axis=axis)
    shape = [1] * values.ndim
    shape[axis] = size
    return taken * valid.reshape(shape)


def project_Rh(
    values: np.ndarray,
    origin: Sequence[int],
    variant: str = "mirror",
    *,
    axes: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """Tensor restriction ``u(x) - 3u(-x) + 2u(-2x)`` per axis on a dense face slice.

    Args:
        values: dense array; index 0 along axis ``a`` sits at lattice coordinate ``origin[a]``.
        origin: integer lattice coordinate of index 0 per axis.
        variant: ``"mirror"`` sets the ``-h`` layer of each axis to the value at
            ``+h`` and zeroes points with two or more ``-h`` coordinates;
            ``"star"`` is zero outside the closed orthant.
        axes: axes to restrict (default all).
    """
    values = np.asarray(values, dtype=float)
    if variant not in ("mirror", "star"):
        raise ValidationError(f"Unknown restriction variant {variant!r}")
    origin = [int(o) for o in origin]
    axes = list(range(values.ndim)) if axes is None else list(axes)
    coeffs = RESTRICT_COEFFS
    out = values
    for axis in axes:
        restricted = (
            out
            + coeffs.lam_m1 * _read_shifted(out, origin[axis], axis, -1)
            + coeffs.lam_m2 * _read_shifted(out, origin[axis], axis, -2)
        )
        coords = np.arange(out.shape[axis]) + origin[axis]
        shape = [1] * out.ndim
        shape[axis] = out.shape[axis]
        orthant = (coords >= 0).reshape(shape)
        result = np.where(orthant, restricted, 0.0)
        if variant == "mirror" and np.any(coords == -1) and np.any(coords == 1):
            ghost = int(np.flatnonzero(coords == -1)[0])
            source = int(np.flatnonzero(coords == 1)[0])
            index = [slice(None)] * out.ndim
            src_index = [slice(None)] * out.ndim
            index[axis] = ghost
            src_index[axis] = source
            result[tuple(index)] = result[tuple(src_index)]
        out = result
    if variant == "mirror" and len(axes) >= 2:
        below = np.zeros(values.shape, dtype=int)
        for axis in axes:
            coords = np.arange(values.shape[axis]) + origin[axis]
            shape = [1] * values.ndim
            shape[axis] = values.shape[axis]
            below = below + (coords == -1).reshape(shape).astype(int)
        out = np.where(below >= 2, 0.0, out)
    return out


# --------------------------------------------------------------------- #
# Face data and the Ê pipeline
# --------------------------------------------------------------------- #
def _tangential_axes(n: int, axis: int) -> List[int]:
    return [a for a in range(n) if a != axis]


def face_data(
    u_tilde: SourceFunction,
    grid: GridSpec,
    axis: int,
    variant: "TraceVariant | str",
) -> FaceField:
    """Zero-extended normal difference of ``u_tilde`` on the hyperplane ``x_axis = 0``.

    The value is ``D_{0,axis} u_tilde`` (centered) or ``D_{-axis} u_tilde``
    (one-sided) where tangential coordinates before ``axis`` are positive and
    those after ``axis`` are non-negative, and zero otherwise. Stored points
    cover ``0 .. m`` per tangential axis.
    """
    variant = TraceVariant.parse(variant)
    grid.check_axis(axis)
    n, m, h = grid.n, grid.m, grid.h
    tangential = _tangential_axes(n, axis)
    idx = np.arange(0, m + 1)
    if tangential:
        mesh = np.meshgrid(*([idx] * len(tangential)), indexing="ij")
        tpts = np.stack([g.reshape(-1) for g in mesh], axis=-1)
    else:
        tpts = np.zeros((1, 0), dtype=np.int64)
    keep = np.ones(tpts.shape[0], dtype=bool)
    for pos, a in enumerate(tangential):
        if a < axis:
            keep &= tpts[:, pos] > 0
    points = np.zeros((tpts.shape[0], n))
    for pos, a in enumerate(tangential):
        points[:, a] = tpts[:, pos] * h
    step = np.zeros(n)
    step[axis] = h
    if variant is TraceVariant.CENTERED:
        diff = (u_tilde(points + step) - u_tilde(points - step)) / (2.0 * h)
    else:
        diff = (u_tilde(points) - u_tilde(points - step)) / h
    values = np.where(keep, diff, 0.0)
    return FaceField(axis, n, h, tpts, values)


@dataclass
class EHatResult:
    field: LatticeField
    face_data: List[FaceField] = field(default_factory=list)
    boundary_defect: float = 0.0
    derivative_defect: float = 0.0


def _place_face_term(grid: GridSpec, axis: int, slab_values: np.ndarray) -> np.ndarray:
    """Move a ``(tangential..., normal)`` array over box ranges into box layout."""
    tangential = _tangential_axes(grid.n, axis)
    order = tangential + [axis]
    inverse = np.argsort(order)
    return np.transpose(slab_values, axes=inverse)


def build_E_hat(
    u_tilde: SourceFunction,
    grid: GridSpec,
    variant: "TraceVariant | BcScheme | str",
    *,
    profile: CutoffProfile = DEFAULT_CUTOFF,
    tolerance: float = DEFECT_TOLERANCE,
    return_details: bool = False,
):
    """Lattice field with zero values on Γ^h whose normal differences match ``u_tilde``.

    Raises:
        ConstructionDefectError: if either boundary post-check exceeds
            ``tolerance · max(1, max |g|)``.
    """
    if isinstance(variant, BcScheme):
        variant = TraceVariant.for_scheme(variant)
    variant = TraceVariant.parse(variant)
    n, m = grid.n, grid.m
    restriction = "mirror" if variant is TraceVariant.CENTERED else "star"
    total = np.zeros(grid.box_shape)
    data: List[FaceField] = []
    for axis in range(n):
        g = face_data(u_tilde, grid, axis, variant)
        data.append(g)
        gamma = fourier_coeffs(g, m)
        slab = apply_cutoff(inverse_trace(gamma, grid, variant, level_max=m + 1), profile)
        # Pad the tangential window [-m, m-1] up to m+1; the cutoff is zero there.
        pad = [(0, 2)] * (n - 1) + [(0, 0)]
        work = np.pad(slab.values, pad)
        origin = [-m] * (n - 1)
        projected = project_Rh(work, origin + [0], restriction, axes=list(range(n - 1)))
        # Crop the tangential range to the box, -1 .. m+1.
        crop = tuple([slice(m - 1, 2 * m + 2)] * (n - 1) + [slice(None)])
        total += _place_face_term(grid, axis, projected[crop])
    total = np.where(grid.member_mask, total, 0.0)
    e_hat = LatticeField.from_box(grid, total)
    scale = max(1.0, max((float(np.max(np.abs(g.values))) if g.size else 0.0) for g in data))
    boundary_defect, derivative_defect = _check_e_hat(e_hat, u_tilde, grid, variant)
    limit = tolerance * scale
    if boundary_defect > limit:
        raise ConstructionDefectError("boundary value", boundary_defect, limit)
    if derivative_defect > limit:
        raise ConstructionDefectError("normal difference", derivative_defect, limit)
    LOGGER.info(
        "Built E_hat (%s, n=%d, m=%d): boundary defect %.2e, derivative defect %.2e",
        variant.value,
        n,
        m,
        boundary_defect,
        derivative_defect,
    )
    if return_details:
        return EHatResult(e_hat, data, boundary_defect, derivative_defect)
    return e_hat


def _check_e_hat(
    e_hat: LatticeField,
    u_tilde: SourceFunction,
    grid: GridSpec,
    variant: TraceVariant,
) -> Tuple[float, float]:
    box = e_hat.as_box()
    coords = grid.coordinates()
    u_box = np.where(grid.member_mask, u_tilde(coords), 0.0)
    boundary_defect = float(np.max(np.abs(box[grid.boundary_mask]), initial=0.0))
    h, m = grid.h, grid.m
    worst = 0.0
    regular = grid.boundary_mask & ~grid.singular_mask
    for axis in range(grid.n):
        for side, level in ((0, 0), (1, m)):
            sl = [slice(None)] * grid.n
            sl[axis] = OFFSET + level
            face_mask = regular[tuple(sl)]
            if not np.any(face_mask):
                continue
            plus = list(sl)
            minus = list(sl)
            plus[axis] = OFFSET + level + 1
            minus[axis] = OFFSET + level - 1
            if variant is TraceVariant.CENTERED:
                got = (box[tuple(plus)] - box[tuple(minus)]) / (2 * h)
                want = (u_box[tuple(plus)] - u_box[tuple(minus)]) / (2 * h)
            elif side == 0:
                got = (box[tuple(sl)] - box[tuple(minus)]) / h
                want = (u_box[tuple(sl)] - u_box[tuple(minus)]) / h
            else:
                got = (box[tuple(plus)] - box[tuple(sl)]) / h
                want = (u_box[tuple(plus)] - u_box[tuple(sl)]) / h
            worst = max(worst, float(np.max(np.abs(got - want)[face_mask])))
    return boundary_defect, worst


__all__ = [
    "CoefficientRole",
    "CutoffProfile",
    "DEFAULT_CUTOFF",
    "EHatResult",
    "EXTEND_COEFFS",
    "ExtensionCoefficients",
    "FourierCoeffs",
    "RESTRICT_COEFFS",
    "TraceSlab",
    "TraceVariant",
    "apply_cutoff",
    "build_E_hat",
    "corner_bump",
    "corner_bump_jet",
    "extend_even",
    "face_data",
    "fourier_coeffs",
    "inverse_series",
    "inverse_trace",
    "localize_to_corner",
    "periodize",
    "project_Rh",
]
