"""Difference quotients, discrete Laplacian/bilaplacian and ghost filling.

Point-wise operators (``diff``, ``discrete_hessian`` ...) check that every
stencil point belongs to the extended grid. The ``*_box`` variants work on
whole box-layout arrays with zero fill past the box edge; callers decide
which output points are meaningful.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Tuple

import numpy as np

from .errors import BoundaryDataError, ShapeMismatchError, StencilDomainError, ValidationError
from .lattice import OFFSET, GridSpec, MultiIndex, unit

LOGGER = logging.getLogger(__name__)


class BcScheme(str, enum.Enum):
    """Discrete realization of the clamped boundary condition."""

    CENTERED_MIRROR = "centered"
    ONE_SIDED_ZERO = "one-sided"

    @classmethod
    def parse(cls, value: "str | BcScheme") -> "BcScheme":
        if isinstance(value, BcScheme):
            return value
        normalized = value.strip().lower().replace("_", "-")
        aliases = {
            "centered": cls.CENTERED_MIRROR,
            "centered-mirror": cls.CENTERED_MIRROR,
            "mirror": cls.CENTERED_MIRROR,
            "one-sided": cls.ONE_SIDED_ZERO,
            "one-sided-zero": cls.ONE_SIDED_ZERO,
            "onesided": cls.ONE_SIDED_ZERO,
        }
        try:
            return aliases[normalized]
        except KeyError as exc:
            raise ValidationError(f"Unknown boundary scheme {value!r}") from exc


class DiffVariant(str, enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"
    CENTERED = "centered"


@dataclass(frozen=True, eq=False)
class LatticeField:
    """Real values on the extended grid, stored in the grid's lexicographic order."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        expected = self.grid.count("member")
        if values.shape != (expected,):
            raise ShapeMismatchError(values.shape, (expected,))
        if not np.all(np.isfinite(values)):
            raise ValidationError("LatticeField values must be finite")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "LatticeField":
        return cls(grid, np.zeros(grid.count("member")))

    @classmethod
    def from_box(cls, grid: GridSpec, box: np.ndarray) -> "LatticeField":
        box = np.asarray(box, dtype=float)
        if box.shape != grid.box_shape:
            raise ShapeMismatchError(box.shape, grid.box_shape)
        return cls(grid, box.ravel()[grid.flat_index["member"]])

    @classmethod
    def from_interior(cls, grid: GridSpec, interior: np.ndarray) -> "LatticeField":
        """Field equal to ``interior`` on Ω^h and zero everywhere else."""
        return cls.from_box(grid, interior_to_box(grid, interior))

    @classmethod
    def from_function(cls, grid: GridSpec, func: Callable[[np.ndarray], np.ndarray]) -> "LatticeField":
        """Sample a vectorized ``func(points[..., n])`` at every extended-grid point."""
        coords = grid.coordinates()
        box = np.where(grid.member_mask, np.asarray(func(coords), dtype=float), 0.0)
        return cls.from_box(grid, box)

    def as_box(self) -> np.ndarray:
        box = np.zeros(self.grid.box_shape)
        box.ravel()[self.grid.flat_index["member"]] = self.values
        return box

    def interior(self) -> np.ndarray:
        return self.as_box()[self.grid.interior_slices].copy()

    def at(self, idx: Sequence[int]) -> float:
        box = self.grid.box_index(idx)
        if not self.grid.in_box(idx) or not self.grid.member_mask[box]:
            raise StencilDomainError(tuple(idx), tuple(idx))
        return float(self.as_box()[box])

    def masked(self, region: str) -> "LatticeField":
        """Copy that keeps values on ``region`` and zeroes the rest."""
        box = np.where(self.grid.masks[region], self.as_box(), 0.0)
        return LatticeField.from_box(self.grid, box)

    def _check(self, other: "LatticeField") -> None:
        if other.grid != self.grid:
            raise ShapeMismatchError(self.grid.box_shape, other.grid.box_shape)

    def __add__(self, other: "LatticeField") -> "LatticeField":
        self._check(other)
        return LatticeField(self.grid, self.values + other.values)

    def __sub__(self, other: "LatticeField") -> "LatticeField":
        self._check(other)
        return LatticeField(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "LatticeField":
        return LatticeField(self.grid, self.values * float(scalar))

    __rmul__ = __mul__


def interior_to_box(grid: GridSpec, interior: np.ndarray) -> np.ndarray:
    interior = np.asarray(interior, dtype=float)
    if interior.shape != grid.interior_shape:
        raise ShapeMismatchError(interior.shape, grid.interior_shape)
    box = np.zeros(grid.box_shape)
    box[grid.interior_slices] = interior
    return box


# --------------------------------------------------------------------- #
# Point-wise operators
# --------------------------------------------------------------------- #
def _read(box: np.ndarray, grid: GridSpec, point: MultiIndex, idx: Iterable[int]) -> float:
    idx = tuple(int(v) for v in idx)
    if not grid.in_box(idx) or not grid.member_mask[grid.box_index(idx)]:
        raise StencilDomainError(point, idx)
    return float(box[grid.box_index(idx)])


def _plus(point: Sequence[int], *offsets: MultiIndex) -> MultiIndex:
    out = list(point)
    for offset in offsets:
        out = [a + b for a, b in zip(out, offset)]
    return tuple(out)


def diff(
    field: LatticeField,
    axis: int,
    variant: "DiffVariant | str",
    point: Sequence[int],
) -> float:
    """Forward, backward or centered difference quotient along ``axis`` at ``point``."""
    grid = field.grid
    grid.check_axis(axis)
    variant = DiffVariant(variant)
    point = tuple(int(v) for v in point)
    box = field.as_box()
    e = unit(grid.n, axis)
    minus_e = unit(grid.n, axis, -1)
    h = grid.h
    if variant is DiffVariant.FORWARD:
        return (_read(box, grid, point, _plus(point, e)) - _read(box, grid, point, point)) / h
    if variant is DiffVariant.BACKWARD:
        return (_read(box, grid, point, point) - _read(box, grid, point, _plus(point, minus_e))) / h
    return (
        _read(box, grid, point, _plus(point, e)) - _read(box, grid, point, _plus(point, minus_e))
    ) / (2.0 * h)


def _mixed_at(box: np.ndarray, grid: GridSpec, point: MultiIndex, i: int, j: int) -> float:
    ei = unit(grid.n, i)
    mj = unit(grid.n, j, -1)
    value = (
        _read(box, grid, point, _plus(point, ei))
        - _read(box, grid, point, point)
        - _read(box, grid, point, _plus(point, ei, mj))
        + _read(box, grid, point, _plus(point, mj))
    )
    return value / grid.h**2


def discrete_hessian(field: LatticeField, point: Sequence[int]) -> Tuple[Tuple[float, ...], ...]:
    """The tuple ``(D_i D_{-j} v(x))_{i,j}``."""
    grid = field.grid
    point = tuple(int(v) for v in point)
    box = field.as_box()
    return tuple(
        tuple(_mixed_at(box, grid, point, i, j) for j in range(grid.n)) for i in range(grid.n)
    )


def discrete_laplacian(field: LatticeField, point: Sequence[int]) -> float:
    grid = field.grid
    point = tuple(int(v) for v in point)
    box = field.as_box()
    return sum(_mixed_at(box, grid, point, i, i) for i in range(grid.n))


def discrete_bilaplacian(field: LatticeField, point: Sequence[int]) -> float:
    grid = field.grid
    point = tuple(int(v) for v in point)
    box = field.as_box()

    def lap(at: MultiIndex) -> float:
        return sum(_mixed_at(box, grid, at, i, i) for i in range(grid.n))

    total = -2.0 * grid.n * lap(point)
    for axis in range(grid.n):
        total += lap(_plus(point, unit(grid.n, axis))) + lap(_plus(point, unit(grid.n, axis, -1)))
    return total / grid.h**2


# --------------------------------------------------------------------- #
# Whole-array operators on the box layout
# --------------------------------------------------------------------- #
def shift(box: np.ndarray, axis: int, step: int) -> np.ndarray:
    """``out[x] = box[x + step * e_axis]``, zero where that read leaves the box."""
    out = np.zeros_like(box)
    src = [slice(None)] * box.ndim
    dst = [slice(None)] * box.ndim
    size = box.shape[axis]
    if step > 0:
        dst[axis] = slice(0, size - step)
        src[axis] = slice(step, None)
    elif step < 0:
        dst[axis] = slice(-step, None)
        src[axis] = slice(0, size + step)
    else:
        return box.copy()
    out[tuple(dst)] = box[tuple(src)]
    return out


def forward_box(box: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (shift(box, axis, 1) - box) / h


def backward_box(box: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (box - shift(box, axis, -1)) / h


def centered_box(box: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (shift(box, axis, 1) - shift(box, axis, -1)) / (2.0 * h)


def mixed_box(box: np.ndarray, i: int, j: int, h: float) -> np.ndarray:
    """``D_i D_{-j}`` applied at every box point."""
    return forward_box(backward_box(box, j, h), i, h)


def hessian_box(box: np.ndarray, h: float) -> np.ndarray:
    """All second differences, shape ``(n, n) + box.shape``."""
    n = box.ndim
    return np.stack([np.stack([mixed_box(box, i, j, h) for j in range(n)]) for i in range(n)])


def laplacian_box(box: np.ndarray, h: float) -> np.ndarray:
    out = -2.0 * box.ndim * box
    for axis in range(box.ndim):
        out = out + shift(box, axis, 1) + shift(box, axis, -1)
    return out / h**2


def bilaplacian_box(box: np.ndarray, h: float) -> np.ndarray:
    return laplacian_box(laplacian_box(box, h), h)


# --------------------------------------------------------------------- #
# Ghost filling
# --------------------------------------------------------------------- #
def _axis_slice(n: int, axis: int, index: int) -> Tuple[object, ...]:
    sl: list = [slice(None)] * n
    sl[axis] = index
    return tuple(sl)


def fill_ghosts_box(box: np.ndarray, grid: GridSpec, scheme: BcScheme) -> np.ndarray:
    """Overwrite every ghost of ``box`` according to ``scheme``; boundary values are kept."""
    out = np.where(grid.ghost_mask, 0.0, box)
    if scheme is BcScheme.ONE_SIDED_ZERO:
        return out
    m = grid.m
    mirror = grid.mirror_mask
    for axis in range(grid.n):
        low_ghost = _axis_slice(grid.n, axis, OFFSET - 1)
        low_src = _axis_slice(grid.n, axis, OFFSET + 1)
        high_ghost = _axis_slice(grid.n, axis, OFFSET + m + 1)
        high_src = _axis_slice(grid.n, axis, OFFSET + m - 1)
        out[low_ghost] = np.where(mirror[low_ghost], out[low_src], out[low_ghost])
        out[high_ghost] = np.where(mirror[high_ghost], out[high_src], out[high_ghost])
    return out


def fill_ghosts(field: LatticeField, scheme: "BcScheme | str") -> LatticeField:
    """Complete a field given on Ω^h ∪ Γ^h with the ghost values of ``scheme``.

    Raises:
        BoundaryDataError: if the field is nonzero somewhere on Γ^h.
    """
    scheme = BcScheme.parse(scheme)
    box = field.as_box()
    boundary = box[field.grid.boundary_mask]
    if boundary.size and np.any(boundary != 0.0):
        raise BoundaryDataError(float(np.max(np.abs(boundary))))
    return LatticeField.from_box(field.grid, fill_ghosts_box(box, field.grid, scheme))


def complete_interior(grid: GridSpec, interior: np.ndarray, scheme: BcScheme) -> np.ndarray:
    """Box array for interior values with zero boundary and ``scheme`` ghosts."""
    return fill_ghosts_box(interior_to_box(grid, interior), grid, scheme)


__all__ = [
    "BcScheme",
    "DiffVariant",
    "LatticeField",
    "backward_box",
    "bilaplacian_box",
    "centered_box",
    "complete_interior",
    "diff",
    "discrete_bilaplacian",
    "discrete_hessian",
    "discrete_laplacian",
    "fill_ghosts",
    "fill_ghosts_box",
    "forward_box",
    "hessian_box",
    "interior_to_box",
    "laplacian_box",
    "mixed_box",
    "shift",
]
