"""Discrete geometry of the unit cube: the grid, its point sets and faces.

All lattice points are integer multi-indices in units of ``h = 1/m``. Arrays
covering the extended grid use the *box layout*: shape ``(m + 3,) * n`` where
array index ``k`` holds the point with coordinate ``(k - 1) * h``, so the box
spans ``-h .. 1 + h`` in every axis.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterator, List, Sequence, Tuple

import numpy as np

from .errors import AxisError, GridSizeError

LOGGER = logging.getLogger(__name__)

MultiIndex = Tuple[int, ...]

#: Box-layout array index of the lattice coordinate 0.
OFFSET = 1


class PointTag(str, enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    GHOST = "ghost"
    OUTSIDE = "outside"


@dataclass(frozen=True, order=True)
class Face:
    """One face of the cube: ``x[axis] == 0`` (side 0) or ``x[axis] == 1`` (side 1)."""

    axis: int
    side: int

    @property
    def normal_sign(self) -> int:
        """Sign of the outward unit normal along ``axis``."""
        return -1 if self.side == 0 else 1

    def __str__(self) -> str:
        return f"x{self.axis + 1}={self.side}"


@dataclass(frozen=True)
class PointClass:
    tag: PointTag
    faces: Tuple[Face, ...] = ()
    singular: bool = False
    near_singular: bool = False


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Uniform grid on the unit cube with its interior, boundary and ghost sets.

    The masks are materialized once and never mutated, so a single instance
    may be shared between threads or copied into worker processes.
    """

    n: int
    m: int
    masks: Dict[str, np.ndarray] = field(init=False, repr=False)
    flat_index: Dict[str, np.ndarray] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.n < 1 or self.m < 4:
            raise GridSizeError(self.n, self.m)
        masks = _build_masks(self.n, self.m)
        for mask in masks.values():
            mask.setflags(write=False)
        flat = {}
        for region in ("interior", "boundary", "member"):
            idx = np.flatnonzero(masks[region].ravel())
            idx.setflags(write=False)
            flat[region] = idx
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "flat_index", flat)

    def __reduce__(self):
        return (GridSpec, (self.n, self.m))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridSpec):
            return NotImplemented
        return (self.n, self.m) == (other.n, other.m)

    def __hash__(self) -> int:
        return hash((self.n, self.m))

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @property
    def box_shape(self) -> Tuple[int, ...]:
        return (self.m + 3,) * self.n

    @property
    def interior_mask(self) -> np.ndarray:
        return self.masks["interior"]

    @property
    def boundary_mask(self) -> np.ndarray:
        return self.masks["boundary"]

    @property
    def ghost_mask(self) -> np.ndarray:
        return self.masks["ghost"]

    @property
    def member_mask(self) -> np.ndarray:
        """Points of the extended grid (interior, boundary and ghost layer)."""
        return self.masks["member"]

    @property
    def closed_mask(self) -> np.ndarray:
        return self.masks["closed"]

    @property
    def singular_mask(self) -> np.ndarray:
        return self.masks["singular"]

    @property
    def mirror_mask(self) -> np.ndarray:
        """Ghosts that reflect a non-singular boundary point across one face."""
        return self.masks["mirror"]

    @property
    def interior_slices(self) -> Tuple[slice, ...]:
        return (slice(OFFSET + 1, OFFSET + self.m),) * self.n

    @property
    def interior_shape(self) -> Tuple[int, ...]:
        return (self.m - 1,) * self.n

    def count(self, region: str) -> int:
        return int(self.masks[region].sum())

    def coordinates(self) -> np.ndarray:
        """Physical coordinates of every box point, shape ``box_shape + (n,)``."""
        axes = [(np.arange(self.m + 3) - OFFSET) * self.h] * self.n
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def points(self, region: str) -> np.ndarray:
        """Integer multi-indices of ``region`` in lexicographic order, shape ``(N, n)``."""
        return np.argwhere(self.masks[region]) - OFFSET

    def iter_points(self, region: str) -> Iterator[MultiIndex]:
        for row in self.points(region):
            yield tuple(int(v) for v in row)

    def box_index(self, idx: Sequence[int]) -> Tuple[int, ...]:
        return tuple(int(v) + OFFSET for v in idx)

    def in_box(self, idx: Sequence[int]) -> bool:
        return len(idx) == self.n and all(-1 <= v <= self.m + 1 for v in idx)

    def offset(self, idx: Sequence[int], region: str = "member") -> int:
        """Flat position of ``idx`` within ``region``; ``-1`` if it is not a member."""
        if not self.in_box(idx):
            return -1
        mask = self.masks[region]
        box = self.box_index(idx)
        if not mask[box]:
            return -1
        flat = int(np.ravel_multi_index(box, self.box_shape))
        return int(np.searchsorted(self.flat_index[region], flat))

    def check_axis(self, axis: int) -> int:
        if not 0 <= axis < self.n:
            raise AxisError(f"Axis {axis} out of range for dimension {self.n}")
        return axis


def _build_masks(n: int, m: int) -> Dict[str, np.ndarray]:
    coords = np.indices((m + 3,) * n) - OFFSET
    closed = np.all((coords >= 0) & (coords <= m), axis=0)
    interior = np.all((coords >= 1) & (coords <= m - 1), axis=0)
    boundary = closed & ~interior
    on_face = (coords == 0) | (coords == m)
    outside = (coords < 0) | (coords > m)
    member = np.ones(coords.shape[1:], dtype=bool)
    if n >= 2:
        # The 2^n extreme corners {-h, 1+h}^n are not part of the extended grid.
        member &= ~np.all(outside, axis=0)
    ghost = member & ~closed
    singular = boundary & (on_face.sum(axis=0) >= 2)
    # A ghost mirrors its neighbour only when exactly one coordinate leaves the
    # cube and the boundary point it sits next to is not on an edge or vertex.
    tangential_inner = np.where(outside, True, (coords >= 1) & (coords <= m - 1))
    mirror = ghost & (outside.sum(axis=0) == 1) & np.all(tangential_inner, axis=0)
    return {
        "interior": interior,
        "boundary": boundary,
        "ghost": ghost,
        "member": member,
        "closed": closed,
        "singular": singular,
        "mirror": mirror,
    }


def build_grid(n: int, m: int) -> GridSpec:
    """Construct the grid for ``Ω = (0,1)^n`` with spacing ``h = 1/m``.

    Raises:
        GridSizeError: if ``n < 1`` or ``m < 4``.
    """
    grid = GridSpec(n=n, m=m)
    LOGGER.debug(
        "Built grid n=%d m=%d: %d interior, %d boundary, %d ghost points",
        n,
        m,
        grid.count("interior"),
        grid.count("boundary"),
        grid.count("ghost"),
    )
    return grid


def faces(grid: GridSpec) -> List[Face]:
    return [Face(axis, side) for axis in range(grid.n) for side in (0, 1)]


def faces_of(grid: GridSpec, idx: Sequence[int]) -> Tuple[Face, ...]:
    found = []
    for axis, value in enumerate(idx):
        if value == 0:
            found.append(Face(axis, 0))
        elif value == grid.m:
            found.append(Face(axis, 1))
    return tuple(found)


def classify_point(grid: GridSpec, idx: Sequence[int]) -> PointClass:
    """Classify a multi-index against the interior, boundary and ghost sets."""
    idx = tuple(int(v) for v in idx)
    if not grid.in_box(idx) or not grid.member_mask[grid.box_index(idx)]:
        return PointClass(PointTag.OUTSIDE)
    box = grid.box_index(idx)
    if grid.interior_mask[box]:
        return PointClass(PointTag.INTERIOR)
    if grid.boundary_mask[box]:
        return PointClass(
            PointTag.BOUNDARY,
            faces=faces_of(grid, idx),
            singular=bool(grid.singular_mask[box]),
        )
    return PointClass(PointTag.GHOST, near_singular=not bool(grid.mirror_mask[box]))


def gamma_ij_mask(grid: GridSpec, i: int, j: int) -> np.ndarray:
    """Box mask of boundary points ``z`` whose square ``z + h{0, e_i, -e_j, e_i - e_j}`` stays in the closed cube."""
    grid.check_axis(i)
    grid.check_axis(j)
    if i == j:
        raise AxisError(f"gamma_ij requires distinct axes (got i = j = {i})")
    coords = np.indices(grid.box_shape) - OFFSET
    return grid.boundary_mask & (coords[i] <= grid.m - 1) & (coords[j] >= 1)


def gamma_ij(grid: GridSpec, i: int, j: int) -> FrozenSet[MultiIndex]:
    mask = gamma_ij_mask(grid, i, j)
    return frozenset(tuple(int(v) for v in row) for row in np.argwhere(mask) - OFFSET)


def unit(n: int, axis: int, scale: int = 1) -> MultiIndex:
    return tuple(scale if k == axis else 0 for k in range(n))


__all__ = [
    "Face",
    "GridSpec",
    "MultiIndex",
    "OFFSET",
    "PointClass",
    "PointTag",
    "build_grid",
    "classify_point",
    "faces",
    "faces_of",
    "gamma_ij",
    "gamma_ij_mask",
    "unit",
]
