"""Discrete inner products and norms on lattice and face fields.

Hessian-valued fields are box-layout arrays of shape ``(n, n) + box_shape``
whose entry ``[i, j]`` holds ``D_i D_{-j}``. Face fields live on a copy of
``(hZ)^{n-1}`` and are zero away from their stored support.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .difference_ops import BcScheme, LatticeField, hessian_box, shift
from .errors import ShapeMismatchError, ValidationError
from .lattice import GridSpec, gamma_ij_mask

LOGGER = logging.getLogger(__name__)

#: Default zero-collar for the H^{1/2}_h seminorm: lattice points of [-2, 2]^{n-1}.
DEFAULT_COLLAR_RADIUS = 2.0

_PAIR_CHUNK = 4096


class HessianFlavor(str, enum.Enum):
    """Which boundary weighting the Hessian inner product uses."""

    STAR = "star"
    TILDE = "tilde"

    @classmethod
    def for_scheme(cls, scheme: "BcScheme | str") -> "HessianFlavor":
        return cls.TILDE if BcScheme.parse(scheme) is BcScheme.CENTERED_MIRROR else cls.STAR


@dataclass(frozen=True, eq=False)
class FaceField:
    """Values on a lattice hyperplane ``x[axis] = const``, zero off ``points``.

    Attributes:
        axis: normal axis of the hyperplane (0-based).
        n: ambient dimension; tangential multi-indices have ``n - 1`` entries.
        h: lattice spacing.
        points: integer tangential multi-indices, shape ``(N, n - 1)``.
        values: real values, shape ``(N,)``.
    """

    axis: int
    n: int
    h: float
    points: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=np.int64).reshape(-1, max(self.n - 1, 0))
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if points.shape[0] != values.shape[0]:
            raise ShapeMismatchError(points.shape, values.shape)
        if not 0 <= self.axis < self.n:
            raise ValidationError(f"Face axis {self.axis} out of range for dimension {self.n}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("FaceField values must be finite")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_dense(
        cls,
        axis: int,
        n: int,
        h: float,
        array: np.ndarray,
        origin: Sequence[int],
        *,
        drop_zeros: bool = False,
    ) -> "FaceField":
        """Face field from a dense ``(n-1)``-dimensional array whose index 0 sits at ``origin``."""
        array = np.asarray(array, dtype=float)
        idx = np.argwhere(np.ones(array.shape, dtype=bool))
        values = array.reshape(-1)
        if drop_zeros:
            keep = values != 0.0
            idx, values = idx[keep], values[keep]
        return cls(axis, n, h, idx + np.asarray(origin, dtype=np.int64), values)

    @property
    def size(self) -> int:
        return int(self.values.size)

    def translated(self, offset: Sequence[int]) -> "FaceField":
        return FaceField(self.axis, self.n, self.h, self.points + np.asarray(offset), self.values)

    def scaled(self, factor: float) -> "FaceField":
        return FaceField(self.axis, self.n, self.h, self.points, self.values * factor)

    def as_dict(self) -> dict:
        return {tuple(int(v) for v in p): float(val) for p, val in zip(self.points, self.values)}


# --------------------------------------------------------------------- #
# L^2_h
# --------------------------------------------------------------------- #
def _region_mask(grid: GridSpec, region: Union[str, np.ndarray, None]) -> np.ndarray:
    if region is None:
        return grid.member_mask
    if isinstance(region, str):
        if region == "interior+boundary":
            return grid.closed_mask
        return grid.masks[region]
    mask = np.asarray(region, dtype=bool)
    if mask.shape != grid.box_shape:
        raise ShapeMismatchError(mask.shape, grid.box_shape)
    return mask


def l2h_inner(
    v: Union[LatticeField, FaceField],
    w: Union[LatticeField, FaceField],
    region: Union[str, np.ndarray, None] = None,
) -> float:
    """``Σ_{x ∈ A} h^d v(x) w(x)``.

    For lattice fields ``d = n`` and ``A`` is ``region`` (a mask name, a box
    mask or the whole extended grid). For face fields ``d = n - 1`` and the
    sum runs over the shared support.
    """
    if isinstance(v, FaceField) or isinstance(w, FaceField):
        if not (isinstance(v, FaceField) and isinstance(w, FaceField)):
            raise ValidationError("l2h_inner needs two lattice fields or two face fields")
        if v.n != w.n or v.h != w.h:
            raise ShapeMismatchError((v.n,), (w.n,))
        left = v.as_dict()
        total = sum(val * left[p] for p, val in w.as_dict().items() if p in left)
        return float(v.h ** (v.n - 1) * total)
    if v.grid != w.grid:
        raise ShapeMismatchError(v.grid.box_shape, w.grid.box_shape)
    grid = v.grid
    mask = _region_mask(grid, region)
    return float(grid.h**grid.n * np.sum(v.as_box()[mask] * w.as_box()[mask]))


def l2h_norm(v: Union[LatticeField, FaceField], region: Union[str, np.ndarray, None] = None) -> float:
    return float(np.sqrt(max(l2h_inner(v, v, region), 0.0)))


# --------------------------------------------------------------------- #
# H^2_h
# --------------------------------------------------------------------- #
def h2h_norm_squared(v: LatticeField) -> float:
    grid = v.grid
    h = grid.h
    weight = h**grid.n
    box = v.as_box()
    member = grid.member_mask
    total = np.sum(box[member] ** 2)
    for i in range(grid.n):
        ok = member & shift(member, i, 1)
        d = (shift(box, i, 1) - box) / h
        total += np.sum(d[ok] ** 2)
    for i in range(grid.n):
        for j in range(grid.n):
            ok = member & shift(member, i, 1) & shift(member, j, -1)
            ok &= shift(shift(member, i, 1), j, -1)
            d = (shift(box, i, 1) - box - shift(shift(box, i, 1), j, -1) + shift(box, j, -1)) / h**2
            total += np.sum(d[ok] ** 2)
    return float(weight * total)


def h2h_norm(v: LatticeField) -> float:
    """Discrete H^2 norm summing values, first and second differences wherever defined."""
    return float(np.sqrt(h2h_norm_squared(v)))


# --------------------------------------------------------------------- #
# Hessian inner products
# --------------------------------------------------------------------- #
def hessian_field(v: LatticeField) -> np.ndarray:
    return hessian_box(v.as_box(), v.grid.h)


def hessian_weights(grid: GridSpec, flavor: "HessianFlavor | str") -> np.ndarray:
    """Per-entry point weights of the Hessian form, shape ``(n, n) + box_shape`` (without ``h^n``)."""
    flavor = HessianFlavor(flavor)
    n = grid.n
    weights = np.zeros((n, n) + grid.box_shape)
    for i in range(n):
        for j in range(n):
            if flavor is HessianFlavor.STAR:
                weights[i, j] = grid.closed_mask
            elif i == j:
                weights[i, i] = grid.interior_mask + 0.5 * grid.boundary_mask
            else:
                weights[i, j] = grid.interior_mask | gamma_ij_mask(grid, i, j)
    return weights


def hessian_inner(f: np.ndarray, g: np.ndarray, grid: GridSpec, flavor: "HessianFlavor | str") -> float:
    """Hessian inner product in the star or tilde flavor.

    The star flavor sums every entry over Ω^h ∪ Γ^h. The tilde flavor sums
    every entry over Ω^h, adds half of the diagonal entries over Γ^h and the
    off-diagonal ``(i, j)`` entries over Γ^h_ij.
    """
    flavor = HessianFlavor(flavor)
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    expected = (grid.n, grid.n) + grid.box_shape
    if f.shape != expected or g.shape != expected:
        raise ShapeMismatchError(f.shape if f.shape != expected else g.shape, expected)
    return float(grid.h**grid.n * np.sum(hessian_weights(grid, flavor) * f * g))


def hessian_norm(v: LatticeField, flavor: "HessianFlavor | str") -> float:
    hess = hessian_field(v)
    return float(np.sqrt(max(hessian_inner(hess, hess, v.grid, flavor), 0.0)))


def tilde_scalar_inner(f: LatticeField, g: LatticeField) -> float:
    """``Σ_{Ω^h} h^n f g + ½ Σ_{Γ^h} h^n f g``."""
    if f.grid != g.grid:
        raise ShapeMismatchError(f.grid.box_shape, g.grid.box_shape)
    grid = f.grid
    prod = f.as_box() * g.as_box()
    total = prod[grid.interior_mask].sum() + 0.5 * prod[grid.boundary_mask].sum()
    return float(grid.h**grid.n * total)


# --------------------------------------------------------------------- #
# H^{1/2}_h on faces
# --------------------------------------------------------------------- #
def collar_points(dim: int, h: float, low: float, high: float, *, closed_high: bool = True) -> np.ndarray:
    """Integer multi-indices of the lattice points of ``[low, high]^dim`` (or ``[low, high)``)."""
    lo = int(np.ceil(low / h - 1e-9))
    hi = int(np.floor(high / h + 1e-9))
    if not closed_high and abs(hi * h - high) < 1e-9 * max(1.0, abs(high)):
        hi -= 1
    axis = np.arange(lo, hi + 1, dtype=np.int64)
    if dim == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=-1)


def _kernel(diff: np.ndarray, n: int, h: float) -> np.ndarray:
    """``|x - y|^{-n} h^{2n-2}`` for integer differences ``diff`` (in units of h)."""
    dist2 = np.sum(diff.astype(float) ** 2, axis=-1)
    with np.errstate(divide="ignore"):
        k = np.where(dist2 > 0, dist2 ** (-0.5 * n), 0.0)
    return k * h ** (n - 2)


def h_half_seminorm_squared(
    w: FaceField,
    collar: Union[float, np.ndarray, None] = DEFAULT_COLLAR_RADIUS,
) -> float:
    """Squared discrete H^{1/2}_h seminorm over ordered pairs.

    Args:
        w: face field; its stored support takes part in every pair.
        collar: extra zero-valued points. A float ``r`` means the lattice
            points of ``[-r, r]^{n-1}``; an integer array of multi-indices is
            used as given; ``None`` sums over the stored support only.
    """
    if w.size == 0:
        return 0.0
    n, h = w.n, w.h
    pts, vals = w.points, w.values
    total = 0.0
    for start in range(0, pts.shape[0], _PAIR_CHUNK):
        block = slice(start, start + _PAIR_CHUNK)
        diff = pts[block, None, :] - pts[None, :, :]
        k = _kernel(diff, n, h)
        dv = vals[block, None] - vals[None, :]
        total += float(np.sum(dv**2 * k))
    if collar is None:
        return total
    if isinstance(collar, (int, float)):
        extra = collar_points(n - 1, h, -float(collar), float(collar))
    else:
        extra = np.asarray(collar, dtype=np.int64).reshape(-1, n - 1)
    if extra.size:
        stored = {tuple(p) for p in pts.tolist()}
        keep = np.array([tuple(p) not in stored for p in extra.tolist()], dtype=bool)
        extra = extra[keep]
    nonzero = vals != 0.0
    sq = vals[nonzero] ** 2
    src = pts[nonzero]
    for start in range(0, extra.shape[0], _PAIR_CHUNK):
        block = extra[start : start + _PAIR_CHUNK]
        k = _kernel(src[:, None, :] - block[None, :, :], n, h)
        # Each support/collar pair appears twice among the ordered pairs.
        total += 2.0 * float(np.sum(sq[:, None] * k))
    return total


def h_half_seminorm(w: FaceField, collar: Union[float, np.ndarray, None] = DEFAULT_COLLAR_RADIUS) -> float:
    return float(np.sqrt(h_half_seminorm_squared(w, collar)))


def h_half_norm(w: FaceField, collar: Union[float, np.ndarray, None] = DEFAULT_COLLAR_RADIUS) -> float:
    """``sqrt(‖w‖²_{L²_h} + [w]²_{H^{1/2}_h})``."""
    return float(np.sqrt(h_half_seminorm_squared(w, collar) + l2h_inner(w, w)))


def poincare_collar_bound(w: FaceField) -> Tuple[float, float]:
    """Seminorm² against the collar ``[-2, -1)^{n-1}`` and the lower bound ``(3√n)^{-n} ‖w‖²``.

    The bound holds whenever ``w`` is supported in ``[0, 1)^{n-1}``.
    """
    collar = collar_points(w.n - 1, w.h, -2.0, -1.0, closed_high=False)
    seminorm2 = h_half_seminorm_squared(w, collar)
    bound = (3.0 * np.sqrt(w.n)) ** (-w.n) * l2h_inner(w, w)
    return seminorm2, float(bound)


__all__ = [
    "DEFAULT_COLLAR_RADIUS",
    "FaceField",
    "HessianFlavor",
    "collar_points",
    "h2h_norm",
    "h2h_norm_squared",
    "h_half_norm",
    "h_half_seminorm",
    "h_half_seminorm_squared",
    "hessian_field",
    "hessian_inner",
    "hessian_weights",
    "hessian_norm",
    "l2h_inner",
    "l2h_norm",
    "poincare_collar_bound",
    "tilde_scalar_inner",
]
