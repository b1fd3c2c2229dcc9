"""Executable checks of the discrete summation-by-parts and Poincaré statements.

Every residual here is relative: ``|lhs - rhs|`` divided by the larger of
the two sides (or by a natural scale for array-valued identities), and it
is 0 when both sides vanish.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..core.difference_ops import (
    BcScheme,
    LatticeField,
    bilaplacian_box,
    complete_interior,
    fill_ghosts,
    fill_ghosts_box,
    hessian_box,
    mixed_box,
)
from ..core.discrete_norms import (
    HessianFlavor,
    h2h_norm,
    hessian_field,
    hessian_inner,
    hessian_norm,
    hessian_weights,
    l2h_norm,
)
from ..core.errors import DegenerateKernelError, ValidationError
from ..core.extension import project_Rh
from ..core.lattice import GridSpec
from ..core.mollifier import SourceFunction, sample_region, smooth_source
from ..core.scheme_solver import LinearSystem, apply_system, solve
from .manufactured import ManufacturedCase

LOGGER = logging.getLogger(__name__)

IDENTITY_TOLERANCE = 1e-12

#: Upper bound on ``‖v‖_{H²_h} / ‖∇²_h v‖`` over admissible fields, uniform in ``h``.
POINCARE_RATIO_LIMIT = 10.0
POINCARE_SAMPLES = 50

_TINY = 1e-300


def _relative(lhs: float, rhs: float) -> float:
    scale = max(abs(lhs), abs(rhs))
    return 0.0 if scale < _TINY else abs(lhs - rhs) / scale


def _scheme_for(flavor: HessianFlavor) -> BcScheme:
    return BcScheme.CENTERED_MIRROR if flavor is HessianFlavor.TILDE else BcScheme.ONE_SIDED_ZERO


def project_admissible(phi: LatticeField, flavor: "HessianFlavor | str") -> Tuple[LatticeField, bool]:
    """Enforce the boundary hypotheses of ``flavor`` on ``phi``.

    Star: zero on Γ^h and on the ghost layer. Tilde: zero on Γ^h with mirror
    ghosts. The flag reports whether ``phi`` changed.
    """
    flavor = HessianFlavor(flavor)
    grid = phi.grid
    box = np.where(grid.boundary_mask, 0.0, phi.as_box())
    projected = LatticeField.from_box(grid, fill_ghosts_box(box, grid, _scheme_for(flavor)))
    altered = not np.array_equal(projected.values, phi.values)
    return projected, altered


def _admissible(phi: LatticeField, flavor: HessianFlavor, strict: bool, what: str) -> LatticeField:
    projected, altered = project_admissible(phi, flavor)
    if altered:
        if strict:
            raise ValidationError(f"{what}: test field violates the {flavor.value} boundary hypotheses")
        LOGGER.warning("%s: projected test field onto the %s boundary hypotheses", what, flavor.value)
    return projected


def sbp_residual(
    v: LatticeField,
    phi: LatticeField,
    grid: GridSpec,
    flavor: "HessianFlavor | str",
    *,
    strict: bool = False,
) -> float:
    """``⟨Δ²_h v, φ⟩_{L²_h(Ω^h ∪ Γ^h)}`` against the Hessian form of ``flavor``."""
    flavor = HessianFlavor(flavor)
    if v.grid != grid or phi.grid != grid:
        raise ValidationError("Fields must live on the given grid")
    phi = _admissible(phi, flavor, strict, "sbp_residual")
    closed = grid.closed_mask
    lhs = grid.h**grid.n * float(np.sum(bilaplacian_box(v.as_box(), grid.h)[closed] * phi.as_box()[closed]))
    rhs = hessian_inner(hessian_field(v), hessian_field(phi), grid, flavor)
    return _relative(lhs, rhs)


def _scalar_weights(grid: GridSpec, flavor: HessianFlavor) -> np.ndarray:
    if flavor is HessianFlavor.STAR:
        return grid.closed_mask.astype(float)
    return grid.interior_mask + 0.5 * grid.boundary_mask


def transfer_residual(
    v: LatticeField,
    phi: LatticeField,
    grid: GridSpec,
    axis: int,
    flavor: "HessianFlavor | str",
    *,
    strict: bool = False,
) -> float:
    """``(D_i D_{-i} v, φ)`` against ``(v, D_i D_{-i} φ)``.

    The star flavor uses the plain ``L²_h(Ω^h ∪ Γ^h)`` product, the tilde
    flavor the product weighting Γ^h by one half.
    """
    flavor = HessianFlavor(flavor)
    grid.check_axis(axis)
    phi = _admissible(phi, flavor, strict, "transfer_residual")
    weights = _scalar_weights(grid, flavor) * grid.h**grid.n
    v_box = v.as_box()
    phi_box = phi.as_box()
    lhs = float(np.sum(weights * mixed_box(v_box, axis, axis, grid.h) * phi_box))
    rhs = float(np.sum(weights * v_box * mixed_box(phi_box, axis, axis, grid.h)))
    return _relative(lhs, rhs)


def restriction_identity_residual(
    values: np.ndarray,
    origin: Sequence[int],
    axis: int,
    h: float,
    variant: str = "mirror",
) -> float:
    """Second difference of ``R_h`` across the hyperplane ``x_axis = 0``.

    With ``w = D_a D_{-a} u`` the identities are
    ``D_a D_{-a} R_h u(0, y) = R_{¬a}[2 w(0) + 4 w(-h)](y)`` for the mirror
    restriction and ``R_{¬a}[w(0) + 2 w(-h)](y)`` for the star one, at
    tangential ``y >= 0``. ``values`` must cover ``-2 .. 1`` along ``axis``.
    """
    values = np.asarray(values, dtype=float)
    origin = [int(o) for o in origin]
    if not origin[axis] <= -2 < 1 < origin[axis] + values.shape[axis]:
        raise ValidationError("Slice must cover coordinates -2..1 along the crossing axis")
    restricted = project_Rh(values, origin, variant)

    def at(array: np.ndarray, coord: int) -> np.ndarray:
        return np.take(array, coord - origin[axis], axis=axis)

    lhs = (at(restricted, 1) - 2.0 * at(restricted, 0) + at(restricted, -1)) / h**2
    w0 = (at(values, 1) - 2.0 * at(values, 0) + at(values, -1)) / h**2
    wm1 = (at(values, 0) - 2.0 * at(values, -1) + at(values, -2)) / h**2
    combo = 2.0 * w0 + 4.0 * wm1 if variant == "mirror" else w0 + 2.0 * wm1
    others = origin[:axis] + origin[axis + 1 :]
    rhs = project_Rh(combo, others, "star") if combo.ndim else combo
    keep = np.ones(lhs.shape, dtype=bool)
    for pos, start in enumerate(others):
        coords = np.arange(lhs.shape[pos]) + start
        shape = [1] * lhs.ndim
        shape[pos] = lhs.shape[pos]
        keep = keep & (coords >= 0).reshape(shape)
    diff = np.abs(lhs - rhs)[keep]
    scale = max(float(np.max(np.abs(rhs[keep]), initial=0.0)), float(np.max(np.abs(lhs[keep]), initial=0.0)))
    if scale < _TINY:
        return 0.0
    return float(diff.max(initial=0.0) / scale)


def _project_or_raise(v: LatticeField, flavor: HessianFlavor) -> LatticeField:
    projected, _ = project_admissible(v, flavor)
    if not np.any(projected.values):
        raise DegenerateKernelError("Field vanishes after boundary projection")
    return projected


def poincare_ratio(v: LatticeField, grid: GridSpec, flavor: "HessianFlavor | str") -> float:
    """``‖v‖_{H²_h} / ‖∇²_h v‖`` for the projection of ``v``.

    Raises:
        DegenerateKernelError: if the projected field or its Hessian norm is zero.
    """
    flavor = HessianFlavor(flavor)
    if v.grid != grid:
        raise ValidationError("Field must live on the given grid")
    projected = _project_or_raise(v, flavor)
    denominator = hessian_norm(projected, flavor)
    if denominator == 0.0:
        raise DegenerateKernelError("Hessian form vanishes on a nonzero admissible field")
    return h2h_norm(projected) / denominator


def worst_poincare_ratio(
    grid: GridSpec,
    flavor: "HessianFlavor | str",
    rng: np.random.Generator,
    samples: int = POINCARE_SAMPLES,
) -> float:
    """Largest :func:`poincare_ratio` over ``samples`` random fields drawn from ``rng``."""
    worst = 0.0
    for _ in range(samples):
        v = LatticeField(grid, rng.standard_normal(grid.count("member")))
        worst = max(worst, poincare_ratio(v, grid, flavor))
    return worst


def kernel_check(grid: GridSpec, flavor: "HessianFlavor | str") -> float:
    """Smallest eigenvalue of the Hessian form on admissible fields.

    The Gram matrix is built column by column from unit interior vectors;
    a positive result means ``∇²_h v = 0`` forces ``v = 0``.
    """
    flavor = HessianFlavor(flavor)
    scheme = _scheme_for(flavor)
    weights = np.sqrt(hessian_weights(grid, flavor) * grid.h**grid.n)
    count = int(np.prod(grid.interior_shape))
    rows = np.empty((count, weights.size))
    unit = np.zeros(count)
    for k in range(count):
        unit[:] = 0.0
        unit[k] = 1.0
        box = complete_interior(grid, unit.reshape(grid.interior_shape), scheme)
        rows[k] = (weights * hessian_box(box, grid.h)).ravel()
    gram = rows @ rows.T
    smallest = float(np.linalg.eigvalsh(gram)[0])
    LOGGER.debug("Kernel check %s n=%d m=%d: smallest eigenvalue %.3e", flavor.value, grid.n, grid.m, smallest)
    return smallest


def symmetry_residual(system: LinearSystem, rng: np.random.Generator, pairs: int = 20) -> float:
    """Worst ``|⟨Av, w⟩ - ⟨v, Aw⟩|`` over random pairs, relative to ``‖Av‖‖w‖ + ‖v‖‖Aw‖``."""
    shape = system.grid.interior_shape
    worst = 0.0
    for _ in range(pairs):
        v = rng.standard_normal(shape)
        w = rng.standard_normal(shape)
        av = apply_system(v, system)
        aw = apply_system(w, system)
        scale = np.linalg.norm(av) * np.linalg.norm(w) + np.linalg.norm(v) * np.linalg.norm(aw)
        worst = max(worst, abs(float(np.vdot(av, w) - np.vdot(v, aw))) / scale)
    return worst


def positivity_margin(system: LinearSystem, rng: np.random.Generator, samples: int = 20) -> float:
    """Smallest Rayleigh quotient ``⟨Av, v⟩ / ⟨v, v⟩`` over random nonzero ``v``."""
    shape = system.grid.interior_shape
    smallest = np.inf
    for _ in range(samples):
        v = rng.standard_normal(shape)
        smallest = min(smallest, float(np.vdot(apply_system(v, system), v) / np.vdot(v, v)))
    return float(smallest)


def phi_residual(u_tilde: SourceFunction, grid: GridSpec, axis: int, *, degree: int = 2) -> LatticeField:
    """``Δ_h ũ - T_{¬axis} Δũ`` on Ω^h ∪ Γ^h, zero elsewhere."""
    grid.check_axis(axis)
    lap_source = u_tilde.laplacian_source()
    samples = sample_region(u_tilde, grid, "member").as_box()
    lap_h = np.zeros(grid.box_shape)
    for k in range(grid.n):
        lap_h += mixed_box(samples, k, k, grid.h)
    smoothed = smooth_source(lap_source, grid, skip_axis=axis, degree=degree, region="closed").as_box()
    phi = np.where(grid.closed_mask, lap_h - smoothed, 0.0)
    return LatticeField.from_box(grid, phi)


@dataclass
class ErrorDecomposition:
    """``‖∇²_h E‖_∼`` and its bound ``‖∇²_h Ê‖ + Σ_i ‖φ_i‖``."""

    m: int
    hessian_error: float
    e_hat_norm: float
    phi_norms: List[float] = field(default_factory=list)
    cg_iters: int = 0

    @property
    def bound(self) -> float:
        return self.e_hat_norm + sum(self.phi_norms)

    def holds(self, slack: float = 1e-6) -> bool:
        return self.hessian_error <= self.bound * (1.0 + slack) + 1e-14


def _centered_data_defect(u: SourceFunction, grid: GridSpec) -> float:
    box = sample_region(u, grid, "member").as_box()
    defect = float(np.max(np.abs(box[grid.boundary_mask]), initial=0.0))
    mirrored = fill_ghosts_box(np.where(grid.boundary_mask, 0.0, box), grid, BcScheme.CENTERED_MIRROR)
    mirror = grid.mirror_mask
    ghost_gap = float(np.max(np.abs(box[mirror] - mirrored[mirror]), initial=0.0)) / grid.h
    return max(defect, ghost_gap)


def error_decomposition(
    case: ManufacturedCase,
    grid: GridSpec,
    *,
    tol: float = 1e-10,
    maxit: Optional[int] = None,
    degree: int = 2,
) -> ErrorDecomposition:
    """Check the energy bound on ``E = ũ - U`` for the centered scheme.

    Only cases whose discrete boundary data ``u`` and ``D_{0,ν} u`` vanish on
    Γ^h are accepted; for them the inverse-trace correction Ê is zero.

    Raises:
        ValidationError: if the case has nonzero discrete boundary data.
    """
    u = case.u_exact
    if u.laplacian is None:
        raise ValidationError(f"{case.name} has no closed-form Laplacian")
    scale = max(1.0, float(np.max(np.abs(sample_region(u, grid, "closed").values))))
    if _centered_data_defect(u, grid) > 1e-10 * scale:
        raise ValidationError(f"{case.name} has nonzero discrete boundary data on this grid")
    result = solve(case.f, grid, BcScheme.CENTERED_MIRROR, tol=tol, maxit=maxit, degree=degree)
    exact = sample_region(u, grid, "interior").interior()
    error = LatticeField.from_interior(grid, exact - result.interior)
    error = fill_ghosts(error, BcScheme.CENTERED_MIRROR)
    hessian_error = hessian_norm(error, HessianFlavor.TILDE)
    phi_norms = [l2h_norm(phi_residual(u, grid, axis, degree=degree), "closed") for axis in range(grid.n)]
    LOGGER.info(
        "Error decomposition %s m=%d: |E|=%.3e, sum |phi_i|=%.3e",
        case.name,
        grid.m,
        hessian_error,
        sum(phi_norms),
    )
    return ErrorDecomposition(grid.m, hessian_error, 0.0, phi_norms, result.iterations)


__all__ = [
    "ErrorDecomposition",
    "IDENTITY_TOLERANCE",
    "POINCARE_RATIO_LIMIT",
    "POINCARE_SAMPLES",
    "error_decomposition",
    "kernel_check",
    "phi_residual",
    "poincare_ratio",
    "positivity_margin",
    "project_admissible",
    "restriction_identity_residual",
    "sbp_residual",
    "symmetry_residual",
    "transfer_residual",
    "worst_poincare_ratio",
]
