"""Matrix-free assembly and conjugate-gradient solution of the two schemes.

Unknowns live on Ω^h only. Boundary values are zero and ghost values are
reconstructed from the interior by the chosen :class:`BcScheme` before the
bilaplacian stencil is applied.
"""

from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator

from .difference_ops import BcScheme, LatticeField, bilaplacian_box, complete_interior
from .errors import SolverConvergenceError, ValidationError
from .lattice import GridSpec
from .mollifier import SourceFunction, smooth_source

LOGGER = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10

# Relative residual growth past this factor counts as divergence.
_DIVERGENCE_FACTOR = 1e6


class Preconditioner(str, enum.Enum):
    NONE = "none"
    JACOBI = "jacobi"

    @classmethod
    def parse(cls, value: "Preconditioner | str | None") -> "Preconditioner":
        if value is None:
            return cls.NONE
        if isinstance(value, Preconditioner):
            return value
        try:
            return cls(value.strip().lower())
        except ValueError as exc:
            raise ValidationError(f"Unknown preconditioner {value!r}") from exc


def default_maxit(m: int) -> int:
    """Iteration cap ``50 (m + 1)^2``; CG needs O(h^-2) steps on this operator."""
    return 50 * (m + 1) ** 2


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """``Δ²_h`` on Ω^h with the boundary condition folded in, plus its right-hand side."""

    grid: GridSpec
    scheme: BcScheme
    rhs: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "scheme", BcScheme.parse(self.scheme))
        rhs = np.asarray(self.rhs, dtype=float)
        if rhs.shape != self.grid.interior_shape:
            rhs = rhs.reshape(self.grid.interior_shape)
        object.__setattr__(self, "rhs", rhs)

    @property
    def size(self) -> int:
        return int(np.prod(self.grid.interior_shape))

    def apply(self, v: np.ndarray) -> np.ndarray:
        return apply_system(v, self)


def assemble_rhs(f: SourceFunction, grid: GridSpec, *, degree: int = 2) -> np.ndarray:
    """``T^{h,degree}`` along every axis, sampled on Ω^h (interior-shaped array)."""
    return smooth_source(f, grid, None, degree=degree).interior()


def build_system(
    f: SourceFunction,
    grid: GridSpec,
    scheme: "BcScheme | str",
    *,
    degree: int = 2,
) -> LinearSystem:
    return LinearSystem(grid, BcScheme.parse(scheme), assemble_rhs(f, grid, degree=degree))


def apply_system(v: np.ndarray, system: LinearSystem) -> np.ndarray:
    """Zero boundary, scheme ghosts, then ``Δ²_h`` read back on Ω^h."""
    grid = system.grid
    interior = np.asarray(v, dtype=float).reshape(grid.interior_shape)
    box = complete_interior(grid, interior, system.scheme)
    return bilaplacian_box(box, grid.h)[grid.interior_slices]


def jacobi_diagonal(system: LinearSystem) -> np.ndarray:
    """Exact operator diagonal from ``5^n`` probes.

    Columns of the folded operator couple points at most two steps apart per
    axis, so indicator vectors of the residue classes mod 5 never overlap
    inside one stencil.
    """
    grid = system.grid
    shape = grid.interior_shape
    coords = np.indices(shape)
    diagonal = np.zeros(shape)
    for residues in itertools.product(range(5), repeat=grid.n):
        probe = np.ones(shape, dtype=bool)
        for axis, r in enumerate(residues):
            probe &= coords[axis] % 5 == r
        if not np.any(probe):
            continue
        response = apply_system(probe.astype(float), system)
        diagonal[probe] = response[probe]
    return diagonal


def as_linear_operator(system: LinearSystem) -> LinearOperator:
    """The folded operator on flattened interior vectors."""
    shape = system.grid.interior_shape

    def matvec(x: np.ndarray) -> np.ndarray:
        return apply_system(np.asarray(x).reshape(shape), system).ravel()

    return LinearOperator((system.size, system.size), matvec=matvec, rmatvec=matvec, dtype=float)


@dataclass
class SolveResult:
    """Outcome of :func:`solve`; ``field`` is completed with boundary and ghost values."""

    field: LatticeField
    iterations: int
    residual: float
    history: List[float] = field(default_factory=list)
    scheme: BcScheme = BcScheme.CENTERED_MIRROR

    @property
    def interior(self) -> np.ndarray:
        return self.field.interior()


def conjugate_gradient(
    apply: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    *,
    tol: float,
    maxit: int,
    inverse_diagonal: Optional[np.ndarray] = None,
) -> tuple:
    """(Preconditioned) CG from ``x = 0``; returns ``(x, iterations, history)``.

    ``history`` holds ``‖r_k‖ / ‖b‖`` for ``k = 0 .. iterations``.

    Raises:
        SolverConvergenceError: when ``maxit`` is reached, the residual grows
            past a divergence threshold, or a non-positive curvature is met.
    """
    x = np.zeros_like(b)
    r = b.copy()
    b_norm = float(np.sqrt(np.vdot(b, b).real))
    history = [1.0]
    if b_norm == 0.0:
        return x, 0, [0.0]
    z = r * inverse_diagonal if inverse_diagonal is not None else r
    p = z.copy()
    rz = float(np.vdot(r, z).real)
    for k in range(1, maxit + 1):
        ap = apply(p)
        curvature = float(np.vdot(p, ap).real)
        if not np.isfinite(curvature) or curvature <= 0.0:
            raise SolverConvergenceError(k, history, diverged=True, tol=tol)
        alpha = rz / curvature
        x += alpha * p
        r -= alpha * ap
        rel = float(np.sqrt(np.vdot(r, r).real)) / b_norm
        history.append(rel)
        if rel <= tol:
            return x, k, history
        if not np.isfinite(rel) or rel > _DIVERGENCE_FACTOR:
            raise SolverConvergenceError(k, history, diverged=True, tol=tol)
        z = r * inverse_diagonal if inverse_diagonal is not None else r
        rz_next = float(np.vdot(r, z).real)
        p = z + (rz_next / rz) * p
        rz = rz_next
    raise SolverConvergenceError(maxit, history, diverged=False, tol=tol)


def solve_system(
    system: LinearSystem,
    *,
    tol: float = DEFAULT_TOL,
    maxit: Optional[int] = None,
    preconditioner: "Preconditioner | str | None" = None,
) -> SolveResult:
    if not 0.0 < tol < 1.0:
        raise ValidationError(f"tol must lie in (0, 1), got {tol}")
    grid = system.grid
    maxit = default_maxit(grid.m) if maxit is None else int(maxit)
    if maxit < 1:
        raise ValidationError(f"maxit must be >= 1, got {maxit}")
    precond = Preconditioner.parse(preconditioner)
    inverse_diagonal = None
    if precond is Preconditioner.JACOBI:
        inverse_diagonal = 1.0 / jacobi_diagonal(system).ravel()

    def apply(x: np.ndarray) -> np.ndarray:
        return apply_system(x, system).ravel()

    x, iterations, history = conjugate_gradient(
        apply,
        system.rhs.ravel().copy(),
        tol=tol,
        maxit=maxit,
        inverse_diagonal=inverse_diagonal,
    )
    box = complete_interior(grid, x.reshape(grid.interior_shape), system.scheme)
    result = SolveResult(
        LatticeField.from_box(grid, box),
        iterations,
        history[-1],
        history,
        system.scheme,
    )
    LOGGER.info(
        "CG (%s, %s) n=%d m=%d: %d iterations, relative residual %.2e",
        system.scheme.value,
        precond.value,
        grid.n,
        grid.m,
        iterations,
        result.residual,
    )
    return result


def solve(
    f: SourceFunction,
    grid: GridSpec,
    scheme: "BcScheme | str",
    tol: float = DEFAULT_TOL,
    maxit: Optional[int] = None,
    *,
    preconditioner: "Preconditioner | str | None" = None,
    degree: int = 2,
) -> SolveResult:
    """Solve ``Δ²_h U = T^{h,2,...,2} f`` on Ω^h with the given boundary scheme.

    Raises:
        ValidationError: for ``tol`` outside ``(0, 1)`` or ``maxit < 1``.
        SolverConvergenceError: if CG does not reach ``tol``; carries the
            residual history and whether the run diverged.
    """
    system = build_system(f, grid, scheme, degree=degree)
    return solve_system(system, tol=tol, maxit=maxit, preconditioner=preconditioner)


__all__ = [
    "DEFAULT_TOL",
    "LinearSystem",
    "Preconditioner",
    "SolveResult",
    "apply_system",
    "as_linear_operator",
    "assemble_rhs",
    "build_system",
    "conjugate_gradient",
    "default_maxit",
    "jacobi_diagonal",
    "solve",
    "solve_system",
]
