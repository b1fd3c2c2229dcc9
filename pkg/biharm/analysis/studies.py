"""Convergence ladders, boundary-seminorm scaling and the verification suite."""

from __future__ import annotations

import logging
import math
from typing import List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..core.coordinator import LadderCoordinator, LadderResult, LadderTask
from ..core.difference_ops import BcScheme, LatticeField
from ..core.discrete_norms import (
    DEFAULT_COLLAR_RADIUS,
    FaceField,
    HessianFlavor,
    h2h_norm,
    h_half_norm,
    h_half_seminorm_squared,
    l2h_norm,
    poincare_collar_bound,
)
from ..core.errors import (
    ConstructionDefectError,
    GridSizeError,
    IdentityResidualError,
    SolverConvergenceError,
    ValidationError,
)
from ..core.extension import TraceVariant, build_E_hat, extend_even, face_data, localize_to_corner
from ..core.lattice import build_grid
from ..core.mollifier import SourceFunction, commutation_residual, polynomial_source, sample_region
from ..core.observability import StudyEventLog
from ..core.scheme_solver import DEFAULT_TOL, LinearSystem, solve
from . import identities
from .manufactured import ManufacturedCase, manufactured_pair

LOGGER = logging.getLogger(__name__)

COMMUTATION_TOLERANCE = 1e-9
TRACE_TOLERANCE = 1e-10
KERNEL_CHECK_LIMIT = 1500


# --------------------------------------------------------------------- #
# Rates
# --------------------------------------------------------------------- #
def _check_rate_input(errors: Sequence[float], hs: Sequence[float]) -> None:
    if len(errors) != len(hs):
        raise ValidationError(f"errors and hs differ in length ({len(errors)} vs {len(hs)})")
    if len(errors) < 2:
        raise ValidationError("A rate needs at least two points")
    values = np.asarray(list(errors) + list(hs), dtype=float)
    if not np.all(np.isfinite(values)) or np.any(values <= 0.0):
        raise ValidationError("Errors and spacings must be finite and positive")


def fit_rate(errors: Sequence[float], hs: Sequence[float]) -> float:
    """Least-squares slope of ``log(error)`` against ``log(h)``."""
    _check_rate_input(errors, hs)
    slope, _ = np.polyfit(np.log(np.asarray(hs, dtype=float)), np.log(np.asarray(errors, dtype=float)), 1)
    return float(slope)


def pairwise_rates(errors: Sequence[float], hs: Sequence[float]) -> List[Optional[float]]:
    """Rate between consecutive entries; ``None`` where an error vanishes."""
    rates: List[Optional[float]] = []
    for k in range(1, len(errors)):
        e0, e1, h0, h1 = errors[k - 1], errors[k], hs[k - 1], hs[k]
        if e0 > 0.0 and e1 > 0.0:
            rates.append(math.log(e0 / e1) / math.log(h0 / h1))
        else:
            rates.append(None)
    return rates


def _fit_or_none(errors: Sequence[float], hs: Sequence[float]) -> Optional[float]:
    if len(errors) < 2 or any(e <= 0.0 for e in errors):
        return None
    return fit_rate(errors, hs)


# --------------------------------------------------------------------- #
# Report models
# --------------------------------------------------------------------- #
class LadderEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    m: int
    h: float
    error_h2h: float
    cg_iters: int
    pairwise_rate: Optional[float] = None
    residual: float = 0.0
    solution_l2: Optional[float] = None


class ConvergenceReport(BaseModel):
    """Per-level errors and fitted rates for one (case, scheme) pair."""

    case: str
    scheme: str
    dim: int
    entries: List[LadderEntry] = Field(default_factory=list)
    fitted_rate: Optional[float] = None
    seed: Optional[int] = None
    complete: bool = True
    failure: Optional[str] = None

    @model_validator(mode="after")
    def _h_decreasing(self) -> "ConvergenceReport":
        hs = [entry.h for entry in self.entries]
        if any(b >= a for a, b in zip(hs, hs[1:])):
            raise ValueError("Ladder spacings must be strictly decreasing")
        return self

    @property
    def errors(self) -> List[float]:
        return [entry.error_h2h for entry in self.entries]

    @property
    def hs(self) -> List[float]:
        return [entry.h for entry in self.entries]


class ScalingRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    m: int
    h: float
    norm: float
    seminorm: float
    pairwise_rate: Optional[float] = None


class BoundaryScalingReport(BaseModel):
    """``‖g_{h,i}‖_{H^{1/2}_h}`` across a ladder."""

    source: str
    variant: str
    axis: int
    dim: int
    rows: List[ScalingRow] = Field(default_factory=list)
    fitted_rate: Optional[float] = None


class ProbeResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    value: float
    tolerance: float
    passed: bool
    comparison: str = "<="


class VerifyReport(BaseModel):
    dim: int
    m: int
    seed: int
    probes: List[ProbeResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(probe.passed for probe in self.probes)

    def failures(self) -> List[str]:
        return [
            f"{p.name}={p.value:.3e} (need {p.comparison} {p.tolerance:.1e})" for p in self.probes if not p.passed
        ]

    def raise_on_failure(self) -> None:
        if not self.passed:
            raise IdentityResidualError(self.failures())


# --------------------------------------------------------------------- #
# Convergence ladder
# --------------------------------------------------------------------- #
def validate_ladder(m_list: Sequence[int], dim: int) -> List[int]:
    ms = [int(m) for m in m_list]
    if not ms:
        raise ValidationError("m_list must not be empty")
    for m in ms:
        if m < 4 or dim < 1:
            raise GridSizeError(dim, m)
    if any(b <= a for a, b in zip(ms, ms[1:])):
        raise ValidationError(f"m_list must be strictly increasing, got {ms}")
    return ms


def solve_ladder_entry(task: LadderTask) -> LadderResult:
    """Solve one level and measure ``‖u - U‖_{H²_h}`` with ``u`` sampled on Ω̃^h."""
    grid = build_grid(task.n, task.m)
    case = manufactured_pair(task.case, task.n)
    try:
        result = solve(
            case.f,
            grid,
            task.scheme,
            tol=task.tol,
            maxit=task.maxit,
            preconditioner=task.preconditioner,
            degree=task.degree,
        )
    except SolverConvergenceError as exc:
        final = exc.residual_history[-1] if exc.residual_history else float("nan")
        return LadderResult(
            task.index,
            task.m,
            grid.h,
            False,
            cg_iters=exc.iterations,
            residual=final,
            error_message=str(exc),
            diverged=exc.diverged,
        )
    exact = sample_region(case.u_exact, grid, "member")
    return LadderResult(
        task.index,
        task.m,
        grid.h,
        True,
        error_h2h=h2h_norm(exact - result.field),
        cg_iters=result.iterations,
        residual=result.residual,
        solution_l2=l2h_norm(result.field, "interior"),
    )


def convergence_study(
    case: Union[ManufacturedCase, str],
    scheme: "BcScheme | str",
    m_list: Sequence[int],
    *,
    dim: Optional[int] = None,
    tol: float = DEFAULT_TOL,
    maxit: Optional[int] = None,
    preconditioner: str = "none",
    degree: int = 2,
    jobs: int = 1,
    seed: Optional[int] = None,
    events: Optional[StudyEventLog] = None,
) -> ConvergenceReport:
    """Solve on every ``m`` and fit the H²_h error rate.

    A CG failure ends the ladder; the report then holds the levels solved
    so far with ``complete = False``.
    """
    if isinstance(case, ManufacturedCase):
        name, dim = case.name, case.dim if dim is None else dim
    else:
        name, dim = case, 2 if dim is None else dim
    manufactured_pair(name, dim)
    scheme = BcScheme.parse(scheme)
    ms = validate_ladder(m_list, dim)
    if not 0.0 < tol < 1.0:
        raise ValidationError(f"tol must lie in (0, 1), got {tol}")
    if events is not None:
        events.study_start("convergence", case=name, scheme=scheme.value, dim=dim, m_list=ms)
    tasks = [
        LadderTask(k, dim, m, name, scheme.value, tol, maxit, preconditioner, degree) for k, m in enumerate(ms)
    ]
    results = LadderCoordinator(solve_ladder_entry, jobs=jobs, events=events).execute_tasks(tasks)
    solved = [r for r in results if r.success]
    errors = [float(r.error_h2h) for r in solved]
    hs = [r.h for r in solved]
    rates = [None] + pairwise_rates(errors, hs)
    entries = [
        LadderEntry(
            m=r.m,
            h=r.h,
            error_h2h=float(r.error_h2h),
            cg_iters=r.cg_iters,
            pairwise_rate=rate,
            residual=r.residual,
            solution_l2=r.solution_l2,
        )
        for r, rate in zip(solved, rates)
    ]
    failed = [r for r in results if not r.success]
    report = ConvergenceReport(
        case=name,
        scheme=scheme.value,
        dim=dim,
        entries=entries,
        fitted_rate=_fit_or_none(errors, hs),
        seed=seed,
        complete=not failed,
        failure=failed[0].error_message if failed else None,
    )
    if events is not None:
        events.study_end("convergence", success=report.complete, fitted_rate=report.fitted_rate)
    LOGGER.info(
        "Convergence %s/%s n=%d: %d levels, fitted rate %s",
        name,
        scheme.value,
        dim,
        len(entries),
        "n/a" if report.fitted_rate is None else f"{report.fitted_rate:.3f}",
    )
    return report


# --------------------------------------------------------------------- #
# Boundary seminorm scaling
# --------------------------------------------------------------------- #
def extended_case(case: ManufacturedCase) -> SourceFunction:
    """Corner-localized case continued to R^n by the reflection extension."""
    return extend_even(localize_to_corner(case.u_exact))


def boundary_scaling_study(
    u_tilde: SourceFunction,
    m_list: Sequence[int],
    variant: "TraceVariant | str" = TraceVariant.CENTERED,
    *,
    axis: Optional[int] = None,
    collar: float = DEFAULT_COLLAR_RADIUS,
    events: Optional[StudyEventLog] = None,
) -> BoundaryScalingReport:
    """``H^{1/2}_h`` norm of the zero-extended face data ``g_{h,axis}`` per level."""
    variant = TraceVariant.parse(variant)
    dim = u_tilde.dim
    if dim < 2:
        raise ValidationError("Boundary scaling needs n >= 2")
    axis = dim - 1 if axis is None else axis
    ms = validate_ladder(m_list, dim)
    if events is not None:
        events.study_start("boundary-scaling", source=u_tilde.name, variant=variant.value, m_list=ms)
    norms: List[float] = []
    seminorms: List[float] = []
    hs: List[float] = []
    for m in ms:
        grid = build_grid(dim, m)
        g = face_data(u_tilde, grid, axis, variant)
        seminorms.append(math.sqrt(h_half_seminorm_squared(g, collar)))
        norms.append(h_half_norm(g, collar))
        hs.append(grid.h)
        LOGGER.debug("Boundary scaling m=%d: |g|=%.3e", m, norms[-1])
    rates = [None] + pairwise_rates(norms, hs)
    rows = [
        ScalingRow(m=m, h=h, norm=norm, seminorm=semi, pairwise_rate=rate)
        for m, h, norm, semi, rate in zip(ms, hs, norms, seminorms, rates)
    ]
    report = BoundaryScalingReport(
        source=u_tilde.name,
        variant=variant.value,
        axis=axis,
        dim=dim,
        rows=rows,
        fitted_rate=_fit_or_none(norms, hs),
    )
    if events is not None:
        events.study_end("boundary-scaling", success=True, fitted_rate=report.fitted_rate)
    return report


# --------------------------------------------------------------------- #
# Verification suite
# --------------------------------------------------------------------- #
def _random_field(grid, rng: np.random.Generator) -> LatticeField:
    return LatticeField(grid, rng.standard_normal(grid.count("member")))


def _probe(
    name: str,
    value: float,
    tolerance: float,
    events: Optional[StudyEventLog],
    comparison: str = "<=",
) -> ProbeResult:
    if comparison == "<=":
        passed = bool(np.isfinite(value) and value <= tolerance)
    else:
        passed = bool(np.isfinite(value) and value > tolerance)
    if events is not None:
        events.probe_result(name, value, passed=passed)
    return ProbeResult(name=name, value=float(value), tolerance=tolerance, passed=passed, comparison=comparison)


def _identity_probes(grid, rng, pairs, tolerance, events) -> List[ProbeResult]:
    probes = []
    for flavor in (HessianFlavor.STAR, HessianFlavor.TILDE):
        sbp = 0.0
        transfer = [0.0] * grid.n
        for _ in range(pairs):
            v = _random_field(grid, rng)
            phi, _ = identities.project_admissible(_random_field(grid, rng), flavor)
            sbp = max(sbp, identities.sbp_residual(v, phi, grid, flavor, strict=True))
            for axis in range(grid.n):
                transfer[axis] = max(
                    transfer[axis], identities.transfer_residual(v, phi, grid, axis, flavor, strict=True)
                )
        probes.append(_probe(f"sbp_{flavor.value}", sbp, tolerance, events))
        for axis in range(grid.n):
            probes.append(_probe(f"transfer_{flavor.value}_x{axis + 1}", transfer[axis], tolerance, events))
    return probes


def _restriction_probes(grid, rng, pairs, tolerance, events) -> List[ProbeResult]:
    d = grid.n - 1
    if d < 1:
        return []
    m = grid.m
    origin = [-2 * m] * d
    probes = []
    for variant in ("mirror", "star"):
        worst = 0.0
        for _ in range(pairs):
            values = rng.standard_normal((3 * m + 1,) * d)
            for axis in range(d):
                worst = max(worst, identities.restriction_identity_residual(values, origin, axis, grid.h, variant))
        probes.append(_probe(f"restriction_{variant}", worst, tolerance, events))
    return probes


def _operator_probes(grid, rng, pairs, tolerance, events) -> List[ProbeResult]:
    probes = []
    zero_rhs = np.zeros(grid.interior_shape)
    for scheme in (BcScheme.CENTERED_MIRROR, BcScheme.ONE_SIDED_ZERO):
        system = LinearSystem(grid, scheme, zero_rhs)
        probes.append(
            _probe(f"symmetry_{scheme.value}", identities.symmetry_residual(system, rng, pairs), tolerance, events)
        )
        probes.append(
            _probe(
                f"positivity_{scheme.value}",
                identities.positivity_margin(system, rng, pairs),
                0.0,
                events,
                comparison=">",
            )
        )
    return probes


def _poincare_probes(grid, rng, pairs, events) -> List[ProbeResult]:
    probes = []
    for flavor in (HessianFlavor.STAR, HessianFlavor.TILDE):
        samples = max(pairs, identities.POINCARE_SAMPLES)
        worst = identities.worst_poincare_ratio(grid, flavor, rng, samples)
        probes.append(_probe(f"poincare_ratio_{flavor.value}", worst, identities.POINCARE_RATIO_LIMIT, events))
        if grid.count("interior") <= KERNEL_CHECK_LIMIT:
            probes.append(
                _probe(f"kernel_{flavor.value}", identities.kernel_check(grid, flavor), 0.0, events, comparison=">")
            )
    if grid.n >= 2:
        worst_margin = np.inf
        d = grid.n - 1
        size = min(8, grid.m**d)
        for _ in range(pairs):
            flat = rng.choice(grid.m**d, size=size, replace=False)
            points = np.stack(np.unravel_index(flat, (grid.m,) * d), axis=-1)
            face = FaceField(d, grid.n, grid.h, points, rng.standard_normal(size))
            seminorm2, bound = poincare_collar_bound(face)
            worst_margin = min(worst_margin, seminorm2 - bound)
        probes.append(_probe("collar_poincare_margin", float(worst_margin), 0.0, events, comparison=">"))
    return probes


def _commutation_probes(grid, rng, events) -> List[ProbeResult]:
    probes = []
    for degree in (2, 3, 4):
        worst = 0.0
        for poly_degree in range(5):
            coeffs = rng.standard_normal(poly_degree + 1)
            for axis in range(grid.n):
                f = polynomial_source(coeffs, axis, grid.n)
                scale = max(1.0, float(np.max(np.abs(sample_region(f.second_partial(axis), grid, "interior").values))))
                worst = max(worst, commutation_residual(f, grid, axis, degree=degree) / scale)
        probes.append(_probe(f"commutation_theta{degree}", worst, COMMUTATION_TOLERANCE, events))
    return probes


def _trace_probes(grid, events) -> List[ProbeResult]:
    if grid.n < 2 or grid.m < 8:
        return []
    u_tilde = extended_case(manufactured_pair("sine4", grid.n))
    probes = []
    for variant in (TraceVariant.CENTERED, TraceVariant.ONE_SIDED):
        try:
            details = build_E_hat(u_tilde, grid, variant, tolerance=TRACE_TOLERANCE, return_details=True)
            value = max(details.boundary_defect, details.derivative_defect)
            scale = max([1.0] + [float(np.max(np.abs(g.values))) for g in details.face_data if g.size])
        except ConstructionDefectError as exc:
            value, scale = exc.defect, exc.tolerance / TRACE_TOLERANCE
        probes.append(_probe(f"inverse_trace_{variant.value}", value / scale, TRACE_TOLERANCE, events))
    return probes


def run_verification(
    dim: int,
    m: int,
    seed: int = 0,
    *,
    pairs: int = 20,
    tolerance: float = identities.IDENTITY_TOLERANCE,
    events: Optional[StudyEventLog] = None,
) -> VerifyReport:
    """Run every identity, operator, Poincaré, commutation and inverse-trace probe on one grid."""
    grid = build_grid(dim, m)
    rng = np.random.default_rng(seed)
    if events is not None:
        events.study_start("verify", dim=dim, m=m, seed=seed)
    probes: List[ProbeResult] = []
    probes += _identity_probes(grid, rng, pairs, tolerance, events)
    probes += _restriction_probes(grid, rng, pairs, tolerance, events)
    probes += _operator_probes(grid, rng, pairs, tolerance, events)
    probes += _poincare_probes(grid, rng, pairs, events)
    probes += _commutation_probes(grid, rng, events)
    probes += _trace_probes(grid, events)
    report = VerifyReport(dim=dim, m=m, seed=seed, probes=probes)
    if events is not None:
        events.study_end("verify", success=report.passed, failures=report.failures())
    LOGGER.info("Verification n=%d m=%d: %d probes, %d failed", dim, m, len(probes), len(report.failures()))
    return report


__all__ = [
    "BoundaryScalingReport",
    "ConvergenceReport",
    "LadderEntry",
    "ProbeResult",
    "ScalingRow",
    "VerifyReport",
    "boundary_scaling_study",
    "convergence_study",
    "extended_case",
    "fit_rate",
    "pairwise_rates",
    "run_verification",
    "solve_ladder_entry",
    "validate_ladder",
]
