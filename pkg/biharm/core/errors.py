"""Exception hierarchy shared by the biharm modules.

Two families exist. ``ValidationError`` covers inputs that violate a
precondition and maps to CLI exit code 1. ``NumericalError`` covers
computations that ran but produced an unusable answer and maps to exit
code 2.
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple


class BiharmError(Exception):
    """Root of every error raised by this package."""


class ValidationError(BiharmError, ValueError):
    """An argument violates a documented precondition."""


class GridSizeError(ValidationError):
    """Raised when a grid is requested with ``n < 1`` or ``m < 4``."""

    def __init__(self, n: int, m: int) -> None:
        self.n = n
        self.m = m
        super().__init__(f"Grid requires n >= 1 and m >= 4 (got n={n}, m={m})")


class AxisError(ValidationError):
    """Raised for an axis outside ``0..n-1`` or an invalid axis pair."""


class StencilDomainError(ValidationError):
    """A difference stencil reads a point outside the extended grid."""

    def __init__(self, point: Tuple[int, ...], stencil_point: Tuple[int, ...]) -> None:
        self.point = point
        self.stencil_point = stencil_point
        super().__init__(
            f"Stencil at {point} reads {stencil_point}, which is outside the extended grid"
        )


class BoundaryDataError(ValidationError):
    """Ghost filling was handed nonzero boundary values."""

    def __init__(self, max_abs: float) -> None:
        self.max_abs = max_abs
        super().__init__(f"Boundary values must be zero (max |value| = {max_abs:.3e})")


class SupportError(ValidationError):
    """A function or face field violates a support precondition."""


class ShapeMismatchError(ValidationError):
    """Two operands of an inner product do not share a shape."""

    def __init__(self, left: Sequence[int], right: Sequence[int]) -> None:
        self.left = tuple(left)
        self.right = tuple(right)
        super().__init__(f"Shape mismatch: {self.left} vs {self.right}")


class UnknownCaseError(ValidationError):
    """Lookup of a manufactured case that is not registered."""

    def __init__(self, name: str, known: Sequence[str]) -> None:
        self.name = name
        self.known = tuple(known)
        super().__init__(f"Unknown case {name!r}; expected one of {', '.join(self.known)}")


class ReportFormatError(ValidationError):
    """A report cannot be serialized (empty ladder or non-finite value)."""


class NumericalError(BiharmError, RuntimeError):
    """A computation finished without a trustworthy result."""


class QuadratureError(NumericalError):
    """The integrand of a smoothing quadrature returned non-finite values."""


class SolverConvergenceError(NumericalError):
    """Conjugate gradient stopped before reaching the requested tolerance."""

    def __init__(
        self,
        iterations: int,
        residual_history: Sequence[float],
        *,
        diverged: bool,
        tol: float,
    ) -> None:
        self.iterations = iterations
        self.residual_history = list(residual_history)
        self.diverged = diverged
        self.tol = tol
        final = self.residual_history[-1] if self.residual_history else float("nan")
        kind = "diverged" if diverged else "did not converge"
        super().__init__(
            f"CG {kind} after {iterations} iterations "
            f"(relative residual {final:.3e}, tol {tol:.1e})"
        )


class ConstructionDefectError(NumericalError):
    """The boundary post-check of the inverse-trace construction failed."""

    def __init__(self, check: str, defect: float, tolerance: float) -> None:
        self.check = check
        self.defect = defect
        self.tolerance = tolerance
        super().__init__(f"{check} defect {defect:.3e} exceeds {tolerance:.1e}")


class IdentityResidualError(NumericalError):
    """A verification probe reported a residual above its tolerance."""

    def __init__(self, failures: Sequence[str]) -> None:
        self.failures = list(failures)
        super().__init__("Verification failed: " + "; ".join(self.failures))


class DegenerateKernelError(NumericalError):
    """A ratio was requested for a field that is zero after projection."""

    def __init__(self, message: Optional[str] = None) -> None:
        super().__init__(message or "Field vanishes after projection; ratio undefined")
