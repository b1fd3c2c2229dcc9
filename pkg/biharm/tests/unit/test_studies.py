"""Tests for rate fitting, report models and the study drivers."""

from __future__ import annotations

import math

import pydantic
import pytest

from biharm.analysis.studies import (
    ConvergenceReport,
    LadderEntry,
    ProbeResult,
    VerifyReport,
    convergence_study,
    fit_rate,
    pairwise_rates,
    run_verification,
    solve_ladder_entry,
    validate_ladder,
)
from biharm.core.coordinator import LadderTask
from biharm.analysis.identities import POINCARE_RATIO_LIMIT
from biharm.core.errors import GridSizeError, IdentityResidualError, UnknownCaseError, ValidationError


@pytest.mark.unit
def test_fit_rate_recovers_exponent():
    """Test rate fitting on exact power laws."""
    hs = [1 / 8, 1 / 16, 1 / 32, 1 / 64]
    errors = [3.0 * h**2 for h in hs]
    assert fit_rate(errors, hs) == pytest.approx(2.0)
    assert pairwise_rates(errors, hs) == pytest.approx([2.0, 2.0, 2.0])


@pytest.mark.unit
def test_pairwise_rates_skip_vanishing_errors():
    """Test pairwise rates are None where an error vanishes."""
    assert pairwise_rates([1.0, 0.0, 0.25], [0.5, 0.25, 0.125]) == [None, None]


@pytest.mark.unit
@pytest.mark.parametrize(
    "errors,hs",
    [([1.0], [0.5]), ([1.0, 0.5], [0.5]), ([1.0, 0.0], [0.5, 0.25]), ([1.0, math.nan], [0.5, 0.25])],
)
def test_fit_rate_rejects_bad_input(errors, hs):
    """Test rate fitting refuses mismatched or non-positive input."""
    with pytest.raises(ValidationError):
        fit_rate(errors, hs)


@pytest.mark.unit
def test_validate_ladder():
    """Test ladder validation."""
    assert validate_ladder([8, 16], 2) == [8, 16]
    with pytest.raises(GridSizeError):
        validate_ladder([3, 8], 2)
    with pytest.raises(ValidationError):
        validate_ladder([16, 8], 2)
    with pytest.raises(ValidationError):
        validate_ladder([], 2)


@pytest.mark.unit
def test_report_requires_refining_ladder():
    """Test a report refuses a coarsening ladder."""
    coarse = LadderEntry(m=16, h=1 / 16, error_h2h=0.1, cg_iters=3)
    fine = LadderEntry(m=8, h=1 / 8, error_h2h=0.2, cg_iters=3)
    with pytest.raises(pydantic.ValidationError):
        ConvergenceReport(case="sine4", scheme="centered", dim=2, entries=[coarse, fine])
    report = ConvergenceReport(case="sine4", scheme="centered", dim=2, entries=[fine, coarse])
    assert report.errors == [0.2, 0.1]
    assert report.hs == [1 / 8, 1 / 16]


@pytest.mark.unit
def test_verify_report_failures():
    """Test failed checks are listed and raised."""
    ok = ProbeResult(name="sbp_star", value=1e-15, tolerance=1e-12, passed=True)
    bad = ProbeResult(name="kernel_tilde", value=-1.0, tolerance=0.0, passed=False, comparison=">")
    assert VerifyReport(dim=2, m=8, seed=0, probes=[ok]).passed
    report = VerifyReport(dim=2, m=8, seed=0, probes=[ok, bad])
    assert not report.passed
    assert report.failures() == ["kernel_tilde=-1.000e+00 (need > 0.0e+00)"]
    with pytest.raises(IdentityResidualError):
        report.raise_on_failure()


@pytest.mark.unit
def test_poincare_checks_use_an_upper_limit():
    """The Poincaré checks of the verification suite compare the worst ratio against a fixed ceiling."""
    report = run_verification(2, 8, seed=1, pairs=4)
    checks = [p for p in report.probes if p.name.startswith("poincare_ratio_")]
    assert len(checks) == 2
    for check in checks:
        assert check.comparison == "<=" and check.tolerance == POINCARE_RATIO_LIMIT
        assert check.passed and check.value >= 1.0


@pytest.mark.unit
def test_zero_case_study_has_no_rate():
    """Test the zero case has zero errors and no rate."""
    report = convergence_study("zero", "centered", [4, 8], dim=2)
    assert report.errors == [0.0, 0.0]
    assert report.fitted_rate is None
    assert [entry.pairwise_rate for entry in report.entries] == [None, None]
    assert all(entry.cg_iters == 0 for entry in report.entries)
    assert report.complete


@pytest.mark.unit
def test_study_rejects_unknown_case():
    """Test an unknown case name is refused."""
    with pytest.raises(UnknownCaseError):
        convergence_study("sine3", "centered", [8, 16])


@pytest.mark.unit
def test_failed_entry_keeps_partial_report():
    """Test a failed rung ends the study with a partial report."""
    report = convergence_study("sine4", "centered", [8, 16], dim=2, maxit=1)
    assert not report.complete
    assert report.entries == []
    assert "did not converge after 1 iterations" in report.failure


@pytest.mark.unit
def test_ladder_entry_reports_solver_failure():
    """Test a rung that hits the iteration cap reports failure."""
    result = solve_ladder_entry(LadderTask(0, 2, 8, "sine4", "centered", 1e-10, maxit=1))
    assert not result.success
    assert result.cg_iters == 1
    assert result.error_h2h is None
