"""Manufactured solutions, identity probes and convergence studies."""

from .manufactured import ManufacturedCase, manufactured_pair  # noqa: F401
from .studies import ConvergenceReport, convergence_study, run_verification  # noqa: F401
