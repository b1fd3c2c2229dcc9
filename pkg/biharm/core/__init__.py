"""Core discretization: grids, difference operators, norms, extensions and the solver."""

from .difference_ops import BcScheme, LatticeField  # noqa: F401
from .lattice import GridSpec, build_grid  # noqa: F401
from .scheme_solver import SolveResult, solve  # noqa: F401
