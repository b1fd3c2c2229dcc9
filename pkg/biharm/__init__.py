"""Top-level package for the biharm finite-difference toolkit."""

from .config_loader import load_run_config  # noqa: F401
