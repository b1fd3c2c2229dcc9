"""Pytest configuration and shared fixtures."""

from __future__ import annotations

from typing import Generator

import numpy as np
import pytest

from biharm.config_loader import get_settings
from biharm.core.difference_ops import LatticeField
from biharm.core.lattice import GridSpec, build_grid

SEED = 20240611


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch) -> Generator[None, None, None]:
    """Drop cached settings so each test sees its own ``BIHARM_*`` environment."""
    for name in ("BIHARM_JOBS", "BIHARM_EVENTS_ENABLED", "BIHARM_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(SEED)


@pytest.fixture
def grid_2d() -> GridSpec:
    return build_grid(2, 8)


@pytest.fixture
def grid_3d() -> GridSpec:
    return build_grid(3, 6)


def random_field(grid: GridSpec, rng: np.random.Generator) -> LatticeField:
    return LatticeField(grid, rng.standard_normal(grid.count("member")))
