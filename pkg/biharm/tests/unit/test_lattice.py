"""Tests for grid construction and point classification."""

from __future__ import annotations

import pickle

import numpy as np
import pytest

from biharm.core.errors import AxisError, GridSizeError
from biharm.core.lattice import (
    Face,
    PointTag,
    build_grid,
    classify_point,
    faces,
    gamma_ij,
    gamma_ij_mask,
)


@pytest.mark.unit
@pytest.mark.parametrize("n,m", [(1, 4), (2, 4), (2, 8), (3, 5)])
def test_set_sizes(n, m):
    """Test interior, closed and boundary point counts."""
    grid = build_grid(n, m)
    assert grid.count("interior") == (m - 1) ** n
    assert grid.count("closed") == (m + 1) ** n
    assert grid.count("boundary") == (m + 1) ** n - (m - 1) ** n
    corners = 2**n if n >= 2 else 0
    assert grid.count("member") == (m + 3) ** n - corners
    assert grid.h == pytest.approx(1.0 / m)


@pytest.mark.unit
@pytest.mark.parametrize("n,m", [(2, 3), (0, 8), (3, 1)])
def test_rejects_small_grids(n, m):
    """Test grids below the minimum size are refused."""
    with pytest.raises(GridSizeError):
        build_grid(n, m)


@pytest.mark.unit
def test_classification_examples(grid_2d):
    """Test point classification on interior, edge and ghost points."""
    m = grid_2d.m
    assert classify_point(grid_2d, (3, 4)).tag is PointTag.INTERIOR
    edge = classify_point(grid_2d, (0, 4))
    assert edge.tag is PointTag.BOUNDARY
    assert edge.faces == (Face(0, 0),)
    assert not edge.singular
    corner = classify_point(grid_2d, (m, 0))
    assert corner.singular
    assert set(corner.faces) == {Face(0, 1), Face(1, 0)}
    mirror_ghost = classify_point(grid_2d, (-1, 3))
    assert mirror_ghost.tag is PointTag.GHOST and not mirror_ghost.near_singular
    near = classify_point(grid_2d, (-1, 0))
    assert near.tag is PointTag.GHOST and near.near_singular
    assert classify_point(grid_2d, (-1, -1)).tag is PointTag.OUTSIDE
    assert classify_point(grid_2d, (m + 2, 3)).tag is PointTag.OUTSIDE


@pytest.mark.unit
def test_one_dimensional_grid_keeps_extreme_points():
    """Test a 1D grid keeps both ghost points and no singular ones."""
    grid = build_grid(1, 6)
    assert classify_point(grid, (-1,)).tag is PointTag.GHOST
    assert classify_point(grid, (7,)).tag is PointTag.GHOST
    assert grid.count("singular") == 0


@pytest.mark.unit
def test_points_are_lexicographic(grid_2d):
    """Test point enumeration order and offsets."""
    pts = grid_2d.points("interior")
    keys = [tuple(p) for p in pts]
    assert keys == sorted(keys)
    assert grid_2d.offset((1, 1), "interior") == 0
    assert grid_2d.offset((1, 2), "interior") == 1
    assert grid_2d.offset((0, 0), "interior") == -1


@pytest.mark.unit
def test_faces_enumeration(grid_3d):
    assert len(faces(grid_3d)) == 6
    assert str(Face(2, 1)) == "x3=1"
    assert Face(0, 0).normal_sign == -1


@pytest.mark.unit
def test_gamma_ij_keeps_square_in_closed_cube(grid_2d):
    """Test Γ_ij holds the points whose difference square stays in the cube."""
    m = grid_2d.m
    pts = gamma_ij(grid_2d, 0, 1)
    assert (0, 1) in pts
    assert (0, 0) not in pts  # x - h e_j leaves the cube
    assert (m, 3) not in pts  # x + h e_i leaves the cube
    assert all(grid_2d.boundary_mask[grid_2d.box_index(p)] for p in pts)
    assert gamma_ij_mask(grid_2d, 0, 1).sum() == len(pts)


@pytest.mark.unit
def test_gamma_ij_rejects_equal_axes(grid_2d):
    """Test Γ_ij refuses equal or out-of-range axes."""
    with pytest.raises(AxisError):
        gamma_ij(grid_2d, 1, 1)
    with pytest.raises(AxisError):
        gamma_ij(grid_2d, 0, 2)


@pytest.mark.unit
def test_grid_pickles_by_value(grid_3d):
    """Test a grid survives pickling for worker processes."""
    clone = pickle.loads(pickle.dumps(grid_3d))
    assert clone == grid_3d
    assert np.array_equal(clone.member_mask, grid_3d.member_mask)
