"""Tests for Whitney decompositions, cube paths and the NTA verifiers."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from python_gmt.core import ball, half_space, rooms_and_corridor, slab
from python_gmt.exceptions import GMTConstructionError, GMTInputError
from python_gmt.whitney import (
    DilatedCubeUnion,
    DyadicCube,
    find_corkscrew,
    fit_uniformity,
    verify_whitney,
    whitney_decompose,
    whitney_distance,
)


@st.composite
def dyadic_cubes(draw, dim=2):
    level = draw(st.integers(min_value=-8, max_value=4))
    anchor = tuple(draw(st.integers(min_value=-50, max_value=50)) for _ in range(dim))
    return DyadicCube(level, anchor)


class TestDyadicCube:
    def test_geometry(self):
        q = DyadicCube(-1, (1, 0))
        assert q.side == 0.5
        assert q.lo.tolist() == [0.5, 0.0]
        assert q.hi.tolist() == [1.0, 0.5]
        assert q.center.tolist() == [0.75, 0.25]
        assert q.diameter == pytest.approx(0.5 * math.sqrt(2))

    def test_dilate_keeps_center(self):
        lo, hi = DyadicCube(0, (0, 0)).dilate(3.0)
        assert lo.tolist() == [-1.0, -1.0]
        assert hi.tolist() == [2.0, 2.0]

    @given(dyadic_cubes())
    @settings(max_examples=100, deadline=None)
    def test_property_children_tile_parent(self, cube):
        children = cube.children()
        assert len(children) == 4
        assert all(c.parent() == cube for c in children)
        assert sum(c.side ** 2 for c in children) == pytest.approx(cube.side ** 2)
        assert np.allclose(np.min([c.lo for c in children], axis=0), cube.lo)
        assert np.allclose(np.max([c.hi for c in children], axis=0), cube.hi)

    def test_ordering(self):
        cubes = sorted([DyadicCube(0, (1, 0)), DyadicCube(-1, (0, 0)), DyadicCube(0, (0, 0))])
        assert cubes[0] == DyadicCube(-1, (0, 0))


class TestWhitneyDecompose:
    def test_disk_forest_passes_checks(self, disk):
        forest = whitney_decompose(disk, K=3, n_min=-5)
        assert len(forest) > 0
        assert forest.truncated
        check = verify_whitney(forest, disk, seed=1)
        assert check.distance_violations == 0
        assert check.passed

    def test_dilated_cubes_stay_inside(self, disk):
        forest = whitney_decompose(disk, K=3, n_min=-4)
        lo = forest.centers - 1.5 * forest.sides[:, None]
        hi = forest.centers + 1.5 * forest.sides[:, None]
        far = np.maximum(np.abs(lo), np.abs(hi))
        assert np.all(np.linalg.norm(far, axis=1) < 1.0)

    def test_half_plane_neighbours_differ_by_at_most_two(self, half_plane_forest):
        coo = half_plane_forest.adjacency.tocoo()
        ratios = half_plane_forest.sides[coo.row] / half_plane_forest.sides[coo.col]
        assert ratios.min() >= 0.5
        assert ratios.max() <= 2.0

    def test_restrict_prunes_cubes(self, half_plane):
        full = whitney_decompose(half_plane, n_min=-5)
        right = whitney_decompose(half_plane, n_min=-5, restrict=lambda lo, hi: hi[:, 0] >= 0.5)
        assert 0 < len(right) < len(full)
        assert np.all(right.hi[:, 0] >= 0.5)

    def test_half_plane_window_keeps_two_rows(self):
        forest = whitney_decompose(half_space(2), K=3, box=([0.0, 0.0], [8.0, 8.0]), n_min=-3)
        assert set(forest.anchors[:, 1].tolist()) == {2, 3}
        assert set(forest.levels.tolist()) == {1, 0, -1, -2, -3}
        assert DyadicCube(0, (0, 2)) in forest
        assert DyadicCube(0, (0, 1)) not in forest
        assert np.all(forest.lo >= 0.0) and np.all(forest.hi <= 8.0)

    def test_rejects_small_K(self, disk):
        with pytest.raises(GMTInputError):
            whitney_decompose(disk, K=2)

    def test_rejects_inverted_levels(self, disk):
        with pytest.raises(GMTInputError):
            whitney_decompose(disk, n_min=5, n_top=2)

    def test_tail_measure_counts_truncated_cubes(self, disk):
        forest = whitney_decompose(disk, n_min=-3)
        expected = len(forest.tail_levels) * 2.0 ** (-3)
        assert forest.tail_measure(1) == pytest.approx(expected)
        flags = [r["flags"] for r in forest.to_records()]
        assert flags.count(["truncated"]) == len(forest.tail_levels)


class TestWhitneyDistance:
    def test_same_cube_has_length_one(self, half_plane_forest):
        q = half_plane_forest.cube(0)
        path = whitney_distance(half_plane_forest, q, q)
        assert path.length_d == 1.0

    def test_neighbours_have_length_two(self, half_plane_forest):
        j = int(half_plane_forest.neighbors(0)[0])
        path = whitney_distance(half_plane_forest, half_plane_forest.cube(0), half_plane_forest.cube(j))
        assert path.length_d == 2.0
        assert path.cubes[0] == half_plane_forest.cube(0)

    def test_half_plane_row_path(self):
        forest = whitney_decompose(half_space(2), K=3, box=([0.0, 0.0], [8.0, 8.0]), n_min=-3)
        Q, R = DyadicCube(0, (0, 2)), DyadicCube(0, (4, 2))
        path = whitney_distance(forest, Q, R)
        assert path.length_d == 5.0
        assert whitney_distance(forest, R, Q).length_d == 5.0

    def test_unknown_cube(self, half_plane_forest):
        with pytest.raises(GMTInputError):
            whitney_distance(half_plane_forest, DyadicCube(10, (0, 0)), half_plane_forest.cube(0))


class TestUniformity:
    def test_disk_is_uniform(self, disk):
        forest = whitney_decompose(disk, K=3, n_min=-5)
        fit = fit_uniformity(forest, n_pairs=300, seed=2)
        assert fit.consistent
        assert fit.n_pairs == 300
        assert fit.envelope == sorted(fit.envelope)

    def test_unresolved_corridor_disconnects(self):
        rooms = rooms_and_corridor(w=2.0 ** -8)
        forest = whitney_decompose(rooms, K=3, n_min=-5)
        with pytest.raises(GMTConstructionError):
            fit_uniformity(forest, n_pairs=400, seed=0)


class TestCorkscrew:
    def test_half_plane_interior_ball(self):
        found = find_corkscrew(half_space(2), [0.0, 0.0], 1.0, "interior", C=2.0)
        assert found is not None
        assert found.radius == pytest.approx(0.5, rel=1e-6)
        assert found.center[1] > 0

    def test_half_plane_exterior_ball(self):
        found = find_corkscrew(half_space(2), [0.0, 0.0], 1.0, "exterior", C=2.0)
        assert found is not None
        assert found.center[1] < 0

    def test_thin_slab_has_no_interior_corkscrew(self):
        assert find_corkscrew(slab(), [0.0, 0.0], 0.5, "interior", C=4.0) is None

    def test_center_must_be_on_boundary(self):
        with pytest.raises(GMTInputError):
            find_corkscrew(half_space(2), [0.0, 1.0], 1.0)

    def test_disk_interior_ball(self, disk):
        xi = np.array([1.0, 0.0])
        found = find_corkscrew(disk, xi, 0.5, "interior", C=4.0)
        assert found is not None
        assert found.radius >= 0.125 - 1e-9
        center = np.asarray(found.center)
        assert np.linalg.norm(center - xi) + found.radius <= 0.5 + 1e-9
        assert np.linalg.norm(center) + found.radius <= 1.0 + 1e-9
        rng = np.random.default_rng(0)
        u = rng.normal(size=(10000, 2))
        x = center + found.radius * rng.uniform(size=(10000, 1)) ** 0.5 * u / np.linalg.norm(u, axis=1)[:, None]
        assert np.all(np.linalg.norm(x, axis=1) <= 1.0 + 1e-9)
        assert np.all(np.linalg.norm(x - xi, axis=1) <= 0.5 + 1e-9)

    def test_disk_exterior(self):
        found = find_corkscrew(ball(1.0), [1.0, 0.0], 0.5, "exterior", C=2.0)
        assert found is not None
        assert np.linalg.norm(found.center) - 1.0 >= found.radius - 1e-9


class TestDilatedCubeUnion:
    def test_single_cube(self):
        union = DilatedCubeUnion(np.array([0]), np.array([[0, 0]]), 1.0)
        assert union.sdist(np.array([[0.5, 0.5]]))[0] == pytest.approx(-0.5)
        assert union.sdist(np.array([[2.0, 0.5]]))[0] == pytest.approx(1.0)
        assert union.contains(np.array([[0.5, 0.5], [2.0, 0.5]])).tolist() == [True, False]

    def test_multiplicity_counts_overlaps(self):
        union = DilatedCubeUnion(np.array([0, 0]), np.array([[0, 0], [1, 0]]), 9.0 / 8.0)
        x = np.array([[1.0, 0.5], [0.25, 0.5], [5.0, 5.0]])
        assert union.multiplicity(x).tolist() == [2, 1, 0]
        assert [sorted(m) for m in union.members_containing(x)] == [[0, 1], [0], []]
