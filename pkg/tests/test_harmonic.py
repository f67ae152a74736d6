"""Tests for walk-on-spheres harmonic measure and the checks built on it."""

import math

import numpy as np
import pytest

from python_gmt.config import WoSParams
from python_gmt.core import ball, circle_cloud, half_space, perforated_half_space, segment_cloud
from python_gmt.exceptions import GMTInputError
from python_gmt.harmonic import (
    TestSet,
    ainfty_scatter,
    arc_indicator,
    box_indicator,
    comparison_suite,
    cube_test_sets,
    doubling_profile_omega,
    everything,
    harmonic_measure,
    ks_uniform_angle,
    max_principle_check,
    wos_exits,
    wos_sample,
)
from python_gmt.metric_cubes import build_cube_tree


class TestWalkOnSpheres:
    def test_exits_lie_on_circle(self, disk):
        exits = wos_exits(disk, [0.3, -0.2], n_walks=2000, seed=1)
        assert exits.escaped_fraction == 0.0
        assert np.allclose(np.linalg.norm(exits.points, axis=1), 1.0)

    def test_same_seed_any_worker_count(self, disk):
        one = wos_exits(disk, [0.0, 0.0], 3000, seed=7, params=WoSParams(chunk_size=1000, workers=1))
        many = wos_exits(disk, [0.0, 0.0], 3000, seed=7, params=WoSParams(chunk_size=1000, workers=3))
        other = wos_exits(disk, [0.0, 0.0], 3000, seed=8, params=WoSParams(chunk_size=1000))
        assert np.array_equal(one.points, many.points, equal_nan=True)
        assert not np.array_equal(one.points, other.points, equal_nan=True)

    def test_hits_are_additive(self, disk):
        exits = wos_exits(disk, [0.0, 0.0], 4000, seed=3)
        first = exits.hits(arc_indicator(0.0, 1.0))
        second = exits.hits(arc_indicator(1.0, 2.0))
        both = exits.hits(arc_indicator(0.0, 2.0))
        assert not np.any(first & second)
        assert np.array_equal(first | second, both)
        assert exits.hits(everything).all()

    def test_exit_angles_are_uniform_from_center(self, disk):
        exits = wos_exits(disk, [0.0, 0.0], 5000, seed=11)
        stat, pvalue = ks_uniform_angle(exits)
        assert pvalue > 1e-3
        assert 0.0 <= stat < 0.05

    def test_single_sample(self, disk):
        point = wos_sample(disk, [0.0, 0.0], np.random.SeedSequence(4))
        assert point is not None
        assert np.linalg.norm(point) == pytest.approx(1.0)

    def test_larger_set_gets_more_mass(self, disk):
        exits = wos_exits(disk, [0.2, 0.1], 4000, seed=12)
        small, large = arc_indicator(0.0, 1.0), arc_indicator(0.0, 2.0)
        assert np.all(exits.hits(large)[exits.hits(small)])
        assert exits.estimate(small).value <= exits.estimate(large).value

    @pytest.mark.parametrize("z", [[2.0, 0.0], [1.0, 0.0], [0.0, 0.0, 0.0]])
    def test_rejects_bad_poles(self, disk, z):
        with pytest.raises(GMTInputError):
            wos_exits(disk, z, 100)

    def test_needs_enough_walks(self, disk):
        with pytest.raises(GMTInputError):
            harmonic_measure(disk, [0.0, 0.0], everything, n_walks=500)


@pytest.mark.slow
class TestHarmonicMeasure:
    def test_disk_arc_from_center(self, disk):
        est = harmonic_measure(disk, [0.0, 0.0], arc_indicator(0.0, math.pi / 3), n_walks=20000, seed=1)
        assert est.value == pytest.approx(1.0 / 6.0, abs=4 * est.std_err + 0.005)
        assert not est.unreliable

    def test_half_plane_cauchy_mass(self):
        est = harmonic_measure(
            half_space(2), [0.0, 1.0], box_indicator([-1.0, -0.01], [1.0, 0.01]), n_walks=20000, seed=2
        )
        assert est.value == pytest.approx(0.5, abs=4 * est.std_err + 0.005)
        assert est.escaped_fraction < 0.01

    def test_half_plane_doubling(self):
        table = doubling_profile_omega(
            half_space(2), [0.0, 4.0], np.array([[0.0, 0.0]]), [0.5, 1.0], n_walks=20000, seed=3
        )
        assert len(table.rows) == 2
        assert not any(row.indeterminate for row in table.rows)
        assert 1.5 <= table.sup_ratio <= 2.3

    def test_comparison_suite_on_disk(self, disk):
        report = comparison_suite(disk, [0.0, 0.0], [([1.0, 0.0], 0.5)], n_walks=5000, seed=4)
        kinds = [row.kind for row in report.rows]
        assert kinds == ["wbig", "ratio", "harnack"]
        assert 0.0 < report.constants["wbig_min"] < 1.0
        assert report.constants["harnack"] >= 1.0

    def test_max_principle_between_disk_and_half_plane(self):
        inner = ball(1.0, center=[0.0, 1.0])
        outer = half_space(2)
        F = segment_cloud((-0.05, 0.0), (0.05, 0.0), 0.01)
        report = max_principle_check(inner, outer, F, [0.0, 0.5], n_walks=20000, seed=5)
        assert report.passed
        assert report.outer.value >= report.inner.value - 3 * report.inner.std_err

    def test_ainfty_scatter_on_disk(self, disk):
        E = circle_cloud(256)
        tree = build_cube_tree(E, 0.25, 2)
        sets = cube_test_sets(tree, E.points[[0, 64]], [0.5], max_per_ball=4)
        assert sets
        scatter = ainfty_scatter(disk, E, sets, [0.0, 0.0], n_walks=20000, seed=6)
        assert set(scatter.modulus) == {"0.5", "0.2", "0.1"}
        assert scatter.rows
        assert all(row.omega_ratio <= 1.2 for row in scatter.rows)
        assert all(a > 0 and b > 0 for a, b in scatter.modulus.values())

    def test_ainfty_half_plane_tracks_length(self):
        E = segment_cloud((0.0, 0.0), (1.0, 0.0), 1.0 / 64)
        x = E.points[:, 0]
        sets = []
        for a, b in [(0.0, 0.25), (0.25, 0.5), (0.5, 0.75), (0.75, 1.0), (0.0, 0.5), (0.25, 0.75)]:
            members = np.flatnonzero((x >= a - 1e-12) & (x <= b + 1e-12))
            sets.append(TestSet((0.5, 0.0), 0.5, f"[{a},{b}]", tuple(int(i) for i in members)))
        scatter = ainfty_scatter(half_space(2), E, sets, [0.5, 1.0], n_walks=40000, seed=9)
        assert len(scatter.rows) == len(sets)
        for row in scatter.rows:
            length_ratio = row.hd_ratio / 2.0
            assert 0.5 <= row.omega_ratio / length_ratio <= 2.0

    def test_perforations_shield_the_plane(self):
        pole = [0.125, 0.125, 0.375]
        plane = box_indicator([-0.7, -0.7, -0.01], [0.7, 0.7, 0.01])
        values = []
        for m in (1, 2, 3):
            domain = perforated_half_space(m, radius_exponent=2)
            assert domain.sdist(np.array([pole]))[0] < 0
            values.append(harmonic_measure(domain, pole, plane, n_walks=20000, seed=10).value)
        assert values[0] > values[1] > values[2]


class TestCubeTestSets:
    @pytest.fixture
    def upper_half(self):
        sigma = circle_cloud(512)
        return sigma, build_cube_tree(sigma, 0.25, 3), np.flatnonzero(sigma.points[:, 1] >= 0.5)

    def test_sets_stay_inside_E(self, upper_half):
        sigma, tree, E = upper_half
        sets = cube_test_sets(tree, sigma.points[E[:1]], [1.0], E_idx=E)
        assert sets
        for ts in sets:
            assert set(ts.members) <= set(E.tolist())
            assert np.all(np.linalg.norm(sigma.points[list(ts.members)] - ts.xi, axis=1) < ts.r)

    def test_without_E_sets_may_leave_it(self, upper_half):
        sigma, tree, E = upper_half
        sets = cube_test_sets(tree, sigma.points[E[:1]], [1.0])
        assert any(not set(ts.members) <= set(E.tolist()) for ts in sets)

    def test_cells_missing_E_are_dropped(self, upper_half):
        sigma, tree, _ = upper_half
        assert cube_test_sets(tree, sigma.points[:1], [0.1], E_idx=[]) == []


class TestMaxPrincipleInputs:
    def test_F_must_touch_both_boundaries(self):
        inner = ball(1.0, center=[0.0, 1.0])
        F = segment_cloud((0.5, 0.0), (0.6, 0.0), 0.01)
        with pytest.raises(GMTInputError):
            max_principle_check(inner, half_space(2), F, [0.0, 0.5], n_walks=1000)

    def test_pole_inside_inner(self):
        inner = ball(1.0, center=[0.0, 1.0])
        F = segment_cloud((-0.05, 0.0), (0.05, 0.0), 0.01)
        with pytest.raises(GMTInputError):
            max_principle_check(inner, half_space(2), F, [3.0, 0.5], n_walks=1000)
