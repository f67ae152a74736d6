"""Tests for inner and outer sawtooth domains over a boundary segment."""

import math

import numpy as np
import pytest

from python_gmt.core import (
    DiscreteMeasure,
    PointCloud,
    arc_cloud,
    ball,
    half_space,
    hausdorff_weights,
    segment_cloud,
)
from python_gmt.exceptions import GMTConstructionError, GMTInputError
from python_gmt.pipeline import build_sawtooth
from python_gmt.sawtooth import (
    boundary_cube_sum,
    boundary_cubes,
    boundary_sum_sweep,
    build_inner_sawtooth,
    build_outer_sawtooth,
    check_trace,
    comparability_witnesses,
    localization,
    regularity_profile,
    sample_sawtooth_boundary,
    sandwich_check,
)
from python_gmt.whitney import whitney_decompose

H = 2.0 ** -5


@pytest.fixture(scope="module")
def base():
    return half_space(2, extent=1.0)


@pytest.fixture(scope="module")
def E():
    return segment_cloud((-0.5, 0.0), (0.5, 0.0), H)


@pytest.fixture(scope="module")
def inner(base, E):
    forest = whitney_decompose(base, K=3, n_min=-8)
    return build_inner_sawtooth(base, forest, E, xi0=[0.0, 0.0], r0=0.5)


@pytest.fixture(scope="module")
def outer(base, E):
    return build_outer_sawtooth(base, E)


class TestInnerSawtooth:
    def test_core_sits_inside_base(self, inner, base):
        assert len(inner.core) > 0
        lo, hi = inner.cube_bounds()
        assert np.all(lo[:, 1] > 0)
        assert inner.params["r0"] == 0.5

    def test_sdist_sign(self, inner):
        q = inner.forest.centers[inner.core[0]]
        assert inner.contains(q[None])[0]
        assert not inner.contains(np.array([[0.0, -0.5]]))[0]

    def test_trace_matches_E(self, inner, E):
        report = check_trace(inner, E, H)
        assert report.passed
        assert report.max_E_gap <= 2 * H
        assert report.n_trace_samples > 0

    def test_trace_fails_after_removing_cubes(self, inner, E):
        x = inner.forest.centers[inner.core, 0]
        holed = inner.drop_cubes((x >= 0.4) & (x <= 0.6))
        assert len(holed.core) < len(inner.core)
        report = check_trace(holed, E, H)
        assert not report.passed
        assert report.witness is not None

    def test_localization(self, inner):
        loc = localization(inner, [0.0, 0.0], 0.5)
        assert 1.0 <= loc.C_minus_emp <= 8.0
        assert loc.boundary_diameter > 0

    def test_to_json(self, inner):
        data = inner.to_json()
        assert data["kind"] == "inner"
        assert len(data["cubes"]) == len(inner.core)

    def test_empty_E(self, base, inner):
        with pytest.raises(GMTConstructionError):
            build_inner_sawtooth(base, inner.forest, PointCloud(np.zeros((0, 2)), H))

    def test_E_off_boundary(self, base, inner):
        lifted = segment_cloud((-0.5, 0.3), (0.5, 0.3), H)
        with pytest.raises(GMTInputError):
            build_inner_sawtooth(base, inner.forest, lifted)

    def test_E_outside_reference_ball(self, base, inner, E):
        with pytest.raises(GMTInputError):
            build_inner_sawtooth(base, inner.forest, E, xi0=[0.0, 0.0], r0=0.25)


class TestOuterSawtooth:
    def test_sandwich(self, inner, base, outer):
        result = sandwich_check(inner, base, outer, n=100000, seed=5)
        assert result.passed
        assert result.witness is None

    def test_outer_contains_base(self, outer):
        assert outer.contains(np.array([[0.0, 0.5]]))[0]
        assert outer.params["n_min"] == int(math.floor(math.log2(H))) - 3

    def test_rejects_small_K(self, base, E):
        with pytest.raises(GMTInputError):
            build_outer_sawtooth(base, E, K=8)

    def test_boundary_samples(self, outer):
        cloud = sample_sawtooth_boundary(outer, H)
        assert len(cloud) > 0
        assert np.all(outer.sdist(cloud.points) >= -1e-9)


class TestBoundarySums:
    def test_monotone_in_radius(self, inner):
        sums = [boundary_cube_sum(inner, [0.5, 0.0], r).sum_d for r in (0.05, 0.1, 0.2)]
        assert sums == sorted(sums)
        assert sums[0] > 0

    def test_large_ball_is_clipped(self, inner):
        assert boundary_cube_sum(inner, [0.0, 0.0], 10.0).clipped
        assert not boundary_cube_sum(inner, [0.5, 0.0], 0.1).clipped

    def test_sweep_sup(self, inner):
        centers = np.array([[0.5, 0.0], [-0.5, 0.0]])
        rows, sup = boundary_sum_sweep(inner, centers, [0.1, 0.2])
        assert len(rows) == 4
        assert sup == max(row[3] for row in rows)

    def test_rejects_nonpositive_radius(self, inner):
        with pytest.raises(GMTInputError):
            boundary_cube_sum(inner, [0.0, 0.0], 0.0)

    def test_comparability_covers_boundary_cubes(self, inner, E, segment):
        wit = comparability_witnesses(inner, E, segment)
        assert len(wit.y) + wit.skipped == len(boundary_cubes(inner))
        if len(wit.y):
            assert wit.constants["dist_QE_over_side_min"] > 0


class TestRegularityProfile:
    def test_segment_is_one_regular(self, segment):
        mu = hausdorff_weights(segment, 1)
        radii = [0.1, 0.2]
        prof = regularity_profile(segment, mu, radii, centers=np.array([[0.0, 0.0], [0.25, 0.0]]))
        assert prof.A_upper <= 2.0 + 2 * segment.mesh / min(radii)
        assert prof.A_lower == 1.0
        assert prof.n_balls == 4

    def test_zero_mass_ball(self, segment):
        mu = hausdorff_weights(segment, 1)
        prof = regularity_profile(segment, mu, [0.1], centers=np.array([[5.0, 5.0]]))
        assert math.isinf(prof.A_lower)
        assert prof.witness_lower is not None

    def test_size_mismatch(self, segment):
        with pytest.raises(GMTInputError):
            regularity_profile(segment, DiscreteMeasure.uniform(3), [0.1])


@pytest.mark.slow
class TestFineMeshTrace:
    FINE = 2.0 ** -8

    def test_half_plane(self, base):
        E = segment_cloud((-0.125, 0.0), (0.125, 0.0), self.FINE)
        saw = build_sawtooth("inner", base, E)
        report = check_trace(saw, E, self.FINE)
        assert report.passed

    def test_disk(self):
        n = int(round((math.pi / 8) / self.FINE)) + 1
        E = arc_cloud(n, -math.pi / 16, math.pi / 16)
        saw = build_sawtooth("inner", ball(1.0), E)
        report = check_trace(saw, E, E.mesh)
        assert report.passed
