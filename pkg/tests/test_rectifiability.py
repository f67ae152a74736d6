"""Tests for bilateral beta numbers, Carleson energy and far-point witnesses."""

import numpy as np
import pytest

from python_gmt.core import PointCloud, circle_cloud, segment_cloud
from python_gmt.exceptions import GMTInputError
from python_gmt.rectifiability import (
    NetDistance,
    bbeta,
    beta_sweep,
    carleson_energy,
    default_scale_count,
    far_point_witness,
)


@pytest.fixture
def corner():
    """L-shaped polyline through the origin at spacing 1/64."""
    h = 1.0 / 64
    legs = [
        segment_cloud((-1.0, 0.0), (0.0, 0.0), h).points,
        segment_cloud((0.0, 0.0), (0.0, 1.0), h).points,
    ]
    return PointCloud(np.unique(np.concatenate(legs), axis=0), h)


class TestNetDistance:
    def test_short_edges_fill_gaps(self, segment):
        net = NetDistance(segment)
        q = np.array([[0.5 / 64, 0.0], [0.0, 0.1]])
        d = net(q)
        assert d[0] == pytest.approx(0.0, abs=1e-12)
        assert d[1] == pytest.approx(0.1)


class TestBeta:
    def test_segment_is_flat(self, segment):
        rec = bbeta(segment, [0.0, 0.0], 0.5)
        assert rec.value == pytest.approx(0.0, abs=1e-9)
        assert abs(rec.plane_normal[1]) == pytest.approx(1.0)
        assert not rec.degenerate

    def test_corner_is_not_flat(self, corner):
        rec = bbeta(corner, [0.0, 0.0], 0.5)
        assert rec.value >= 0.7
        assert rec.flat_term >= 0.7

    def test_center_must_be_in_cloud(self, segment):
        with pytest.raises(GMTInputError):
            bbeta(segment, [0.0, 0.5], 0.1)

    def test_radius_must_be_positive(self, segment):
        with pytest.raises(GMTInputError):
            bbeta(segment, [0.0, 0.0], 0.0)

    def test_sweep_order(self, segment):
        centers = np.array([[0.0, 0.0], [0.5, 0.0]])
        records = beta_sweep(segment, centers, [0.25, 0.125])
        assert [(r.xi[0], r.r) for r in records] == [(0.0, 0.25), (0.0, 0.125), (0.5, 0.25), (0.5, 0.125)]

    def test_circle_beta_scales_linearly(self):
        circle = circle_cloud(2 ** 14)
        radii = [1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8]
        records = beta_sweep(circle, circle.points[:1], radii)
        ratios = np.array([rec.value / rec.r for rec in records])
        assert np.all(ratios > 0)
        assert ratios.max() / ratios.min() <= 1.2


class TestCarlesonEnergy:
    def test_default_scale_count(self):
        assert default_scale_count(0.5, 1.0 / 64) == 4
        assert default_scale_count(0.01, 1.0) == 1

    def test_segment_has_no_bad_scales(self, segment):
        report = carleson_energy(segment, [0.0, 0.0], 0.5, epsilon=0.1)
        assert report.estimate == 0.0
        assert report.n_bad == 0
        assert report.n_cells > 0

    def test_corner_has_bad_scales(self, corner):
        report = carleson_energy(corner, [0.0, 0.0], 0.5, epsilon=0.1, n_scales=3)
        assert report.n_bad > 0
        assert report.estimate > 0
        assert report.C_UR_emp == pytest.approx(report.estimate / 0.5)


class TestFarPointWitness:
    def test_witness_found_on_segment(self, segment):
        E = np.flatnonzero(segment.points[:, 0] <= -0.5)
        wit = far_point_witness(segment, segment, E, [0.0, 0.0], 0.5, epsilon=0.1, C=1.0)
        assert wit.hypotheses_met
        assert wit.found
        assert not wit.counterexample_candidate
        assert wit.distance >= 0.05
        assert wit.z[0] > 0.4

    def test_epsilon_range(self, segment):
        with pytest.raises(GMTInputError):
            far_point_witness(segment, segment, [0], [0.0, 0.0], 0.5, epsilon=0.2, C=1.0)

    def test_large_beta_voids_hypotheses(self, corner):
        E = np.flatnonzero(corner.points[:, 0] <= -0.5)
        wit = far_point_witness(corner, corner, E, [0.0, 0.0], 0.5, epsilon=0.1, C=1.0)
        assert not wit.hypotheses_met
        assert not wit.found
        assert "beta" in wit.reason
