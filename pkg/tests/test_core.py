"""Tests for implicit domains, point clouds, measures and Hausdorff estimates."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from python_gmt.core import (
    GALLERY,
    DiscreteMeasure,
    ImplicitDomain,
    PointCloud,
    annulus,
    ball,
    box_inside,
    box_meets_boundary,
    cantor_dust,
    circle_cloud,
    complement_of_points,
    cube_complement,
    gallery_domain,
    half_space,
    hausdorff_estimate,
    hausdorff_weights,
    lipschitz_violation,
    parametric_cloud,
    punctured_space,
    sample_boundary,
    segment_cloud,
    signed_distance,
    slab,
)
from python_gmt.exceptions import GMTInputError


@st.composite
def points_2d(draw, min_points=1, max_points=64, scale=3.0):
    n = draw(st.integers(min_value=min_points, max_value=max_points))
    seed = draw(st.integers(min_value=0, max_value=2**31 - 1))
    rng = np.random.default_rng(seed)
    return rng.uniform(-scale, scale, size=(n, 2))


class TestSignedDistance:
    def test_ball_values(self, disk):
        assert signed_distance(disk, [0.0, 0.0]) == pytest.approx(-1.0)
        assert signed_distance(disk, [2.0, 0.0]) == pytest.approx(1.0)
        assert signed_distance(disk, [0.6, 0.8]) == pytest.approx(0.0, abs=1e-12)

    def test_single_point_returns_float(self, disk):
        assert isinstance(signed_distance(disk, [0.5, 0.0]), float)
        assert signed_distance(disk, np.zeros((3, 2))).shape == (3,)

    def test_rejects_nonfinite(self, disk):
        with pytest.raises(GMTInputError):
            signed_distance(disk, [np.nan, 0.0])

    def test_half_space_and_slab(self):
        hs = half_space(2)
        assert signed_distance(hs, [3.0, 0.25]) == pytest.approx(-0.25)
        thin = slab(eps=0.5)
        assert signed_distance(thin, [0.0, 0.25]) == pytest.approx(-0.25)
        assert signed_distance(thin, [0.0, 1.0]) == pytest.approx(0.5)

    def test_annulus_and_cube_complement(self):
        ring = annulus(0.5, 1.0)
        assert signed_distance(ring, [0.75, 0.0]) == pytest.approx(-0.25)
        assert signed_distance(ring, [0.0, 0.0]) == pytest.approx(0.5)
        cc = cube_complement(1.0)
        assert signed_distance(cc, [1.5, 0.0]) == pytest.approx(-1.0)
        assert signed_distance(cc, [0.0, 0.0]) == pytest.approx(0.5)

    def test_punctured_space_has_zero_diameter_boundary(self):
        dom = punctured_space(2)
        assert dom.diam_boundary == 0.0
        assert dom.bounded
        assert signed_distance(dom, [3.0, 4.0]) == pytest.approx(-5.0)

    @pytest.mark.parametrize("name", sorted(GALLERY))
    def test_gallery_oracles_are_lipschitz(self, name):
        dom = gallery_domain(name)
        assert lipschitz_violation(dom, n_pairs=500, seed=3, scale=0.3) <= 1e-9

    @given(points_2d())
    @settings(max_examples=40, deadline=None)
    def test_property_complement_of_points_distance(self, pts):
        dom = complement_of_points(pts)
        query = np.array([[0.1, -0.2], [5.0, 5.0]])
        expected = np.min(np.linalg.norm(query[:, None, :] - pts[None], axis=2), axis=1)
        assert np.allclose(-dom.signed_distance(query), expected)


class TestBoxOracles:
    def test_ball_box_tests(self, disk):
        lo = np.array([[-0.1, -0.1], [0.6, 0.6], [2.0, 2.0]])
        hi = lo + 0.2
        assert box_inside(disk, lo, hi).tolist() == [True, False, False]
        assert box_meets_boundary(disk, lo, hi).tolist() == [False, True, False]

    def test_half_space_box_tests(self):
        hs = half_space(2)
        lo = np.array([[0.0, 0.5], [0.0, -0.5]])
        hi = lo + 1.0
        assert box_inside(hs, lo, hi).tolist() == [True, False]
        assert box_meets_boundary(hs, lo, hi).tolist() == [False, True]


class TestGallery:
    def test_unknown_domain(self):
        with pytest.raises(GMTInputError):
            gallery_domain("klein_bottle")

    def test_bad_parameters(self):
        with pytest.raises(GMTInputError):
            gallery_domain("ball", radius=1.0, colour="red")

    def test_params_are_forwarded(self):
        dom = gallery_domain("slab", eps=0.125)
        assert dom.params["eps"] == 0.125
        assert dom.bbox[1][-1] == pytest.approx(0.25)

    def test_dimension_is_validated(self):
        with pytest.raises(GMTInputError):
            half_space(1)

    def test_perforations_are_outside(self):
        dom = gallery_domain("perforated_half_space", m=2, radius_exponent=2)
        # center of the n = 0 hole at (0, 0, 1) with radius 1/4
        assert signed_distance(dom, [0.0, 0.0, 1.0]) == pytest.approx(0.25)
        assert signed_distance(dom, [0.5, 0.5, 0.1]) < 0


class TestPointClouds:
    def test_cloud_is_read_only(self, circle):
        with pytest.raises(ValueError):
            circle.points[0, 0] = 5.0

    def test_mesh_must_be_positive(self):
        with pytest.raises(GMTInputError):
            PointCloud(np.zeros((2, 2)), 0.0)

    def test_unknown_source(self):
        with pytest.raises(GMTInputError):
            PointCloud(np.zeros((2, 2)), 1.0, "satellite")

    def test_csv_round_trip_keeps_mesh_default(self, tmp_path):
        cloud = segment_cloud((0.0, 0.0), (1.0, 0.0), 0.125)
        path = tmp_path / "segment.csv"
        cloud.to_csv(path)
        loaded = PointCloud.from_csv(path)
        assert np.array_equal(loaded.points, cloud.points)
        assert loaded.mesh == pytest.approx(0.125)

    def test_generators(self):
        assert len(circle_cloud(100)) == 100
        assert circle_cloud(100).mesh == pytest.approx(2 * math.pi / 100)
        dust = cantor_dust(3)
        assert len(dust) == 64
        assert dust.mesh == pytest.approx(4.0 ** -3)
        assert len(parametric_cloud("arc", n=10, start=0.0, stop=1.0)) == 10
        with pytest.raises(GMTInputError):
            parametric_cloud("spiral")


class TestDiscreteMeasure:
    def test_negative_weights_rejected(self):
        with pytest.raises(GMTInputError):
            DiscreteMeasure(np.array([1.0, -0.5]))

    def test_mass_by_indices_and_mask(self):
        mu = DiscreteMeasure(np.array([0.1, 0.2, 0.3, 0.4]))
        assert mu.total == pytest.approx(1.0)
        assert mu.mass([3, 1]) == pytest.approx(0.6)
        assert mu.mass(np.array([True, False, True, False])) == pytest.approx(0.4)
        assert mu.mass([]) == 0.0

    @given(st.lists(st.floats(min_value=0.0, max_value=1e6), min_size=1, max_size=200))
    @settings(max_examples=50, deadline=None)
    def test_property_mass_is_order_independent(self, weights):
        mu = DiscreteMeasure(np.array(weights))
        idx = np.arange(len(weights))
        assert mu.mass(idx) == mu.mass(idx[::-1])
        assert mu.mass(idx) == mu.total


class TestHausdorff:
    def test_segment_cell_count(self):
        seg = segment_cloud((0.0, 0.0), (1.0, 0.0), 1.0 / 64)
        est = hausdorff_estimate(seg.points, 1, 1.0 / 64)
        assert float(est) == pytest.approx(65.0 / 64.0)
        assert est.n_cells == 65

    def test_minkowski_circle_length(self):
        cloud = circle_cloud(4096)
        est = hausdorff_estimate(cloud.points, 1, 1.0 / 64, method="minkowski")
        assert float(est) == pytest.approx(2 * math.pi, rel=0.03)

    def test_empty_set(self):
        est = hausdorff_estimate(np.zeros((0, 2)), 1, 0.1)
        assert float(est) == 0.0
        assert est.empty

    def test_dimension_out_of_range(self):
        with pytest.raises(GMTInputError):
            hausdorff_estimate(np.zeros((3, 2)), 3, 0.1)

    def test_unknown_method(self):
        with pytest.raises(GMTInputError):
            hausdorff_estimate(np.zeros((3, 2)), 1, 0.1, method="boxes")

    def test_weights_carry_cell_measure(self, segment):
        mu = hausdorff_weights(segment, 1)
        assert mu.total == pytest.approx(float(hausdorff_estimate(segment.points, 1, segment.mesh)))


class TestSampleBoundary:
    def test_disk_samples_lie_on_circle(self, disk):
        cloud = sample_boundary(disk, 2.0 ** -5)
        assert cloud.source == "boundary"
        assert len(cloud) > 100
        assert np.allclose(np.linalg.norm(cloud.points, axis=1), 1.0, atol=1e-8)

    def test_samples_form_a_net(self, disk):
        h = 2.0 ** -5
        cloud = sample_boundary(disk, h)
        theta = np.linspace(0, 2 * np.pi, 1000, endpoint=False)
        ring = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        gaps, _ = cloud.kdtree().query(ring, k=1)
        assert gaps.max() <= 2 * h

    def test_half_plane_samples_stay_in_bbox(self, half_plane):
        cloud = sample_boundary(half_plane, 2.0 ** -4)
        assert np.all(cloud.points[:, 1] == 0.0)
        assert np.all(np.abs(cloud.points[:, 0]) <= 1.0)

    def test_boundary_outside_bbox_gives_empty_cloud(self):
        far = ImplicitDomain(
            2, lambda x: np.linalg.norm(x - 10.0, axis=1) - 0.5, (np.zeros(2), np.ones(2)), name="far"
        )
        assert len(sample_boundary(far, 0.1)) == 0

    def test_mesh_must_be_positive(self, disk):
        with pytest.raises(GMTInputError):
            sample_boundary(disk, 0.0)
