"""Tests for doubling profiles, porous cubes, Carleson sums and refinement."""

import math

import numpy as np
import pytest

from python_gmt.config import PorosityConfig
from python_gmt.core import Ball, DiscreteMeasure, circle_cloud, hausdorff_weights
from python_gmt.exceptions import GMTConfigurationError, GMTInputError, GMTRefinementError
from python_gmt.metric_cubes import build_cube_tree
from python_gmt.porosity import (
    ROOT_KEY,
    carleson_sum,
    complement_cubes,
    empirical_carleson_norm,
    estimate_doubling,
    lambda_coefficient,
    mass_scaling_check,
    porous_cubes,
    refine_set,
    refine_with_retry,
    shell_decay,
)


@pytest.fixture
def mu(circle):
    return hausdorff_weights(circle, 1)


@pytest.fixture
def upper_half(circle):
    return np.flatnonzero(circle.points[:, 1] >= 0)


class TestDoubling:
    def test_arc_length_doubles(self, circle, mu):
        profile = estimate_doubling(mu, circle, Ball(np.zeros(2), 2.0), [0.05, 0.1, 0.2])
        assert 1.5 <= profile.C_mu <= 2.5
        assert profile.beta0 == pytest.approx(math.log2(profile.C_mu))
        assert profile.scale_range == (0.05, 0.2)
        assert profile.skipped == 0

    def test_region_without_mass(self, circle, mu):
        with pytest.raises(GMTInputError):
            estimate_doubling(mu, circle, Ball(np.array([5.0, 5.0]), 1.0), [0.1])

    def test_size_mismatch(self, circle):
        with pytest.raises(GMTInputError):
            estimate_doubling(DiscreteMeasure.uniform(3), circle, Ball(np.zeros(2), 2.0), [0.1])


class TestComplementAndPorousCubes:
    def test_full_set_has_no_complement_cubes(self, circle_tree):
        assert complement_cubes(circle_tree, np.arange(len(circle_tree.sigma)), 2.0) == []

    def test_complement_cubes_are_far_and_maximal(self, circle_tree, upper_half):
        found = complement_cubes(circle_tree, upper_half, 2.0)
        assert found
        pts = circle_tree.sigma.points
        e_pts = pts[upper_half]
        for cube in found:
            gap = np.linalg.norm(e_pts - pts[cube.center], axis=1).min()
            assert gap >= 2.0 * cube.length
        keys = {c.key for c in found}
        for cube in found:
            assert not any(a.key in keys for a in circle_tree.ancestors(cube))

    def test_full_set_is_not_porous(self, circle_tree):
        assert porous_cubes(circle_tree, np.arange(len(circle_tree.sigma)), 2.0, 0.05) == []

    def test_porous_cubes_meet_E(self, circle_tree, upper_half):
        porous = porous_cubes(circle_tree, upper_half, 2.0, 0.05)
        assert porous
        in_E = np.zeros(len(circle_tree.sigma), dtype=bool)
        in_E[upper_half] = True
        assert all(in_E[c.members].any() for c in porous)

    def test_parameter_checks(self, circle_tree, upper_half):
        with pytest.raises(GMTInputError):
            porous_cubes(circle_tree, upper_half, 1.0, 0.05)
        with pytest.raises(GMTInputError):
            porous_cubes(circle_tree, upper_half, 2.0, 1.5)
        with pytest.raises(GMTInputError):
            complement_cubes(circle_tree, [len(circle_tree.sigma) + 3], 2.0)


class TestLambda:
    def test_vanishes_on_full_set(self, circle_tree):
        cube = circle_tree.levels[0][0]
        assert lambda_coefficient(circle_tree, np.arange(len(circle_tree.sigma)), cube, 2.0, 3.0) == 0.0

    def test_nonincreasing_in_beta(self, circle_tree, upper_half):
        cube = circle_tree.levels[0][0]
        low = lambda_coefficient(circle_tree, upper_half, cube, 2.0, 3.0)
        high = lambda_coefficient(circle_tree, upper_half, cube, 2.0, 5.0)
        assert low >= high >= 0.0

    def test_mass_scaling_is_finite(self, circle, circle_tree, mu, upper_half):
        profile = estimate_doubling(mu, circle, Ball(np.zeros(2), 2.0), [0.05, 0.1, 0.2])
        value = mass_scaling_check(circle_tree, mu, profile, upper_half, circle_tree.levels[0][0], 2.0)
        assert math.isfinite(value)
        assert value >= 0.0


class TestCarleson:
    def test_empty_family(self, circle_tree, mu):
        report = empirical_carleson_norm(circle_tree, [], mu)
        assert report.C1 == 0.0
        assert report.argmax is None

    def test_one_generation_packs_to_one(self, circle_tree, mu):
        family = circle_tree.levels[circle_tree.depth]
        report = empirical_carleson_norm(circle_tree, family, mu)
        assert report.C1 == pytest.approx(1.0)

    def test_all_generations_pack_to_depth_plus_one(self, circle_tree, mu):
        family = list(circle_tree.cubes())
        report = empirical_carleson_norm(circle_tree, family, mu)
        assert report.C1 == pytest.approx(circle_tree.depth + 1)
        assert ROOT_KEY in [(lv, ix) for lv, ix, _ in report.ratios]
        top = circle_tree.levels[0][0]
        assert carleson_sum(circle_tree, family, mu, top) == pytest.approx(circle_tree.depth + 1)

    def test_zero_mass_cubes_are_excluded(self, circle_tree):
        weights = np.zeros(len(circle_tree.sigma))
        weights[0] = 1.0
        report = empirical_carleson_norm(circle_tree, list(circle_tree.cubes()), DiscreteMeasure(weights))
        assert report.excluded
        cube = next(c for c in circle_tree.levels[1] if 0 not in c.members)
        assert math.isnan(carleson_sum(circle_tree, [], DiscreteMeasure(weights), cube))


class TestShellDecay:
    def test_circle_shells_decay_linearly(self):
        cloud = circle_cloud(4096)
        tree = build_cube_tree(cloud, 0.25, 2)
        fit = shell_decay(tree, hausdorff_weights(cloud, 1), [0.02, 0.04, 0.08, 0.16])
        assert not fit.undefined
        assert fit.alpha_hat >= 0.5
        assert fit.t0_hat > 0
        assert fit.envelope == sorted(fit.envelope)

    def test_needs_four_values(self, circle_tree, mu):
        with pytest.raises(GMTInputError):
            shell_decay(circle_tree, mu, [0.1, 0.2])


class TestRefinement:
    def test_full_set_is_kept(self, circle_tree, mu):
        E = np.arange(len(circle_tree.sigma))
        result = refine_set(circle_tree, E, mu, PorosityConfig())
        assert result.C1 == 0.0
        assert result.N == 1
        assert result.T == []
        assert np.array_equal(result.E_prime, E)
        assert result.mass_ratio == pytest.approx(1.0)

    def test_half_circle_invariants(self, circle_tree, mu, upper_half):
        cfg = PorosityConfig()
        result = refine_set(circle_tree, upper_half, mu, cfg)
        assert set(result.E_prime.tolist()) <= set(result.E_N.tolist()) <= set(upper_half.tolist())
        assert result.mass_ratio >= 1.0 - cfg.tau
        assert result.max_membership <= result.N
        assert result.N == int(math.floor(2 * result.C1 / (cfg.tau * cfg.rho))) + 1
        assert result.to_json()["N"] == result.N

    @pytest.mark.parametrize("tau", [0.5, 0.1, 0.01])
    def test_invariants_across_tau(self, circle_tree, mu, upper_half, tau):
        cfg = PorosityConfig(tau=tau)
        result = refine_with_retry(circle_tree, upper_half, mu, cfg)
        assert set(result.E_prime.tolist()) <= set(result.E_N.tolist()) <= set(upper_half.tolist())
        assert result.mass_ratio >= 1.0 - tau
        assert result.max_membership <= result.N
        assert result.N == int(math.floor(2 * result.C1 / (tau * cfg.rho))) + 1

    def test_thick_shells_violate_mass_bound(self, circle_tree, mu, upper_half):
        with pytest.raises(GMTRefinementError) as info:
            refine_set(circle_tree, upper_half, mu, PorosityConfig(t=0.9))
        assert info.value.diagnostics["mass_ratio"] < 0.9
        assert info.value.error_code == 500

    def test_retry_halves_t(self, circle_tree, mu, upper_half):
        result = refine_with_retry(circle_tree, upper_half, mu, PorosityConfig(t=0.9))
        assert result.t_used < 0.9
        assert result.mass_ratio >= 0.9

    def test_beta_must_exceed_beta0(self, circle, circle_tree, mu, upper_half):
        profile = estimate_doubling(mu, circle, Ball(np.zeros(2), 2.0), [0.05, 0.1, 0.2])
        with pytest.raises(GMTConfigurationError):
            refine_set(circle_tree, upper_half, mu, PorosityConfig(beta=0.5), profile)

    def test_rho_lower_bound(self, circle_tree, mu):
        with pytest.raises(GMTInputError):
            refine_set(circle_tree, [0], mu, PorosityConfig(rho=0.5))
