"""Shared fixtures for the toolkit tests."""

import numpy as np
import pytest

from python_gmt.core import ball, circle_cloud, half_space, segment_cloud
from python_gmt.metric_cubes import build_cube_tree
from python_gmt.whitney import whitney_decompose


@pytest.fixture
def disk():
    return ball(1.0)


@pytest.fixture
def half_plane():
    return half_space(2, extent=1.0)


@pytest.fixture
def circle():
    return circle_cloud(512)


@pytest.fixture
def segment():
    """[-1, 1] x {0} at spacing 1/64."""
    return segment_cloud((-1.0, 0.0), (1.0, 0.0), 1.0 / 64)


@pytest.fixture
def circle_tree(circle):
    return build_cube_tree(circle, 0.25, 3)


@pytest.fixture
def half_plane_forest(half_plane):
    return whitney_decompose(half_plane, K=3, n_min=-8)


@pytest.fixture
def E_segment():
    """Boundary set E = [-1/2, 1/2] x {0} of the half-plane at mesh 2^-5."""
    return segment_cloud((-0.5, 0.0), (0.5, 0.0), 2.0 ** -5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
