"""Shared fixtures: seeded generators, standard norms and charts."""

import numpy as np
import pytest

from src.finsler import (MinkowskiChart, RandersChart, RiemannianChart, constant_drift, constant_metric,
                        rotational_drift, stereographic_sphere_metric)
from src.norms import EuclideanNorm, RandersNorm


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def euclidean3():
    return EuclideanNorm(dim=3)


@pytest.fixture
def randers3():
    return RandersNorm(np.eye(3), [0.3, 0.0, 0.0])


@pytest.fixture
def randers2():
    return RandersNorm(np.diag([1.0, 2.0]), [0.2, -0.1])


@pytest.fixture
def euclidean_chart3():
    return MinkowskiChart(EuclideanNorm(dim=3))


@pytest.fixture
def sphere_chart():
    return RiemannianChart(stereographic_sphere_metric, 2, [-1.0, -1.0], [1.0, 1.0], name="round-sphere")


@pytest.fixture
def flat_chart2():
    return RiemannianChart(constant_metric(np.eye(2)), 2, [-1.0, -1.0], [1.0, 1.0], name="euclidean")


@pytest.fixture
def randers_chart2():
    return RandersChart(constant_metric(np.eye(2)), rotational_drift(0.1), 2, [-1.0, -1.0], [1.0, 1.0],
                        name="randers")


@pytest.fixture
def constant_randers_chart2():
    return RandersChart(constant_metric(np.eye(2)), constant_drift([0.2, 0.0]), 2, [-1.0, -1.0], [1.0, 1.0])
