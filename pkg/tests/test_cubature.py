"""Tests for sphere, ball and box quadrature."""

import numpy as np
import pytest

from src.cubature import (ball_rule, box_rule, check_estimate, coarse_nodes, gauss_legendre, periodic_trapezoid,
                          richardson, sphere_rule, unit_ball_volume, unit_sphere_area)
from src.exceptions import CubatureError, DimensionMismatchError


@pytest.mark.parametrize("k, volume", [(1, 2.0), (2, np.pi), (3, 4.0 * np.pi / 3.0)])
def test_unit_ball_volume(k, volume):
    assert unit_ball_volume(k) == pytest.approx(volume, rel=1e-14)


def test_unit_sphere_area():
    assert unit_sphere_area(3) == pytest.approx(4.0 * np.pi)


def test_gauss_legendre_is_exact_for_polynomials():
    x, w = gauss_legendre(5, 0.0, 2.0)
    assert np.sum(w * x ** 9) == pytest.approx(2.0 ** 10 / 10.0, rel=1e-12)


def test_trapezoid_is_spectral_on_the_circle():
    theta, w = periodic_trapezoid(32)
    assert np.sum(w * np.exp(np.cos(theta))) == pytest.approx(2.0 * np.pi * 1.2660658777520082, rel=1e-13)


@pytest.mark.parametrize("k, area", [(2, 2.0 * np.pi), (3, 4.0 * np.pi)])
def test_sphere_rule_area(k, area):
    rule = sphere_rule(k)
    assert np.sum(rule.area_weights) == pytest.approx(area, rel=1e-12)
    np.testing.assert_allclose(np.linalg.norm(rule.points, axis=1), 1.0)


def test_sphere_rule_tangent_orientation():
    rule = sphere_rule(3, 16)
    frames = np.concatenate([rule.points[:, None, :], rule.tangents], axis=1)
    assert np.all(np.linalg.det(frames) > -1e-12)
    assert len(rule) == 8 * 16
    with pytest.raises(DimensionMismatchError):
        sphere_rule(4)


def test_sphere_rule_second_moment():
    rule = sphere_rule(3)
    assert np.sum(rule.area_weights * rule.points[:, 2] ** 2) == pytest.approx(4.0 * np.pi / 3.0, rel=1e-12)


def test_coarse_nodes_halve():
    assert coarse_nodes(2, 64) == 32
    assert coarse_nodes(3) == 24


def test_box_rule():
    nodes, weights = box_rule(4, [0.0, 0.0], [1.0, 2.0])
    assert nodes.shape == (16, 2)
    assert np.sum(weights * nodes[:, 0] ** 2 * nodes[:, 1]) == pytest.approx(2.0 / 3.0, rel=1e-13)


def test_ball_rule_disk_moments():
    nodes, weights = ball_rule(2, 8, 16)
    assert np.sum(weights) == pytest.approx(np.pi, rel=1e-13)
    assert np.sum(weights * nodes[:, 0] ** 2) == pytest.approx(np.pi / 4.0, rel=1e-12)
    nodes1, weights1 = ball_rule(1, 4, 0)
    assert np.sum(weights1) == pytest.approx(2.0)


def test_richardson_removes_leading_error():
    h = 0.1
    assert richardson(1.0 + 4.0 * h ** 2, 1.0 + h ** 2, 2) == pytest.approx(1.0, rel=1e-14)


def test_check_estimate():
    check_estimate(1.0, 1e-12, "fine", relative_tolerance=1e-8, check=True)
    with pytest.raises(CubatureError) as info:
        check_estimate(1.0, 1e-3, "coarse", relative_tolerance=1e-8, check=True)
    assert info.value.error_estimate == 1e-3
    check_estimate(1.0, 1e-3, "skipped", relative_tolerance=1e-8, check=False)
