"""Tests for Finsler charts, geodesics and the Hilbert 1-form."""

import numpy as np
import pytest

from src.exceptions import DimensionMismatchError, InvalidNormError
from src.finsler import (MinkowskiChart, RandersChart, UnitBundlePoint, conformal_bump_metric, constant_metric,
                         curve_geodesic_residual, d_omega1, euler_lagrange_residual, geodesic,
                         geodesic_lift_tangent, hilbert_one_form, random_bundle_tangent, reversal_gap,
                         rotational_drift, spray, vertical_vector)


def test_minkowski_geodesics_are_lines(randers2):
    chart = MinkowskiChart(randers2)
    trajectory = geodesic(chart, [0.0, 0.0], [1.0, 1.0], 1.0, 10)
    v = trajectory.velocities[0]
    assert float(randers2(v)) == pytest.approx(1.0)
    np.testing.assert_allclose(trajectory.positions, trajectory.times[:, None] * v, atol=1e-12)
    np.testing.assert_allclose(spray(chart, np.zeros(2), v), 0.0, atol=1e-14)


def test_sphere_geodesic_follows_great_circle(sphere_chart):
    trajectory = geodesic(sphere_chart, [0.0, 0.0], [1.0, 0.0], 1.5, 300)
    assert not trajectory.truncated
    assert trajectory.positions[-1, 0] == pytest.approx(np.tan(0.75), abs=1e-8)
    assert trajectory.positions[-1, 1] == pytest.approx(0.0, abs=1e-12)
    assert trajectory.max_speed_error < 1e-8
    frame = trajectory.to_frame()
    assert list(frame.columns) == ["t", "x0", "x1", "v0", "v1", "speed_error"]
    assert trajectory.to_dict()["steps"] == 300


def test_geodesic_truncates_at_the_boundary(sphere_chart):
    trajectory = geodesic(sphere_chart, [0.0, 0.0], [1.0, 0.0], 3.0, 100)
    assert trajectory.truncated
    assert sphere_chart.contains(trajectory.positions).all()


def test_reversal(sphere_chart):
    assert reversal_gap(sphere_chart, [0.1, -0.2], [1.0, 0.5], 1.0, 200) < 1e-7
    magnetic = RandersChart(constant_metric(np.eye(2)), rotational_drift(0.3), 2, [-3.0, -3.0], [3.0, 3.0])
    assert reversal_gap(magnetic, [0.0, 0.0], [1.0, 0.0], 1.0, 200) > 1e-3


def test_euler_lagrange_residual(sphere_chart, flat_chart2):
    def position(t):
        return np.stack([np.tan(t / 2.0), np.zeros_like(t)], axis=-1)

    def velocity(t):
        return np.stack([0.5 / np.cos(t / 2.0) ** 2, np.zeros_like(t)], axis=-1)

    def acceleration(t):
        return np.stack([0.5 * np.tan(t / 2.0) / np.cos(t / 2.0) ** 2, np.zeros_like(t)], axis=-1)

    times = np.linspace(0.0, 1.2, 7)
    assert curve_geodesic_residual(sphere_chart, position, velocity, acceleration, times) < 1e-7

    t = np.linspace(0.0, 1.0, 5)
    circle = 0.5 * np.stack([np.cos(t), np.sin(t)], axis=-1)
    speed = 0.5 * np.stack([-np.sin(t), np.cos(t)], axis=-1)
    residual = euler_lagrange_residual(flat_chart2, circle, speed, -circle)
    np.testing.assert_allclose(np.linalg.norm(residual, axis=-1), 1.0, rtol=1e-10)


def test_unit_bundle_point_validation(sphere_chart):
    point = UnitBundlePoint.normalized(sphere_chart, [0.0, 0.0], [3.0, 0.0])
    assert float(sphere_chart.metric(point.x, point.v)) == pytest.approx(1.0)
    with pytest.raises(InvalidNormError):
        UnitBundlePoint.normalized(sphere_chart, [0.0, 0.0], [0.0, 0.0])
    with pytest.raises(DimensionMismatchError):
        UnitBundlePoint.normalized(sphere_chart, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0])


def test_hilbert_form_evaluates_to_one_on_the_lift(randers_chart2):
    point = UnitBundlePoint.normalized(randers_chart2, [0.2, 0.1], [1.0, -0.4])
    omega = hilbert_one_form(randers_chart2, point)
    assert omega @ geodesic_lift_tangent(randers_chart2, point) == pytest.approx(1.0, rel=1e-12)
    assert omega @ vertical_vector(randers_chart2, point, [0.3, 0.7]) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("chart_name", ["sphere_chart", "randers_chart2"])
def test_d_omega_routes_agree(chart_name, request, rng):
    chart = request.getfixturevalue(chart_name)
    point = UnitBundlePoint.normalized(chart, [0.2, -0.3], [0.6, 0.8])
    X, Y = random_bundle_tangent(chart, point, rng), random_bundle_tangent(chart, point, rng)
    analytic = d_omega1(chart, point, X, Y)
    central = d_omega1(chart, point, X, Y, method="central")
    assert central == pytest.approx(analytic, abs=1e-6)
    assert d_omega1(chart, point, X, X) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        d_omega1(chart, point, X, Y, method="spline")


def test_geodesic_lift_spans_the_kernel(randers_chart2, rng):
    point = UnitBundlePoint.normalized(randers_chart2, [0.1, 0.4], [1.0, 0.2])
    lift = geodesic_lift_tangent(randers_chart2, point)
    for _ in range(3):
        Y = random_bundle_tangent(randers_chart2, point, rng)
        assert d_omega1(randers_chart2, point, lift, Y) == pytest.approx(0.0, abs=1e-6)


def test_randers_validation():
    chart = RandersChart(constant_metric(np.eye(2)), rotational_drift(3.0), 2)
    with pytest.raises(InvalidNormError):
        chart.validate(np.array([[1.0, 0.0]]))
    chart.validate(np.array([[0.0, 0.0]]))


def test_conformal_bump_metric():
    field = conformal_bump_metric(0.5, 1.0, [0.0, 0.0])
    np.testing.assert_allclose(field(np.zeros(2)), 2.25 * np.eye(2))
    np.testing.assert_allclose(field(np.full((3, 2), 10.0)), np.broadcast_to(np.eye(2), (3, 2, 2)), atol=1e-12)
