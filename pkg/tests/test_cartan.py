"""Tests for the surface coframe, the invariants I, J, K and curve curvature."""

import numpy as np
import pytest

from src.cartan import (coframe, curve_curvature, curve_mean_curvature, exterior_derivative, expand_two_form,
                        fiber_vector, invariant_table, invariants_IJK, omega2_on_lift, sample_bundle,
                        structure_residuals, trajectory_curvature, wedge2)
from src.exceptions import DimensionMismatchError
from src.finsler import MinkowskiChart, RiemannianChart, geodesic, stereographic_sphere_metric
from src.norms import RandersNorm
from src.variation import circle_arc, mean_curvature_covector

POINTS = np.array([[0.1, -0.2, 0.3], [-0.4, 0.3, 2.0], [0.5, 0.5, 4.5]])


def circle(radius, t):
    t = np.asarray(t, dtype=float)
    position = radius * np.stack([np.cos(t), np.sin(t)], axis=-1)
    velocity = radius * np.stack([-np.sin(t), np.cos(t)], axis=-1)
    return position, velocity, -position


def test_exterior_derivative_of_a_linear_form():
    def form(z):
        return np.stack([z[:, 1], -z[:, 0], np.zeros(len(z))], axis=-1)

    d = exterior_derivative(form, np.zeros((1, 3)), 1e-3)[0]
    assert d[0, 1] == pytest.approx(-2.0)
    assert d[1, 0] == pytest.approx(2.0)
    basis = [wedge2(e, f)[None] for e, f in ((np.eye(3)[0], np.eye(3)[1]), (np.eye(3)[0], np.eye(3)[2]),
                                             (np.eye(3)[1], np.eye(3)[2]))]
    np.testing.assert_allclose(expand_two_form(d[None], basis)[0], [-2.0, 0.0, 0.0], atol=1e-10)


def test_euclidean_coframe(flat_chart2):
    theta = 0.3
    frame = coframe(flat_chart2, [0.1, 0.2], [np.cos(theta), np.sin(theta)])
    expected = np.array([[np.cos(theta), np.sin(theta), 0.0], [-np.sin(theta), np.cos(theta), 0.0], [0.0, 0.0, 1.0]])
    np.testing.assert_allclose(frame.matrix(), expected, atol=1e-6)
    assert frame.fiber_value == pytest.approx(1.0, abs=1e-6)
    assert set(frame.to_dict()) == {"x", "v", "theta", "omega1", "omega2", "omega3"}


def test_fiber_vectors_are_unit(randers_chart2):
    v = fiber_vector(randers_chart2, [0.2, 0.1], np.linspace(0.0, 6.0, 7))
    np.testing.assert_allclose(randers_chart2.metric(np.broadcast_to([0.2, 0.1], v.shape), v), 1.0)


def test_flat_invariants_vanish(flat_chart2):
    table = invariant_table(flat_chart2, POINTS)
    np.testing.assert_allclose(table[["I", "J", "K"]].to_numpy(), 0.0, atol=1e-5)
    assert table[["residual_1", "residual_2", "residual_3"]].to_numpy().max() < 1e-4
    assert list(table.columns) == ["x0", "x1", "theta", "I", "J", "K", "residual_1", "residual_2",
                                   "residual_3", "fiber_omega3"]


def test_round_sphere_has_unit_curvature(sphere_chart):
    table = invariant_table(sphere_chart, POINTS)
    np.testing.assert_allclose(table["K"], 1.0, atol=1e-4)
    np.testing.assert_allclose(table["I"], 0.0, atol=1e-5)
    np.testing.assert_allclose(table["J"], 0.0, atol=1e-4)


def test_minkowski_randers_plane():
    chart = MinkowskiChart(RandersNorm(np.eye(2), [0.3, 0.0]), [-1.0, -1.0], [1.0, 1.0])
    table = invariant_table(chart, POINTS)
    np.testing.assert_allclose(table["K"], 0.0, atol=1e-4)
    np.testing.assert_allclose(table["J"], 0.0, atol=1e-4)
    assert table["I"].abs().max() > 1e-2
    assert table[["residual_1", "residual_2", "residual_3"]].to_numpy().max() < 1e-4


def test_invariants_at_a_point(randers_chart2):
    result = invariants_IJK(randers_chart2, [0.1, 0.2], [1.0, 0.0])
    assert not result.flagged
    assert result.to_dict()["flagged"] is False
    with pytest.raises(DimensionMismatchError):
        invariants_IJK(MinkowskiChart(RandersNorm(np.eye(3), [0.1, 0.0, 0.0])), [0.0] * 3, [1.0, 0.0, 0.0])


def test_circle_curvature_and_mean_curvature(flat_chart2):
    position, velocity, acceleration = circle(0.5, np.array([0.0, 1.0, 2.5]))
    np.testing.assert_allclose(curve_curvature(flat_chart2, position, velocity, acceleration), 2.0, rtol=1e-6)
    reversed_k = curve_curvature(flat_chart2, position, -velocity, acceleration)
    np.testing.assert_allclose(reversed_k, -2.0, rtol=1e-6)
    h = curve_mean_curvature(flat_chart2, position[:1], velocity[:1], acceleration[:1])
    np.testing.assert_allclose(h[0], [2.0, 0.0], atol=1e-6)


def test_geodesics_have_zero_curvature(sphere_chart, randers_chart2):
    for chart in (sphere_chart, randers_chart2):
        trajectory = geodesic(chart, [0.1, -0.2], [1.0, 0.4], 0.6, 60)
        assert np.max(np.abs(trajectory_curvature(chart, trajectory))) < 1e-5


def test_lift_tangents_are_horizontal_for_omega2(randers_chart2):
    t = np.linspace(0.0, 1.0, 5)
    position = np.stack([0.3 * t, 0.2 * t ** 2], axis=-1)
    velocity = np.stack([0.3 + 0.0 * t, 0.4 * t], axis=-1)
    acceleration = np.stack([0.0 * t, 0.4 + 0.0 * t], axis=-1)
    np.testing.assert_allclose(omega2_on_lift(randers_chart2, position, velocity, acceleration), 0.0, atol=1e-12)


def test_mean_curvature_routes_agree_on_the_sphere():
    chart = RiemannianChart(stereographic_sphere_metric, 2, [-1.0, -1.0], [1.0, 1.0], name="round-sphere")
    arc = circle_arc(0.5, -0.6, 0.6, dim=2)
    from_variation = mean_curvature_covector(chart, arc, [0.0], 0.2, extrapolate=True).covector
    position, velocity, acceleration = circle(0.5, np.array([0.0]))
    from_frame = curve_mean_curvature(chart, position, velocity, acceleration)[0]
    np.testing.assert_allclose(from_variation, from_frame, rtol=1e-2, atol=1e-3)


def test_structure_sweep(randers_chart2):
    report = structure_residuals(randers_chart2, 20, seed=4)
    assert report.passed
    summary = report.to_dict()
    assert summary["samples"] == 20
    assert summary["min_fiber_omega3"] > 0
    with pytest.raises(ValueError):
        structure_residuals(RiemannianChart(stereographic_sphere_metric, 2), 5, seed=0)


def test_sample_bundle_stays_in_the_box(rng):
    z = sample_bundle(rng, [-1.0, 0.0], [1.0, 0.5], 50)
    assert z.shape == (50, 3)
    assert np.all((z[:, 1] >= 0.0) & (z[:, 1] <= 0.5))
    assert np.all((z[:, 2] >= 0.0) & (z[:, 2] < 2.0 * np.pi))
