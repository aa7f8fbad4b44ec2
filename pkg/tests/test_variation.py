"""Tests for patch volumes, first variations, mean curvature and the fiber identity."""

import numpy as np
import pytest

from src.densities import BUSEMANN_HAUSDORFF
from src.exceptions import DimensionMismatchError, DomainError, ImmersionError, UnknownOptionError
from src.exterior import SimpleKVector
from src.finsler import (MinkowskiChart, RandersChart, RiemannianChart, conformal_bump_metric, constant_metric,
                        rotational_drift)
from src.norms import EuclideanNorm, RandersNorm
from src.variation import (VariationField, bent_patch, bump_derivative_over_r, bump_profile, circle_arc,
                           constant_section, curve_residual_covector, fiber_identity_check, first_variation, flat_patch,
                           graph_patch, hausdorff_comparison, ht_volume, lifted_volume, mean_curvature_covector,
                           mean_curvature_theta, rotating_section, sphere_cap, sphere_octant,
                           totally_geodesic_minimality_experiment, variation_norm)

NODES = 32


@pytest.fixture
def unit_square():
    return flat_patch(np.zeros(3), np.eye(3)[:2], [0.0, 0.0], [1.0, 1.0], "unit-square")


def test_flat_volumes(unit_square, euclidean_chart3):
    assert ht_volume(euclidean_chart3, unit_square, 4, 2, nodes=NODES).value == pytest.approx(1.0, rel=1e-12)
    randers = MinkowskiChart(RandersNorm(np.eye(3), [0.3, 0.0, 0.0]))
    assert ht_volume(randers, unit_square, 4, 2, nodes=NODES).value == pytest.approx(1.0, rel=1e-10)
    bh = ht_volume(randers, unit_square, 4, 2, kind=BUSEMANN_HAUSDORFF)
    assert bh.value == pytest.approx(0.91 ** 1.5, rel=1e-10)
    assert bh.to_dict()["kind"] == BUSEMANN_HAUSDORFF


def test_octant_area(euclidean_chart3):
    result = ht_volume(euclidean_chart3, sphere_octant(1.0), 16, 8, nodes=NODES)
    assert result.value == pytest.approx(np.pi / 2.0, rel=1e-10)
    assert result.error_estimate < 1e-8


def test_lifted_volume_matches(euclidean_chart3):
    cap = sphere_cap(1.0, 0.5)
    assert lifted_volume(euclidean_chart3, cap, 12, nodes=NODES) == pytest.approx(
        ht_volume(euclidean_chart3, cap, 12, 6, nodes=NODES).value, rel=1e-10)


def test_volume_is_invariant_under_reparametrization(randers3):
    chart = MinkowskiChart(randers3)
    cap = sphere_cap(1.0, 0.5)
    scale = 0.5 / np.sinh(1.0)

    def fn(q):
        return scale * np.sinh(q)

    def jacobian(q):
        return scale * np.cosh(q)[..., :, None] * np.eye(2)

    moved = cap.reparametrized(fn, jacobian, [-1.0, -1.0], [1.0, 1.0])
    assert ht_volume(chart, moved, 32, 16, nodes=NODES).value == pytest.approx(
        ht_volume(chart, cap, 32, 16, nodes=NODES).value, rel=1e-9)


def test_degenerate_patch_is_rejected(euclidean_chart3):
    folded = flat_patch(np.zeros(3), [[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]], [0.0, 0.0], [1.0, 1.0])
    with pytest.raises(ImmersionError):
        ht_volume(euclidean_chart3, folded, 4, 2)
    with pytest.raises(DimensionMismatchError):
        flat_patch(np.zeros(2), np.eye(3)[:, :2], [0.0] * 3, [1.0] * 3)


def test_patch_jacobian_fallback():
    cap = sphere_cap(1.0, 0.5)
    numeric = type(cap)(cap.map_fn, cap.lower, cap.upper)
    q = np.array([0.1, -0.2])
    np.testing.assert_allclose(numeric.jacobian(q), cap.jacobian(q), atol=1e-8)


@pytest.mark.parametrize("profile", ["polynomial", "cosine"])
def test_bump_profiles(profile):
    assert bump_profile(0.0, profile) == pytest.approx(1.0)
    assert bump_profile(1.0, profile) == 0.0
    assert bump_profile(1.5, profile) == 0.0
    r, h = 0.3, 1e-6
    derivative = (bump_profile(r + h, profile) - bump_profile(r - h, profile)) / (2.0 * h)
    assert bump_derivative_over_r(r, profile) == pytest.approx(derivative / r, rel=1e-7)
    assert np.isfinite(bump_derivative_over_r(0.0, profile))
    with pytest.raises(UnknownOptionError):
        bump_profile(0.5, "box")


def test_variation_field_jacobian(rng):
    field = VariationField(np.array([0.1, 0.2]), 0.4, rng.standard_normal(3), rng.standard_normal((3, 2)))
    q, h = np.array([0.2, 0.05]), 1e-6
    numeric = np.stack([(field.value(q + h * e) - field.value(q - h * e)) / (2.0 * h) for e in np.eye(2)], axis=-1)
    np.testing.assert_allclose(field.jacobian(q), numeric, atol=1e-7)
    np.testing.assert_allclose(field.value(np.array([0.6, 0.2])), 0.0)
    with pytest.raises(ValueError):
        VariationField([0.0, 0.0], 0.1, np.ones(3), np.zeros((3, 2)), "box")


def test_support_rule_integrates_the_disk():
    field = VariationField.localized([0.2, 0.3], 0.25, [0.0, 0.0, 1.0])
    q, w = field.support_rule(8, 16)
    assert np.sum(w) == pytest.approx(np.pi * 0.25 ** 2, rel=1e-12)
    assert np.all(np.linalg.norm(q - field.center, axis=-1) <= 0.25 + 1e-12)


def test_plane_is_stationary(euclidean_chart3, unit_square, rng):
    field = VariationField.random(rng, unit_square, 0.25)
    result = first_variation(euclidean_chart3, unit_square, field, nodes=NODES)
    assert result.ratio < 1e-8
    assert not result.flagged
    assert variation_norm(unit_square, field) == pytest.approx(result.x_norm)


def test_first_variation_argument_checks(euclidean_chart3, unit_square):
    outside = VariationField.localized([0.1, 0.5], 0.25, [0.0, 0.0, 1.0])
    with pytest.raises(DomainError):
        first_variation(euclidean_chart3, unit_square, outside)
    wrong = VariationField.localized([0.5, 0.5], 0.25, [0.0, 1.0])
    with pytest.raises(DimensionMismatchError):
        first_variation(euclidean_chart3, unit_square, wrong)


def test_sphere_mean_curvature(euclidean_chart3):
    cap = sphere_cap(1.0, 0.5)
    h = mean_curvature_covector(euclidean_chart3, cap, [0.0, 0.0], 0.25, extrapolate=True, nodes=NODES)
    np.testing.assert_allclose(h.covector, [0.0, 0.0, 2.0], rtol=1e-2, atol=1e-3)
    assert h.tangent_defect < 1e-3
    theta = mean_curvature_theta(euclidean_chart3, cap, [0.0, 0.0], nodes=NODES)
    np.testing.assert_allclose(theta.covector, [0.0, 0.0, 2.0], atol=1e-3)
    assert theta.method == "theta"


def test_circle_mean_curvature(euclidean_chart3):
    arc = circle_arc(2.0, -0.5, 0.5)
    h = mean_curvature_covector(euclidean_chart3, arc, [0.0], 0.2, extrapolate=True)
    np.testing.assert_allclose(h.covector, [0.5, 0.0, 0.0], rtol=1e-2, atol=1e-3)
    np.testing.assert_allclose(curve_residual_covector(euclidean_chart3, arc, 0.0), [0.5, 0.0, 0.0], atol=1e-5)
    with pytest.raises(DimensionMismatchError):
        curve_residual_covector(euclidean_chart3, sphere_cap(), 0.0)


def test_busemann_hausdorff_variation_agrees_for_euclidean(euclidean_chart3):
    cap = sphere_cap(1.0, 0.5)
    field = VariationField.localized([0.0, 0.0], 0.25, [0.0, 0.0, 1.0])
    comparison = hausdorff_comparison(euclidean_chart3, cap, field, nodes=NODES)
    assert comparison["busemann_hausdorff"] == pytest.approx(comparison["holmes_thompson"], rel=1e-8)
    assert comparison["holmes_thompson"] > 0


def test_fiber_identity_euclidean(euclidean_chart3, rng):
    b = SimpleKVector(rng.standard_normal((2, 3)))
    report = fiber_identity_check(euclidean_chart3, constant_section(np.eye(3)[:2]), np.zeros(3), b)
    assert report.gap < 1e-6
    assert report.to_dict()["constant"] == pytest.approx(report.constant)


def test_fiber_identity_randers(rng):
    chart = RandersChart(constant_metric(np.eye(3)), rotational_drift(0.3), 3)
    x = np.array([0.3, -0.2, 0.4])
    b = SimpleKVector(rng.standard_normal((2, 3)))
    report = fiber_identity_check(chart, rotating_section(0.5), x, b)
    assert report.gap < 1e-4
    with pytest.raises(DimensionMismatchError):
        fiber_identity_check(chart, rotating_section(0.5), x, SimpleKVector.from_vectors([1.0, 0.0, 0.0]))


def test_minimality_experiment_on_euclidean_plane():
    chart = MinkowskiChart(EuclideanNorm(dim=3))
    plane = graph_patch(0.1, 0.0, [-0.5, -0.5], [0.5, 0.5], "plane")
    bent = graph_patch(0.1, 1.0, plane.lower, plane.upper, "bent")
    report = totally_geodesic_minimality_experiment(chart, plane, 2, seed=5, bent_patch=bent, nodes=NODES)
    assert report.passed
    assert report.max_ratio < 1e-4
    assert report.max_bent_ratio > 1e-2
    summary = report.to_dict()
    assert summary["trials"] == 2 and summary["pass"] is True
    assert len(report.fields) == 2


def test_minimality_without_control_records_skip(euclidean_chart3):
    plane = graph_patch(0.1, 0.0, [-0.5, -0.5], [0.5, 0.5], "plane")
    report = totally_geodesic_minimality_experiment(euclidean_chart3, plane, 1, seed=5, nodes=NODES)
    assert not report.discrimination_checked
    summary = report.to_dict()
    assert summary["discrimination_checked"] is False
    assert summary["max_bent_ratio"] is None


def test_bent_patch_of_plane_is_paraboloid():
    plane = graph_patch(0.1, 0.0, [-0.5, -0.5], [0.5, 0.5], "plane")
    bent = bent_patch(plane, 1.0)
    assert bent.name == "plane-bent"
    q = np.array([[0.3, -0.2], [0.0, 0.0], [-0.5, 0.4]])
    points = bent.points(q)
    np.testing.assert_allclose(points[:, :2], q)
    np.testing.assert_allclose(np.abs(points[:, 2] - 0.1), 0.5 * np.sum(q * q, axis=-1), atol=1e-14)
    numeric = type(bent)(bent.map_fn, bent.lower, bent.upper)
    np.testing.assert_allclose(bent.jacobian(q), numeric.jacobian(q), atol=1e-8)


def test_bent_patch_needs_codimension():
    square = flat_patch(np.zeros(2), np.eye(2), [0.0, 0.0], [1.0, 1.0])
    with pytest.raises(DimensionMismatchError):
        bent_patch(square, 1.0)


def test_mean_curvature_independent_of_bump_profile(euclidean_chart3):
    paraboloid = graph_patch(0.0, 1.0, [-0.5, -0.5], [0.5, 0.5])
    polynomial = mean_curvature_covector(euclidean_chart3, paraboloid, [0.0, 0.0], 0.25, profile="polynomial",
                                         extrapolate=True, nodes=NODES)
    cosine = mean_curvature_covector(euclidean_chart3, paraboloid, [0.0, 0.0], 0.25, profile="cosine",
                                     extrapolate=True, nodes=NODES)
    np.testing.assert_allclose(cosine.covector, polynomial.covector, rtol=1e-3, atol=1e-3)
    assert polynomial.magnitude > 1.0


def test_curve_h_matches_euler_lagrange_residual():
    chart = RiemannianChart(conformal_bump_metric(0.4, 0.6, [0.1, 0.2]), 2, [-1.0, -1.0], [1.0, 1.0])
    arc = circle_arc(0.5, -0.5, 0.5, dim=2)
    h = mean_curvature_covector(chart, arc, [0.0], 0.2, extrapolate=True)
    np.testing.assert_allclose(h.covector, curve_residual_covector(chart, arc, 0.0), atol=1e-3)
