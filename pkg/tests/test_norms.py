"""Tests for Euclidean and Randers norms, the Legendre map and dual norms."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.exceptions import DimensionMismatchError, InvalidNormError
from src.exterior import SimpleKVector, span_basis
from src.norms import (EuclideanNorm, RandersNorm, dual_norm, dual_norm_newton, finite_difference_gradient,
                       legendre_norm, restrict, symmetrized)

unit_vectors = st.lists(st.floats(min_value=-1.0, max_value=1.0), min_size=3, max_size=3).filter(
    lambda v: np.linalg.norm(v) > 0.1)


def test_randers_values(randers3):
    assert randers3([1.0, 0.0, 0.0]) == pytest.approx(1.3)
    assert randers3([-1.0, 0.0, 0.0]) == pytest.approx(0.7)
    assert randers3.drift_norm == pytest.approx(0.3)


def test_batched_shapes(randers3):
    v = np.ones((4, 5, 3))
    assert randers3(v).shape == (4, 5)
    assert randers3.gradient(v).shape == (4, 5, 3)
    assert randers3.hessian(v).shape == (4, 5, 3, 3)
    with pytest.raises(DimensionMismatchError):
        randers3(np.ones(2))


def test_invalid_norm_data():
    with pytest.raises(InvalidNormError):
        RandersNorm(np.eye(2), [1.0, 0.0])
    with pytest.raises(InvalidNormError):
        EuclideanNorm(np.array([[1.0, 0.0], [0.0, -1.0]]))
    with pytest.raises(InvalidNormError):
        EuclideanNorm()


@given(unit_vectors, st.floats(min_value=0.1, max_value=10.0))
@settings(max_examples=50, deadline=None)
def test_homogeneity_and_euler_identities(v, t):
    norm = RandersNorm(np.diag([1.0, 2.0, 0.5]), [0.2, -0.3, 0.1])
    v = np.asarray(v)
    assert norm(t * v) == pytest.approx(t * norm(v), rel=1e-12)
    assert norm.gradient(v) @ v == pytest.approx(norm(v), rel=1e-12)
    np.testing.assert_allclose(norm.hessian(v) @ v, 0.0, atol=1e-12)
    assert np.all(np.linalg.eigvalsh(norm.fundamental_tensor(v)) > 0)


@given(unit_vectors, unit_vectors)
@settings(max_examples=50, deadline=None)
def test_triangle_inequality(u, v):
    norm = RandersNorm(np.diag([1.0, 2.0, 0.5]), [0.2, -0.3, 0.1])
    u, v = np.asarray(u), np.asarray(v)
    assert norm(u + v) <= norm(u) + norm(v) + 1e-12


def test_gradient_matches_finite_differences(randers3, rng):
    v = rng.standard_normal(3)
    np.testing.assert_allclose(finite_difference_gradient(randers3.evaluate, v), randers3.gradient(v), atol=1e-8)


def test_legendre_pairs_to_square(randers3, rng):
    v = rng.standard_normal(3)
    assert legendre_norm(randers3, v) @ v == pytest.approx(float(randers3(v)) ** 2, rel=1e-12)
    with pytest.raises(InvalidNormError):
        legendre_norm(randers3, np.zeros(3))


def test_dual_of_legendre_image_is_norm(randers3, rng):
    v = rng.standard_normal(3)
    assert dual_norm(randers3, randers3.legendre(v)) == pytest.approx(float(randers3(v)), rel=1e-10)


def test_newton_dual_matches_closed_form(randers2, rng):
    for p in rng.standard_normal((5, 2)):
        assert dual_norm_newton(randers2, p) == pytest.approx(float(randers2.dual(p)), rel=1e-9)
    assert dual_norm_newton(randers2, np.zeros(2)) == 0.0


def test_euclidean_dual():
    norm = EuclideanNorm(np.diag([4.0, 1.0]))
    assert norm.dual([2.0, 0.0]) == pytest.approx(1.0)


def test_restriction_agrees_on_the_plane(randers3, rng):
    W = SimpleKVector(rng.standard_normal((2, 3)))
    restricted = restrict(randers3, W)
    basis = span_basis(W)
    w = rng.standard_normal(2)
    assert restricted.dim == 2
    assert restricted(w) == pytest.approx(float(randers3(basis @ w)), rel=1e-12)
    with pytest.raises(DimensionMismatchError):
        restrict(randers3, SimpleKVector(np.eye(4)[:2]))


def test_symmetrization_is_even(randers3, rng):
    sym = symmetrized(randers3)
    v = rng.standard_normal(3)
    assert sym(v) == pytest.approx(sym(-v))
    assert sym(v) == pytest.approx(np.sqrt(v @ v), rel=1e-12)
