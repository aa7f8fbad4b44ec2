"""Tests for simple k-vectors, k-covectors and their pairing."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.exceptions import DegenerateKVectorError, DimensionMismatchError
from src.exterior import (KCovector, SimpleKVector, basis_indices, det_form, orthogonal_complement, pair,
                          principal_angles, span_basis, span_basis_batch, tangent_terms, wedge,
                          wedge_components)


@st.composite
def factor_stacks(draw, max_n=4):
    n = draw(st.integers(min_value=2, max_value=max_n))
    k = draw(st.integers(min_value=1, max_value=n))
    seed = draw(st.integers(min_value=0, max_value=2**31 - 1))
    return np.random.default_rng(seed).standard_normal((k, n))


def test_basis_is_lexicographic():
    assert basis_indices(3, 2) == ((0, 1), (0, 2), (1, 2))
    with pytest.raises(DimensionMismatchError):
        basis_indices(3, 4)


def test_coordinate_plucker():
    a = SimpleKVector.coordinate(3, [0, 1])
    np.testing.assert_allclose(a.plucker(), [1.0, 0.0, 0.0])
    np.testing.assert_allclose((-a).plucker(), [-1.0, 0.0, 0.0])


def test_factor_shape_is_checked():
    with pytest.raises(DimensionMismatchError):
        SimpleKVector(np.ones((3, 2)))


@given(factor_stacks())
@settings(max_examples=50, deadline=None)
def test_magnitude_matches_plucker_length(factors):
    a = SimpleKVector(factors)
    assert a.magnitude == pytest.approx(np.linalg.norm(a.plucker()), rel=1e-9, abs=1e-12)


@given(factor_stacks())
@settings(max_examples=50, deadline=None)
def test_refactoring_scales_by_determinant(factors):
    a = SimpleKVector(factors)
    m = np.random.default_rng(0).standard_normal((a.k, a.k))
    np.testing.assert_allclose(a.refactored(m).plucker(), np.linalg.det(m) * a.plucker(), rtol=1e-9, atol=1e-10)


def test_wedge_pairs_as_determinant(rng):
    covectors = rng.standard_normal((2, 4))
    a = SimpleKVector(rng.standard_normal((2, 4)))
    expected = np.linalg.det(covectors @ a.factors.T)
    assert wedge(covectors)(a) == pytest.approx(expected, rel=1e-12)
    np.testing.assert_allclose(wedge_components(covectors[None])[0], wedge(covectors).components)


def test_pairing_is_additive_over_terms(rng):
    xi = KCovector(3, 2, rng.standard_normal(3))
    a, b = SimpleKVector(rng.standard_normal((2, 3))), SimpleKVector(rng.standard_normal((2, 3)))
    assert pair(xi, [a, b]) == pytest.approx(xi(a) + xi(b), rel=1e-12)


def test_covector_arithmetic_and_errors():
    xi = KCovector.basis(3, [1, 0])
    assert xi.components.tolist() == [1.0, 0.0, 0.0]
    assert (2.0 * xi - xi).norm() == pytest.approx(1.0)
    with pytest.raises(DimensionMismatchError):
        KCovector(3, 2, np.ones(2))
    with pytest.raises(DimensionMismatchError):
        xi + KCovector.zero(3, 1)
    with pytest.raises(DimensionMismatchError):
        xi(SimpleKVector.coordinate(4, [0, 1]))
    assert det_form(3)(SimpleKVector(np.eye(3))) == pytest.approx(1.0)


def test_zero_kvector_has_no_span():
    a = SimpleKVector.from_vectors([1.0, 0.0, 0.0], [2.0, 0.0, 0.0])
    assert a.is_zero()
    with pytest.raises(DegenerateKVectorError):
        span_basis(a)
    with pytest.raises(DegenerateKVectorError):
        span_basis_batch(a.factors[None])


def test_span_basis_keeps_orientation(rng):
    a = SimpleKVector(rng.standard_normal((2, 3)))
    basis = span_basis(a)
    np.testing.assert_allclose(basis.T @ basis, np.eye(2), atol=1e-12)
    assert np.linalg.det(a.factors @ basis) > 0
    batch, magnitudes = span_basis_batch(a.factors[None])
    np.testing.assert_allclose(batch[0], basis, atol=1e-12)
    assert magnitudes[0] == pytest.approx(a.magnitude)


def test_complement_and_angles():
    a = SimpleKVector.coordinate(3, [0, 1])
    complement = orthogonal_complement(a)
    np.testing.assert_allclose(np.abs(complement[:, 0]), [0.0, 0.0, 1.0], atol=1e-12)
    tilted = SimpleKVector.from_vectors([1.0, 0.0, 0.0], [0.0, np.cos(0.3), np.sin(0.3)])
    np.testing.assert_allclose(principal_angles(a, tilted), [0.0, 0.3], atol=1e-6)


def test_tangent_terms_skip_zero_directions():
    a = SimpleKVector.coordinate(3, [0, 1])
    terms = tangent_terms(a, np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0]]))
    assert len(terms) == 1
    np.testing.assert_allclose(terms[0].plucker(), [0.0, 0.0, -1.0])
