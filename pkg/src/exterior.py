"""
Exterior algebra of simple k-vectors and k-covectors over R^n.

Simple k-vectors are kept in factored form so that the oriented plane they
carry is always recoverable; k-covectors are dense on the lexicographic basis
of Lambda^k (R^n)*.
"""

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from config.settings import NUMERICS_CONFIG
from .exceptions import DegenerateKVectorError, DimensionMismatchError

logger = logging.getLogger(__name__)


@lru_cache(maxsize=None)
def basis_indices(n: int, k: int) -> Tuple[Tuple[int, ...], ...]:
    """Lexicographic basis multi-indices of Lambda^k R^n."""
    if not 1 <= k <= n:
        raise DimensionMismatchError(f"degree k={k} outside 1..{n}")
    return tuple(itertools.combinations(range(n), k))


def _minors(rows: np.ndarray) -> np.ndarray:
    """
    All k x k minors of (..., k, n) row stacks, in lexicographic column order.

    Args:
        rows: Array of shape (..., k, n)

    Returns:
        Array of shape (..., C(n, k))
    """
    k, n = rows.shape[-2], rows.shape[-1]
    index = np.array(basis_indices(n, k))
    blocks = rows[..., :, index]                 # (..., k, C, k)
    blocks = np.moveaxis(blocks, -2, -3)         # (..., C, k, k)
    return np.linalg.det(blocks)


@dataclass(frozen=True)
class SimpleKVector:
    """
    Decomposable k-vector v_1 ^ ... ^ v_k in R^n.

    Attributes:
        factors: Array of shape (k, n); row i is the factor v_i
    """
    factors: np.ndarray

    def __post_init__(self):
        factors = np.array(self.factors, dtype=float)
        if factors.ndim == 1:
            factors = factors[None, :]
        if factors.ndim != 2 or factors.shape[0] > factors.shape[1] or factors.shape[0] < 1:
            raise DimensionMismatchError(f"factor array of shape {factors.shape} is not k x n with 1 <= k <= n")
        factors.setflags(write=False)
        object.__setattr__(self, "factors", factors)

    @classmethod
    def from_vectors(cls, *vectors: Sequence[float]) -> "SimpleKVector":
        return cls(np.array(vectors, dtype=float))

    @classmethod
    def coordinate(cls, n: int, indices: Sequence[int]) -> "SimpleKVector":
        """The basis k-vector e_{i1} ^ ... ^ e_{ik}."""
        return cls(np.eye(n)[list(indices)])

    @property
    def k(self) -> int:
        return self.factors.shape[0]

    @property
    def n(self) -> int:
        return self.factors.shape[1]

    def gram(self) -> np.ndarray:
        return self.factors @ self.factors.T

    @property
    def magnitude(self) -> float:
        """Euclidean k-volume of the parallelotope spanned by the factors."""
        det = np.linalg.det(self.gram())
        return float(np.sqrt(max(det, 0.0)))

    def is_zero(self, tol: Optional[float] = None) -> bool:
        tol = NUMERICS_CONFIG["zero_tolerance"] if tol is None else tol
        scale = max(1.0, float(np.prod(np.linalg.norm(self.factors, axis=1))))
        return self.magnitude <= tol * scale

    def scaled(self, t: float) -> "SimpleKVector":
        """t * a, realised by rescaling the first factor."""
        factors = self.factors.copy()
        factors[0] *= t
        return SimpleKVector(factors)

    def with_factor(self, i: int, vector: Sequence[float]) -> "SimpleKVector":
        factors = self.factors.copy()
        factors[i] = vector
        return SimpleKVector(factors)

    def refactored(self, matrix: np.ndarray) -> "SimpleKVector":
        """Factors M @ factors; equals det(M) * self as a k-vector."""
        return SimpleKVector(np.asarray(matrix, dtype=float) @ self.factors)

    def plucker(self) -> np.ndarray:
        """Components on the lexicographic basis of Lambda^k R^n."""
        return _minors(self.factors)

    def __neg__(self) -> "SimpleKVector":
        return self.scaled(-1.0)


@dataclass(frozen=True)
class KCovector:
    """
    k-covector on R^n stored on the lexicographic basis of Lambda^k (R^n)*.

    Attributes:
        n: Ambient dimension
        k: Degree
        components: Array of length C(n, k)
    """
    n: int
    k: int
    components: np.ndarray

    def __post_init__(self):
        components = np.array(self.components, dtype=float).reshape(-1)
        expected = len(basis_indices(self.n, self.k))
        if components.shape[0] != expected:
            raise DimensionMismatchError(
                f"{components.shape[0]} components given for Lambda^{self.k} of R^{self.n} (needs {expected})"
            )
        components.setflags(write=False)
        object.__setattr__(self, "components", components)

    @classmethod
    def zero(cls, n: int, k: int) -> "KCovector":
        return cls(n, k, np.zeros(len(basis_indices(n, k))))

    @classmethod
    def basis(cls, n: int, indices: Sequence[int]) -> "KCovector":
        """The basis k-covector e*_{i1} ^ ... ^ e*_{ik} (indices increasing)."""
        indices = tuple(sorted(indices))
        k = len(indices)
        components = np.zeros(len(basis_indices(n, k)))
        components[basis_indices(n, k).index(indices)] = 1.0
        return cls(n, k, components)

    def __call__(self, a: Union[SimpleKVector, Iterable[SimpleKVector]]) -> float:
        return pair(self, a)

    def __add__(self, other: "KCovector") -> "KCovector":
        _check_same_space(self, other)
        return KCovector(self.n, self.k, self.components + other.components)

    def __sub__(self, other: "KCovector") -> "KCovector":
        _check_same_space(self, other)
        return KCovector(self.n, self.k, self.components - other.components)

    def __mul__(self, t: float) -> "KCovector":
        return KCovector(self.n, self.k, float(t) * self.components)

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(np.linalg.norm(self.components))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "basis": [list(index) for index in basis_indices(self.n, self.k)],
            "components": self.components.tolist(),
        }


def _check_same_space(xi: KCovector, other: KCovector) -> None:
    if (xi.n, xi.k) != (other.n, other.k):
        raise DimensionMismatchError(f"Lambda^{xi.k}(R^{xi.n})* and Lambda^{other.k}(R^{other.n})* differ")


def pair(xi: KCovector, a: Union[SimpleKVector, Iterable[SimpleKVector]]) -> float:
    """
    Evaluate a k-covector on a simple k-vector (or on a sum of them).

    Args:
        xi: k-covector
        a: Simple k-vector, or an iterable of simple k-vectors to be summed

    Returns:
        The pairing <xi, a>
    """
    if not isinstance(a, SimpleKVector):
        return float(sum(pair(xi, term) for term in a))
    if (a.n, a.k) != (xi.n, xi.k):
        raise DimensionMismatchError(
            f"cannot pair Lambda^{xi.k}(R^{xi.n})* with a {a.k}-vector of R^{a.n}"
        )
    return float(np.dot(xi.components, a.plucker()))


def wedge(covectors: Sequence[Sequence[float]]) -> KCovector:
    """
    Simple k-covector p_1 ^ ... ^ p_k from 1-covectors given as rows.

    Args:
        covectors: Array-like of shape (k, n)

    Returns:
        KCovector whose pairing with v_1 ^ ... ^ v_k is det(p_i(v_j))
    """
    rows = np.atleast_2d(np.asarray(covectors, dtype=float))
    k, n = rows.shape
    return KCovector(n, k, _minors(rows))


def wedge_components(rows: np.ndarray) -> np.ndarray:
    """Batched version of `wedge`: (..., k, n) rows -> (..., C(n, k)) components."""
    return _minors(np.asarray(rows, dtype=float))


def det_form(n: int) -> KCovector:
    """The volume form e*_1 ^ ... ^ e*_n."""
    return KCovector(n, n, np.ones(1))


def span_basis(a: SimpleKVector) -> np.ndarray:
    """
    Orthonormal basis of the oriented plane <a>.

    Gram-Schmidt of the factors (QR with a positive diagonal), so the returned
    frame has the orientation of a.

    Args:
        a: Nonzero simple k-vector

    Returns:
        Array of shape (n, k) whose columns are the basis vectors
    """
    if a.is_zero():
        raise DegenerateKVectorError("span of a zero k-vector is undefined")
    q, r = np.linalg.qr(a.factors.T)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def span_basis_batch(frames: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Orthonormal oriented bases and magnitudes for a batch of factor stacks.

    Args:
        frames: Array of shape (m, k, n)

    Returns:
        (bases of shape (m, n, k), magnitudes of shape (m,))
    """
    frames = np.asarray(frames, dtype=float)
    q, r = np.linalg.qr(np.swapaxes(frames, -1, -2))
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    signs = np.where(diag < 0, -1.0, 1.0)
    magnitudes = np.abs(np.prod(diag, axis=-1))
    scale = np.maximum(1.0, np.prod(np.linalg.norm(frames, axis=-1), axis=-1))
    if np.any(magnitudes <= NUMERICS_CONFIG["zero_tolerance"] * scale):
        raise DegenerateKVectorError("degenerate frame in batch")
    return q * signs[..., None, :], magnitudes


def orthogonal_complement(a: SimpleKVector) -> np.ndarray:
    """Orthonormal basis (n, n - k) of the Euclidean complement of <a>."""
    basis = span_basis(a)
    full, _ = np.linalg.qr(np.hstack([basis, np.eye(a.n)]))
    return full[:, a.k:a.n]


def principal_angles(a: SimpleKVector, b: SimpleKVector) -> np.ndarray:
    """Principal angles (ascending) between the planes <a> and <b>."""
    if (a.n, a.k) != (b.n, b.k):
        raise DimensionMismatchError("principal angles need planes of equal dimension")
    cosines = np.linalg.svd(span_basis(a).T @ span_basis(b), compute_uv=False)
    return np.sort(np.arccos(np.clip(cosines, -1.0, 1.0)))


def tangent_terms(a: SimpleKVector, directions: np.ndarray) -> List[SimpleKVector]:
    """
    Terms of the derivative of t -> (v_1 + t w_1) ^ ... ^ (v_k + t w_k) at t = 0.

    Args:
        a: Base point v_1 ^ ... ^ v_k
        directions: Array (k, n) of factor velocities w_i

    Returns:
        Simple k-vectors whose sum is the tangent vector to the Grassmann cone
    """
    directions = np.asarray(directions, dtype=float)
    return [a.with_factor(i, directions[i]) for i in range(a.k) if np.any(directions[i])]
