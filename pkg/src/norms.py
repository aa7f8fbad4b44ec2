"""
Smooth quadratically convex norms on R^n.

All evaluations are batched over leading axes: a vector argument of shape
(..., n) returns values of shape (...), gradients (..., n) and Hessians
(..., n, n).
"""

import logging
from abc import ABC, abstractmethod
from typing import Optional

import numpy as np
from scipy import linalg

from config.settings import NUMERICS_CONFIG
from .exceptions import ConvergenceError, DimensionMismatchError, InvalidNormError
from .exterior import SimpleKVector, span_basis

logger = logging.getLogger(__name__)


def _as_vectors(v, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != n:
        raise DimensionMismatchError(f"expected vectors of dimension {n}, got shape {v.shape}")
    return v


def _spd(matrix, name: str) -> np.ndarray:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.shape[0] != matrix.shape[1] or not np.allclose(matrix, matrix.T, atol=1e-12):
        raise InvalidNormError(f"{name} must be a symmetric square matrix")
    try:
        linalg.cholesky(matrix)
    except linalg.LinAlgError as exc:
        raise InvalidNormError(f"{name} is not positive definite") from exc
    return matrix


class MinkowskiNorm(ABC):
    """
    Positively homogeneous, smooth, quadratically convex norm F on R^n.

    Subclasses provide F, its gradient and its Hessian D^2F; the fundamental
    tensor, the Legendre map and the dual norm are derived from those.
    """

    def __init__(self, dim: int):
        self.dim = dim

    @abstractmethod
    def evaluate(self, v) -> np.ndarray:
        """F(v)."""

    @abstractmethod
    def gradient(self, v) -> np.ndarray:
        """dF_v, homogeneous of degree 0."""

    @abstractmethod
    def hessian(self, v) -> np.ndarray:
        """D^2 F_v, homogeneous of degree -1."""

    def __call__(self, v) -> np.ndarray:
        return self.evaluate(v)

    @property
    def has_closed_form_dual(self) -> bool:
        return False

    def fundamental_tensor(self, v) -> np.ndarray:
        """g_v = D^2(F^2/2)_v = F D^2F + dF dF^T."""
        v = _as_vectors(v, self.dim)
        f = self.evaluate(v)[..., None, None]
        grad = self.gradient(v)
        return f * self.hessian(v) + grad[..., :, None] * grad[..., None, :]

    def legendre(self, v) -> np.ndarray:
        """L^1(v) = F(v) dF_v."""
        v = _as_vectors(v, self.dim)
        return self.evaluate(v)[..., None] * self.gradient(v)

    def dual(self, p) -> np.ndarray:
        """Dual norm by Newton ascent of the Fenchel objective (see `dual_norm_newton`)."""
        p = _as_vectors(p, self.dim)
        flat = p.reshape(-1, self.dim)
        values = np.array([dual_norm_newton(self, row) for row in flat])
        return values.reshape(p.shape[:-1])

    def restrict(self, frame: np.ndarray) -> "MinkowskiNorm":
        """The norm w -> F(E w) on R^k for an (n, k) orthonormal frame E."""
        return RestrictedNorm(self, frame)

    def describe(self) -> dict:
        return {"kind": type(self).__name__, "dim": self.dim}


class EuclideanNorm(MinkowskiNorm):
    """F(v) = sqrt(v^T A v)."""

    def __init__(self, A=None, dim: Optional[int] = None):
        if A is None:
            if dim is None:
                raise InvalidNormError("EuclideanNorm needs a matrix or a dimension")
            A = np.eye(dim)
        self.A = _spd(A, "A")
        self._cho = linalg.cho_factor(self.A)
        self._A_inv = linalg.cho_solve(self._cho, np.eye(self.A.shape[0]))
        super().__init__(self.A.shape[0])

    @property
    def has_closed_form_dual(self) -> bool:
        return True

    def evaluate(self, v) -> np.ndarray:
        v = _as_vectors(v, self.dim)
        return np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", v, self.A, v), 0.0))

    def gradient(self, v) -> np.ndarray:
        v = _as_vectors(v, self.dim)
        return (v @ self.A) / self.evaluate(v)[..., None]

    def hessian(self, v) -> np.ndarray:
        v = _as_vectors(v, self.dim)
        f = self.evaluate(v)[..., None, None]
        av = v @ self.A
        return self.A / f - av[..., :, None] * av[..., None, :] / f ** 3

    def fundamental_tensor(self, v) -> np.ndarray:
        v = _as_vectors(v, self.dim)
        return np.broadcast_to(self.A, v.shape[:-1] + self.A.shape).copy()

    def dual(self, p) -> np.ndarray:
        p = _as_vectors(p, self.dim)
        return np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", p, self._A_inv, p), 0.0))

    def restrict(self, frame: np.ndarray) -> "EuclideanNorm":
        return EuclideanNorm(frame.T @ self.A @ frame)

    def describe(self) -> dict:
        return {"kind": "euclidean", "A": self.A.tolist()}


class RandersNorm(MinkowskiNorm):
    """
    F(v) = sqrt(v^T A v) + <b, v> with |b|_{A^{-1}} < 1.

    The dual unit ball is the ellipsoid {p : |p - b|_{A^{-1}} <= 1}.
    """

    def __init__(self, A, b):
        self.A = _spd(A, "A")
        self.b = np.asarray(b, dtype=float).reshape(-1)
        if self.b.shape[0] != self.A.shape[0]:
            raise DimensionMismatchError("Randers drift and matrix dimensions differ")
        self._cho = linalg.cho_factor(self.A)
        self._A_inv = linalg.cho_solve(self._cho, np.eye(self.A.shape[0]))
        self.drift_norm = float(np.sqrt(self.b @ self._A_inv @ self.b))
        if self.drift_norm >= 1.0:
            raise InvalidNormError(f"Randers drift has |b|_(A^-1) = {self.drift_norm:.6g} >= 1")
        super().__init__(self.A.shape[0])

    @property
    def has_closed_form_dual(self) -> bool:
        return True

    def _alpha(self, v) -> np.ndarray:
        return np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", v, self.A, v), 0.0))

    def evaluate(self, v) -> np.ndarray:
        v = _as_vectors(v, self.dim)
        return self._alpha(v) + v @ self.b

    def gradient(self, v) -> np.ndarray:
        v = _as_vectors(v, self.dim)
        return (v @ self.A) / self._alpha(v)[..., None] + self.b

    def hessian(self, v) -> np.ndarray:
        v = _as_vectors(v, self.dim)
        alpha = self._alpha(v)[..., None, None]
        av = v @ self.A
        return self.A / alpha - av[..., :, None] * av[..., None, :] / alpha ** 3

    def dual(self, p) -> np.ndarray:
        p = _as_vectors(p, self.dim)
        pp = np.einsum("...i,ij,...j->...", p, self._A_inv, p)
        pb = p @ (self._A_inv @ self.b)
        slack = 1.0 - self.drift_norm ** 2
        return (-pb + np.sqrt(np.maximum(pb ** 2 + slack * pp, 0.0))) / slack

    def restrict(self, frame: np.ndarray) -> "RandersNorm":
        return RandersNorm(frame.T @ self.A @ frame, frame.T @ self.b)

    def describe(self) -> dict:
        return {"kind": "randers", "A": self.A.tolist(), "b": self.b.tolist()}


class RestrictedNorm(MinkowskiNorm):
    """w -> F(E w) for an orthonormal (n, k) frame E."""

    def __init__(self, norm: MinkowskiNorm, frame: np.ndarray):
        self.norm = norm
        self.frame = np.asarray(frame, dtype=float)
        if self.frame.shape[0] != norm.dim:
            raise DimensionMismatchError("frame rows must match the ambient dimension")
        super().__init__(self.frame.shape[1])

    def _lift(self, w) -> np.ndarray:
        return _as_vectors(w, self.dim) @ self.frame.T

    def evaluate(self, w) -> np.ndarray:
        return self.norm.evaluate(self._lift(w))

    def gradient(self, w) -> np.ndarray:
        return self.norm.gradient(self._lift(w)) @ self.frame

    def hessian(self, w) -> np.ndarray:
        return self.frame.T @ self.norm.hessian(self._lift(w)) @ self.frame


class SymmetrizedNorm(MinkowskiNorm):
    """v -> (F(v) + F(-v)) / 2, the Holmes-Thompson 1-density of F."""

    def __init__(self, norm: MinkowskiNorm):
        self.norm = norm
        super().__init__(norm.dim)

    def evaluate(self, v) -> np.ndarray:
        v = _as_vectors(v, self.dim)
        return 0.5 * (self.norm.evaluate(v) + self.norm.evaluate(-v))

    def gradient(self, v) -> np.ndarray:
        v = _as_vectors(v, self.dim)
        return 0.5 * (self.norm.gradient(v) - self.norm.gradient(-v))

    def hessian(self, v) -> np.ndarray:
        v = _as_vectors(v, self.dim)
        return 0.5 * (self.norm.hessian(v) + self.norm.hessian(-v))


def dual_norm_newton(norm: MinkowskiNorm, p: np.ndarray, starts: Optional[int] = None,
                     max_iter: Optional[int] = None, tolerance: Optional[float] = None, seed: int = 0) -> float:
    """
    sup over F(v) = 1 of p(v), for a generic norm.

    Maximizes the concave objective p(v) - F(v)^2 / 2 by damped Newton steps
    v <- v + g_v^{-1} (p - L^1(v)); at the maximizer L^1(v) = p and
    F*(p) = F(v). Several starts are tried and the best converged one kept.

    Raises:
        ConvergenceError: when no start reaches the residual tolerance
    """
    starts = starts or NUMERICS_CONFIG["dual_norm_starts"]
    max_iter = max_iter or NUMERICS_CONFIG["newton_max_iter"]
    tolerance = NUMERICS_CONFIG["newton_tolerance"] if tolerance is None else tolerance
    p = np.asarray(p, dtype=float)
    scale = float(np.linalg.norm(p))
    if scale == 0.0:
        return 0.0

    def objective(v):
        return float(p @ v - 0.5 * norm.evaluate(v) ** 2)

    rng = np.random.default_rng(seed)
    initial = [p / scale] + [rng.standard_normal(norm.dim) for _ in range(starts - 1)]
    best_value, best_residual = -np.inf, np.inf
    for v in initial:
        v = v * scale / max(float(norm.evaluate(v)), 1e-300)
        residual = np.inf
        for _ in range(max_iter):
            residual_vec = p - norm.legendre(v)
            residual = float(np.linalg.norm(residual_vec)) / scale
            if residual <= tolerance:
                break
            step = np.linalg.solve(norm.fundamental_tensor(v), residual_vec)
            current, t = objective(v), 1.0
            while t > 1e-8 and objective(v + t * step) < current:
                t *= 0.5
            v = v + t * step
        value = float(norm.evaluate(v))
        logger.debug("dual norm start: value %.15g, residual %.3e", value, residual)
        if residual < best_residual:
            best_value, best_residual = value, residual
        if residual <= tolerance:
            return value
    if best_residual <= 1e3 * tolerance:
        logger.warning("dual norm accepted with residual %.3e", best_residual)
        return best_value
    raise ConvergenceError("dual norm maximization did not converge", best_value, best_residual)


def dual_norm(norm: MinkowskiNorm, p) -> np.ndarray:
    """F*(p) = sup {p(v) : F(v) = 1}; closed forms for Euclidean and Randers norms."""
    return norm.dual(p)


def legendre_norm(norm: MinkowskiNorm, v) -> np.ndarray:
    """L^1(v) = d(F^2/2)_v."""
    v = _as_vectors(v, norm.dim)
    if np.any(np.linalg.norm(v, axis=-1) <= NUMERICS_CONFIG["zero_tolerance"]):
        raise InvalidNormError("the Legendre map is not defined at v = 0")
    return norm.legendre(v)


def restrict(norm: MinkowskiNorm, W: SimpleKVector) -> MinkowskiNorm:
    """Restriction of `norm` to the oriented plane <W>, in the frame of `span_basis(W)`."""
    if W.n != norm.dim:
        raise DimensionMismatchError(f"plane lives in R^{W.n}, norm in R^{norm.dim}")
    return norm.restrict(span_basis(W))


def symmetrized(norm: MinkowskiNorm) -> MinkowskiNorm:
    return SymmetrizedNorm(norm)


def finite_difference_gradient(fn, v: np.ndarray, step: Optional[float] = None) -> np.ndarray:
    """Central differences of a scalar function, step eps^(1/3) * max(1, |v|) by default."""
    v = np.asarray(v, dtype=float)
    h = step if step is not None else np.finfo(float).eps ** (1.0 / 3.0) * max(1.0, float(np.linalg.norm(v)))
    eye = np.eye(v.shape[-1])
    return np.array([(fn(v + h * e) - fn(v - h * e)) / (2.0 * h) for e in eye])
