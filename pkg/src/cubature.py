"""
Quadrature rules shared by the density, Crofton, variation and volume code.

Spheres of dimension 0, 1 and 2 carry product rules together with the
parameter tangents needed by the Legendre parametrization of dual spheres.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy.special import gamma, roots_legendre

from config.settings import CUBATURE_CONFIG
from .exceptions import CubatureError, DimensionMismatchError

logger = logging.getLogger(__name__)


def unit_ball_volume(k: int) -> float:
    """Volume epsilon_k of the Euclidean unit k-ball."""
    return float(np.pi ** (k / 2.0) / gamma(k / 2.0 + 1.0))


def unit_sphere_area(n: int) -> float:
    """Area of the unit sphere S^{n-1} in R^n."""
    return n * unit_ball_volume(n)


@lru_cache(maxsize=64)
def _legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_legendre(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Legendre rule with n nodes mapped to [a, b].

    Returns:
        (nodes, weights)
    """
    nodes, weights = _legendre(int(n))
    half = 0.5 * (b - a)
    return a + half * (nodes + 1.0), half * weights


def periodic_trapezoid(n: int, period: float = 2 * np.pi, offset: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """Trapezoid rule on a circle of the given period (spectral for smooth periodic integrands)."""
    nodes = offset + period * np.arange(n) / n
    return nodes, np.full(n, period / n)


def paneled_gauss_legendre(n: int, breaks: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre with n nodes on each panel between consecutive breaks."""
    nodes, weights = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        x, w = gauss_legendre(n, a, b)
        nodes.append(x)
        weights.append(w)
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass(frozen=True)
class SphereRule:
    """
    Product rule on S^{k-1} in R^k.

    Attributes:
        points: (N, k) nodes on the unit sphere
        tangents: (N, k-1, k) parameter derivatives of the nodes, ordered so
            that det[u, t_1, ..., t_{k-1}] > 0
        weights: (N,) parameter weights; for k = 1 the orientation signs
        area_weights: (N,) surface-measure weights
    """
    points: np.ndarray
    tangents: np.ndarray
    weights: np.ndarray
    area_weights: np.ndarray

    @property
    def k(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]


@lru_cache(maxsize=32)
def sphere_rule(k: int, nodes: Optional[int] = None) -> SphereRule:
    """
    Quadrature on the unit sphere of R^k for k = 1, 2, 3.

    k = 2 uses the trapezoid rule in the angle; k = 3 uses Gauss-Legendre in
    the polar angle times the trapezoid rule in the azimuth, with `nodes`
    azimuthal points and nodes // 2 polar points.
    """
    if k == 1:
        points = np.array([[1.0], [-1.0]])
        signs = np.array([1.0, -1.0])
        return SphereRule(points, np.zeros((2, 0, 1)), signs, np.ones(2))
    if k == 2:
        nodes = nodes or CUBATURE_CONFIG["circle_nodes"]
        theta, w = periodic_trapezoid(nodes)
        points = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        tangents = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)[:, None, :]
        return SphereRule(points, tangents, w, w)
    if k == 3:
        n_polar, n_azimuth = CUBATURE_CONFIG["sphere_nodes"]
        if nodes:
            n_polar, n_azimuth = max(nodes // 2, 2), nodes
        theta, wt = gauss_legendre(n_polar, 0.0, np.pi)
        psi, wp = periodic_trapezoid(n_azimuth)
        th, ps = np.meshgrid(theta, psi, indexing="ij")
        st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ps), np.cos(ps)
        points = np.stack([st * cp, st * sp, ct], axis=-1).reshape(-1, 3)
        d_theta = np.stack([ct * cp, ct * sp, -st], axis=-1).reshape(-1, 3)
        d_psi = np.stack([-st * sp, st * cp, np.zeros_like(st)], axis=-1).reshape(-1, 3)
        w = np.outer(wt, wp).reshape(-1)
        return SphereRule(points, np.stack([d_theta, d_psi], axis=1), w, w * st.reshape(-1))
    raise DimensionMismatchError(f"sphere rules are available for k <= 3, got k={k}")


def coarse_nodes(k: int, nodes: Optional[int] = None) -> int:
    """Node parameter of the half-resolution rule used for error estimates."""
    if k == 2:
        return (nodes or CUBATURE_CONFIG["circle_nodes"]) // 2
    if k == 3:
        return (nodes or CUBATURE_CONFIG["sphere_nodes"][1]) // 2
    return nodes


def box_rule(n: int, lower: np.ndarray, upper: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Legendre tensor grid on a box.

    Returns:
        (nodes of shape (n**d, d), weights of shape (n**d,))
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    axes = [gauss_legendre(n, a, b) for a, b in zip(lower, upper)]
    grids = np.meshgrid(*[x for x, _ in axes], indexing="ij")
    weights = np.ones_like(grids[0])
    for i, (_, w) in enumerate(axes):
        shape = [1] * len(axes)
        shape[i] = n
        weights = weights * w.reshape(shape)
    return np.stack([g.reshape(-1) for g in grids], axis=-1), weights.reshape(-1)


def ball_rule(k: int, n_radial: int, n_angular: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Rule on the closed unit k-ball (k = 1 or 2) in polar coordinates.

    k = 1 is Gauss-Legendre on [-1, 1]; k = 2 is Gauss-Legendre in the
    radius times the trapezoid rule in the angle, with the Jacobian r folded
    into the weights.

    Returns:
        (nodes of shape (N, k), weights of shape (N,))
    """
    if k == 1:
        x, w = gauss_legendre(2 * n_radial)
        return x[:, None], w
    if k == 2:
        r, wr = gauss_legendre(n_radial, 0.0, 1.0)
        phi, wphi = periodic_trapezoid(n_angular)
        rr, pp = np.meshgrid(r, phi, indexing="ij")
        nodes = np.stack([rr * np.cos(pp), rr * np.sin(pp)], axis=-1).reshape(-1, 2)
        return nodes, (np.outer(wr, wphi) * rr).reshape(-1)
    raise DimensionMismatchError(f"ball rules are available for k <= 2, got k={k}")


def richardson(coarse: float, fine: float, order: int) -> float:
    """Extrapolate two estimates with step ratio 2 and error O(h^order)."""
    factor = 2.0 ** order
    return (factor * fine - coarse) / (factor - 1.0)


def check_estimate(value: float, error_estimate: float, what: str,
                   relative_tolerance: Optional[float] = None, absolute_floor: float = 1e-13,
                   check: Optional[bool] = None) -> None:
    """
    Raise CubatureError when a refinement estimate exceeds its tolerance.

    Args:
        value: Fine-grid value
        error_estimate: |fine - coarse|
        what: Name of the integral for messages
        relative_tolerance: Defaults to CUBATURE_CONFIG["relative_tolerance"]
        absolute_floor: Absolute tolerance added to the relative one
        check: Defaults to CUBATURE_CONFIG["check_convergence"]
    """
    tol = CUBATURE_CONFIG["relative_tolerance"] if relative_tolerance is None else relative_tolerance
    check = CUBATURE_CONFIG["check_convergence"] if check is None else check
    logger.debug("%s: value %.15g, refinement gap %.3e", what, value, error_estimate)
    if check and error_estimate > tol * abs(value) + absolute_floor:
        raise CubatureError(f"{what} did not converge", value, error_estimate)
