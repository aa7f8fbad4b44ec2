"""
Busemann's projective metrics on R^n (n = 2, 3) built from smooth positive
even measures on the space of affine hyperplanes, and the Crofton-formula
check that their lengths count hyperplane crossings.

F(x, v) = 1/2 int_{S^{n-1}} |<xi, v>| m(xi, <xi, x>) dxi
"""

import logging
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from config.settings import CROFTON_CONFIG
from .cubature import gauss_legendre, paneled_gauss_legendre, periodic_trapezoid, unit_sphere_area
from .exceptions import DimensionMismatchError, InvalidNormError
from .finsler import FinslerChart, curve_geodesic_residual

logger = logging.getLogger(__name__)


class HyperplaneMeasure(ABC):
    """
    Density m(xi, p) of a measure on hyperplanes {<xi, x> = p}, xi a unit
    normal; even under (xi, p) -> (-xi, -p).
    """

    kind = "abstract"

    def __init__(self, dim: int):
        if dim not in (2, 3):
            raise DimensionMismatchError(f"hyperplane measures are implemented for n = 2, 3, got {dim}")
        self.dim = dim

    @abstractmethod
    def density(self, xi: np.ndarray, p: np.ndarray) -> np.ndarray:
        """m(xi, p) for xi (..., n), p (...)."""

    @abstractmethod
    def density_dp(self, xi: np.ndarray, p: np.ndarray) -> np.ndarray:
        """d m / d p."""

    def evenness_defect(self, samples: int = 256, seed: int = 0) -> float:
        rng = np.random.default_rng(seed)
        xi = sample_sphere(rng, samples, self.dim)
        p = rng.uniform(-3.0, 3.0, samples)
        return float(np.max(np.abs(self.density(xi, p) - self.density(-xi, -p))))

    def minimum_on(self, samples: int = 256, seed: int = 0) -> float:
        rng = np.random.default_rng(seed)
        xi = sample_sphere(rng, samples, self.dim)
        return float(np.min(self.density(xi, rng.uniform(-5.0, 5.0, samples))))

    def describe(self) -> Dict:
        return {"kind": self.kind, "dim": self.dim}


class UniformMeasure(HyperplaneMeasure):
    """m = base; the induced metric is a multiple of the Euclidean one."""

    kind = "uniform"

    def __init__(self, dim: int, base: float = 1.0):
        super().__init__(dim)
        if base <= 0:
            raise InvalidNormError("hyperplane density must be positive")
        self.base = float(base)

    def density(self, xi, p):
        return np.full(np.shape(p), self.base)

    def density_dp(self, xi, p):
        return np.zeros(np.shape(p))

    def describe(self) -> Dict:
        return {"kind": self.kind, "dim": self.dim, "base": self.base}


class GaussianBumpMeasure(HyperplaneMeasure):
    """m = base + amplitude exp(-(p - <xi, c>)^2 / width^2)."""

    kind = "gaussian_bump"

    def __init__(self, dim: int, base: float = 1.0, amplitude: float = 0.5, width: float = 1.0,
                 center: Optional[Sequence[float]] = None):
        super().__init__(dim)
        if base <= 0 or base + min(amplitude, 0.0) <= 0 or width <= 0:
            raise InvalidNormError("gaussian bump must keep the density positive")
        self.base = float(base)
        self.amplitude = float(amplitude)
        self.width = float(width)
        self.center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)

    def _offset(self, xi, p):
        return np.asarray(p, dtype=float) - np.asarray(xi, dtype=float) @ self.center

    def density(self, xi, p):
        s = self._offset(xi, p)
        return self.base + self.amplitude * np.exp(-(s / self.width) ** 2)

    def density_dp(self, xi, p):
        s = self._offset(xi, p)
        return -2.0 * self.amplitude * s / self.width ** 2 * np.exp(-(s / self.width) ** 2)

    def describe(self) -> Dict:
        return {"kind": self.kind, "dim": self.dim, "base": self.base, "amplitude": self.amplitude,
                "width": self.width, "center": self.center.tolist()}


class AnisotropicBumpMeasure(GaussianBumpMeasure):
    """Gaussian bump times (1 + anisotropy <xi, d>^2), d a unit direction."""

    kind = "anisotropic_bump"

    def __init__(self, dim: int, base: float = 1.0, amplitude: float = 0.5, width: float = 1.0,
                 anisotropy: float = 0.3, direction: Optional[Sequence[float]] = None,
                 center: Optional[Sequence[float]] = None):
        super().__init__(dim, base, amplitude, width, center)
        if anisotropy <= -1.0:
            raise InvalidNormError("anisotropy must exceed -1")
        d = np.eye(dim)[0] if direction is None else np.asarray(direction, dtype=float)
        self.direction = d / np.linalg.norm(d)
        self.anisotropy = float(anisotropy)

    def _angular(self, xi):
        return 1.0 + self.anisotropy * (np.asarray(xi, dtype=float) @ self.direction) ** 2

    def density(self, xi, p):
        return super().density(xi, p) * self._angular(xi)

    def density_dp(self, xi, p):
        return super().density_dp(xi, p) * self._angular(xi)

    def describe(self) -> Dict:
        data = super().describe()
        data.update({"anisotropy": self.anisotropy, "direction": self.direction.tolist()})
        return data


def sample_sphere(rng: np.random.Generator, size: int, n: int) -> np.ndarray:
    """Uniform samples on S^{n-1}."""
    z = rng.standard_normal((size, n))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Cosine transform on grids adapted to v
# ---------------------------------------------------------------------------

@lru_cache(maxsize=16)
def _adapted_rule(n: int, polar: int, azimuth: int, equator: int):
    """
    Parameter nodes of the v-adapted rule.

    Returns (cos_t, sin_t, cos_s, sin_s, weights, eq_cos, eq_sin, eq_weights)
    where xi = cos_t v_hat + sin_t (cos_s e1 + sin_s e2) and the equator
    nodes are eta = eq_cos e1 + eq_sin e2. For n = 2, e2 is absent.
    """
    if n == 2:
        theta, w = paneled_gauss_legendre(polar, np.array([-0.5, 0.5, 1.5]) * np.pi)
        ones = np.ones_like(theta)
        return (np.cos(theta), np.sin(theta), ones, np.zeros_like(theta), w,
                np.array([1.0, -1.0]), np.zeros(2), np.ones(2))
    theta, wt = paneled_gauss_legendre(polar, np.array([0.0, 0.5, 1.0]) * np.pi)
    psi, wp = periodic_trapezoid(azimuth)
    th, ps = np.meshgrid(theta, psi, indexing="ij")
    weights = (np.outer(wt, wp) * np.sin(th)).reshape(-1)
    eq, weq = periodic_trapezoid(equator)
    return (np.cos(th).reshape(-1), np.sin(th).reshape(-1), np.cos(ps).reshape(-1),
            np.sin(ps).reshape(-1), weights, np.cos(eq), np.sin(eq), weq)


def _orthonormal_frame(v_hat: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Unit e1, e2 completing v_hat (M, n) to a positive orthonormal frame."""
    if v_hat.shape[-1] == 2:
        e1 = np.stack([-v_hat[:, 1], v_hat[:, 0]], axis=-1)
        return e1, np.zeros_like(e1)
    helper = np.zeros_like(v_hat)
    near_pole = np.abs(v_hat[:, 2]) > 0.9
    helper[~near_pole, 2] = 1.0
    helper[near_pole, 0] = 1.0
    e1 = helper - np.sum(helper * v_hat, axis=1, keepdims=True) * v_hat
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    return e1, np.cross(v_hat, e1)


class CroftonChart(FinslerChart):
    """
    Finsler chart of the cosine transform of a hyperplane measure.

    All v- and x-derivatives are quadratures of differentiated integrands on
    the same v-adapted grid, so geodesic residuals of straight lines cancel
    node by node.
    """

    kind = "crofton"

    def __init__(self, measure: HyperplaneMeasure, lower=None, upper=None,
                 polar_nodes: Optional[int] = None, azimuth_nodes: Optional[int] = None,
                 equator_nodes: Optional[int] = None,
                 chunk_nodes: int = 2_000_000):
        super().__init__(measure.dim, lower, upper)
        self.measure = measure
        self.polar_nodes = polar_nodes or CROFTON_CONFIG["polar_nodes"]
        self.azimuth_nodes = azimuth_nodes or CROFTON_CONFIG["azimuth_nodes"]
        self.equator_nodes = equator_nodes or CROFTON_CONFIG["equator_nodes"]
        self.chunk_nodes = chunk_nodes

    def _rule(self):
        return _adapted_rule(self.dim, self.polar_nodes, self.azimuth_nodes, self.equator_nodes)

    def _evaluate(self, x, v, what: str) -> np.ndarray:
        x, v = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
        if v.shape[-1] != self.dim:
            raise DimensionMismatchError(f"expected vectors of dimension {self.dim}")
        lead = v.shape[:-1]
        flat_x = x.reshape(-1, self.dim)
        flat_v = v.reshape(-1, self.dim)
        rule = self._rule()
        chunk = max(1, self.chunk_nodes // (len(rule[0]) * self.dim))
        pieces = [self._evaluate_flat(flat_x[i:i + chunk], flat_v[i:i + chunk], what, rule)
                  for i in range(0, flat_v.shape[0], chunk)]
        out = np.concatenate(pieces, axis=0) if pieces else np.zeros((0,))
        return out.reshape(lead + out.shape[1:])

    def _evaluate_flat(self, x: np.ndarray, v: np.ndarray, what: str, rule) -> np.ndarray:
        cos_t, sin_t, cos_s, sin_s, weights, eq_cos, eq_sin, eq_weights = rule
        speed = np.linalg.norm(v, axis=1)
        if np.any(speed == 0.0):
            raise InvalidNormError("Crofton norm derivatives are undefined at v = 0")
        v_hat = v / speed[:, None]
        e1, e2 = _orthonormal_frame(v_hat)
        if what == "hessian":
            eta = eq_cos[None, :, None] * e1[:, None, :] + eq_sin[None, :, None] * e2[:, None, :]
            m = self.measure.density(eta, np.einsum("mqi,mi->mq", eta, x))
            return np.einsum("q,mq,mqi,mqj->mij", eq_weights, m, eta, eta) / speed[:, None, None]
        xi = (cos_t[None, :, None] * v_hat[:, None, :]
              + (sin_t * cos_s)[None, :, None] * e1[:, None, :]
              + (sin_t * sin_s)[None, :, None] * e2[:, None, :])
        p = np.einsum("mqi,mi->mq", xi, x)
        if what == "metric":
            m = self.measure.density(xi, p)
            return 0.5 * speed * np.einsum("q,mq->m", weights * np.abs(cos_t), m)
        if what == "gradient_v":
            m = self.measure.density(xi, p)
            return 0.5 * np.einsum("q,mq,mqi->mi", weights * np.sign(cos_t), m, xi)
        dm = self.measure.density_dp(xi, p)
        if what == "gradient_x":
            return 0.5 * speed[:, None] * np.einsum("q,mq,mqi->mi", weights * np.abs(cos_t), dm, xi)
        if what == "mixed":
            return 0.5 * np.einsum("q,mq,mqi,mqj->mij", weights * np.sign(cos_t), dm, xi, xi)
        raise ValueError(what)

    def metric(self, x, v) -> np.ndarray:
        return self._evaluate(x, v, "metric")

    def gradient_v(self, x, v) -> np.ndarray:
        return self._evaluate(x, v, "gradient_v")

    def hessian_v(self, x, v) -> np.ndarray:
        """(1/|v|) int over the equator xi ⟂ v of xi xi^T m."""
        return self._evaluate(x, v, "hessian")

    def gradient_x(self, x, v) -> np.ndarray:
        return self._evaluate(x, v, "gradient_x")

    def mixed(self, x, v) -> np.ndarray:
        return self._evaluate(x, v, "mixed")

    def describe(self) -> Dict:
        return {"kind": self.kind, "measure": self.measure.describe(),
                "polar_nodes": self.polar_nodes, "azimuth_nodes": self.azimuth_nodes,
                "equator_nodes": self.equator_nodes}


def crofton_norm(measure: HyperplaneMeasure, x, v, **quadrature) -> np.ndarray:
    """F(x, v) of the projective metric induced by `measure`."""
    return CroftonChart(measure, **quadrature).metric(x, v)


# ---------------------------------------------------------------------------
# Crofton formula by Monte Carlo
# ---------------------------------------------------------------------------

def segment_polyline(start, end, points: int = 2) -> np.ndarray:
    start, end = np.asarray(start, dtype=float), np.asarray(end, dtype=float)
    t = np.linspace(0.0, 1.0, points)[:, None]
    return start + t * (end - start)


def detour_polyline(start, end, height: float = 0.5, points: int = 201) -> np.ndarray:
    """Arc from start to end bulging by `height` along the in-plane normal (e_2 rotated for n = 2)."""
    start, end = np.asarray(start, dtype=float), np.asarray(end, dtype=float)
    chord = end - start
    normal = np.zeros_like(chord)
    normal[0], normal[1] = -chord[1], chord[0]
    normal /= np.linalg.norm(normal)
    t = np.linspace(0.0, 1.0, points)[:, None]
    return start + t * chord + height * np.sin(np.pi * t) * normal


def polyline_length(measure: HyperplaneMeasure, polyline: np.ndarray, nodes: int = 4, **quadrature) -> float:
    """Finsler length of a polyline: Gauss-Legendre on each segment of F(x(t), x')."""
    polyline = np.asarray(polyline, dtype=float)
    chart = CroftonChart(measure, **quadrature)
    t, w = gauss_legendre(nodes, 0.0, 1.0)
    deltas = np.diff(polyline, axis=0)
    points = polyline[:-1, None, :] + t[None, :, None] * deltas[:, None, :]
    values = chart.metric(points, np.broadcast_to(deltas[:, None, :], points.shape))
    return float(np.sum(values * w))


def default_window(polyline: np.ndarray, margin: Optional[float] = None) -> Tuple[float, float]:
    margin = CROFTON_CONFIG["window_margin"] if margin is None else margin
    radius = float(np.max(np.linalg.norm(polyline, axis=1)))
    return -radius - margin, radius + margin


def _count_crossings(polyline: np.ndarray, xi: np.ndarray, p: np.ndarray, threshold: float):
    s = polyline @ xi.T - p[None, :]
    crossing = s[:-1] * s[1:] < 0.0
    directions = np.diff(polyline, axis=0)
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    grazing = np.abs(directions @ xi.T) < threshold
    return crossing.sum(axis=0), np.any(crossing & grazing, axis=0)


def _mc_batch(measure: HyperplaneMeasure, polyline: np.ndarray, window: Tuple[float, float],
              size: int, seed: np.random.SeedSequence, threshold: float) -> Tuple[int, float, float, int]:
    rng = np.random.default_rng(seed)
    n = polyline.shape[1]
    low, high = window
    xi = sample_sphere(rng, size, n)
    p = rng.uniform(low, high, size)
    counts, tangential = _count_crossings(polyline, xi, p, threshold)
    resampled = 0
    while np.any(tangential):
        idx = np.flatnonzero(tangential)
        resampled += idx.size
        xi[idx] = sample_sphere(rng, idx.size, n)
        p[idx] = rng.uniform(low, high, idx.size)
        counts[idx], tangential_idx = _count_crossings(polyline, xi[idx], p[idx], threshold)
        tangential = np.zeros_like(tangential)
        tangential[idx] = tangential_idx
    values = 0.5 * unit_sphere_area(n) * (high - low) * measure.density(xi, p) * counts
    mean = float(np.mean(values))
    m2 = float(np.sum((values - mean) ** 2))
    return size, mean, m2, resampled


def _merge(a: Tuple[int, float, float], b: Tuple[int, float, float]) -> Tuple[int, float, float]:
    """Chan et al. pairwise update of (count, mean, M2)."""
    n_a, mean_a, m2_a = a
    n_b, mean_b, m2_b = b
    n = n_a + n_b
    delta = mean_b - mean_a
    return n, mean_a + delta * n_b / n, m2_a + m2_b + delta ** 2 * n_a * n_b / n


@dataclass
class CrossingEstimate:
    """Monte-Carlo estimate of 1/2 int #(H cap curve) m dH."""
    mean: float
    standard_error: float
    samples: int
    resampled: int
    window: Tuple[float, float]

    def to_dict(self) -> Dict:
        return {"mean": self.mean, "standard_error": self.standard_error, "samples": self.samples,
                "resampled": self.resampled, "window": list(self.window)}


def crossing_measure(measure: HyperplaneMeasure, polyline: np.ndarray, samples: int, seed: int,
                     window: Optional[Tuple[float, float]] = None, batch_size: Optional[int] = None,
                     workers: Optional[int] = None, threshold: Optional[float] = None) -> CrossingEstimate:
    """
    Monte-Carlo hyperplane measure of a polyline, counted with multiplicity.

    Batches draw from SeedSequence(seed).spawn(...) and are merged in batch
    order, so the estimate does not depend on the worker count; equal seeds
    and windows give common random numbers across curves.
    """
    polyline = np.asarray(polyline, dtype=float)
    if polyline.shape[1] != measure.dim:
        raise DimensionMismatchError("curve and measure live in different dimensions")
    window = window or default_window(polyline)
    batch_size = batch_size or CROFTON_CONFIG["mc_batch_size"]
    workers = workers or CROFTON_CONFIG["workers"]
    threshold = CROFTON_CONFIG["tangency_threshold"] if threshold is None else threshold
    sizes = [batch_size] * (samples // batch_size)
    if samples % batch_size:
        sizes.append(samples % batch_size)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(job):
        size, seq = job
        return _mc_batch(measure, polyline, window, size, seq, threshold)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, zip(sizes, seeds)))
    else:
        results = [run(job) for job in zip(sizes, seeds)]

    total = (0, 0.0, 0.0)
    resampled = 0
    for count, mean, m2, extra in results:
        logger.debug("crossing batch: %d samples, mean %.6g", count, mean)
        total = (count, mean, m2) if total[0] == 0 else _merge(total, (count, mean, m2))
        resampled += extra
    if resampled:
        logger.warning("resampled %d tangential hyperplanes", resampled)
    count, mean, m2 = total
    standard_error = float(np.sqrt(m2 / (count - 1) / count)) if count > 1 else float("inf")
    return CrossingEstimate(mean, standard_error, count, resampled, window)


@dataclass
class CroftonLengthReport:
    """Crossing-count length against the arclength integral of the Crofton norm."""
    lhs: float
    rhs: float
    standard_error: float
    samples: int
    resampled: int
    sigma_limit: float = 3.0

    @property
    def relative_gap(self) -> float:
        return abs(self.lhs - self.rhs) / abs(self.rhs)

    @property
    def sigma_gap(self) -> float:
        return abs(self.lhs - self.rhs) / self.standard_error if self.standard_error > 0 else float("inf")

    @property
    def passed(self) -> bool:
        return self.sigma_gap <= self.sigma_limit

    def to_dict(self) -> Dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "standard_error": self.standard_error,
                "relative_gap": self.relative_gap, "sigma_gap": self.sigma_gap,
                "samples": self.samples, "resampled": self.resampled,
                "sigma_limit": self.sigma_limit, "passed": self.passed}


def crofton_length_identity_check(measure: HyperplaneMeasure, curve: np.ndarray, mc_samples: int,
                                  seed: int, window: Optional[Tuple[float, float]] = None,
                                  workers: Optional[int] = None, **quadrature) -> CroftonLengthReport:
    """Compare 1/2 int #(H cap curve) m dH with int F(c, c') along a polyline."""
    estimate = crossing_measure(measure, curve, mc_samples, seed, window, workers=workers)
    rhs = polyline_length(measure, curve, **quadrature)
    report = CroftonLengthReport(estimate.mean, rhs, estimate.standard_error, estimate.samples, estimate.resampled)
    logger.info("Crofton length: crossings %.6g +- %.2g, arclength %.6g", report.lhs, report.standard_error, rhs)
    return report


def line_geodesic_residual(measure: HyperplaneMeasure, x0, v0, samples: int = 21,
                           bump: float = 0.0, bump_direction=None, **quadrature) -> float:
    """
    sup over t in [0, 1] of the Euler-Lagrange residual of t -> x0 + t v0,
    optionally perturbed by bump sin^2(pi t) along `bump_direction`.
    """
    x0, v0 = np.asarray(x0, dtype=float), np.asarray(v0, dtype=float)
    w = np.zeros_like(v0) if bump_direction is None else np.asarray(bump_direction, dtype=float)
    chart = CroftonChart(measure, **quadrature)

    def position(t):
        return x0 + t[:, None] * v0 + bump * (np.sin(np.pi * t) ** 2)[:, None] * w

    def velocity(t):
        return v0 + bump * (np.pi * np.sin(2 * np.pi * t))[:, None] * w + 0.0 * t[:, None]

    def acceleration(t):
        return bump * (2 * np.pi ** 2 * np.cos(2 * np.pi * t))[:, None] * w + 0.0 * t[:, None]

    return curve_geodesic_residual(chart, position, velocity, acceleration, np.linspace(0.0, 1.0, samples))
