"""
k-densities of a Minkowski norm: Holmes-Thompson and Busemann-Hausdorff
densities, the Busemann form beta_a and the Holmes-Thompson Legendre map
a -> phi(a) beta_a.

The Holmes-Thompson density is (1/eps_k) times the volume of the dual unit
ball of the restricted norm G = F|<a>, measured in the coordinates where a is
the unit cube. That volume is computed either by the polar formula
(1/k) int G*(u)^{-k} du, when G* has a closed form, or through the Legendre
parametrization u -> dG(u) of the dual sphere,
(1/k) int det[dG(u), D^2G(u) d_1 u, ..., D^2G(u) d_{k-1} u].
The same parametrization, pushed back into R^n, is the locus Sigma_a whose
oriented integral defines beta_a.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg

from config.settings import NUMERICS_CONFIG
from .cubature import SphereRule, check_estimate, coarse_nodes, sphere_rule, unit_ball_volume
from .exceptions import DegenerateKVectorError, DimensionMismatchError, UnknownOptionError
from .exterior import (
    KCovector,
    SimpleKVector,
    orthogonal_complement,
    pair,
    principal_angles,
    span_basis,
    span_basis_batch,
    tangent_terms,
    wedge_components,
)
from .norms import MinkowskiNorm

logger = logging.getLogger(__name__)

HOLMES_THOMPSON = "holmes_thompson"
BUSEMANN_HAUSDORFF = "busemann_hausdorff"

ROUTES = ("auto", "polar", "legendre")
DERIVATIVES = ("hessian", "central")

# grad_fn / hess_fn take directions of shape (m, N, n)
GradientFn = Callable[[np.ndarray], np.ndarray]


def _shifted_points(rule: SphereRule, index: int, h: float) -> np.ndarray:
    """Sphere nodes moved by h along parameter `index` (exact rotations)."""
    k = rule.k
    if k == 2:
        return np.cos(h) * rule.points + np.sin(h) * rule.tangents[:, 0, :]
    if k == 3 and index == 0:
        return np.cos(h) * rule.points + np.sin(h) * rule.tangents[:, 0, :]
    if k == 3 and index == 1:
        c, s = np.cos(h), np.sin(h)
        rotation = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return rule.points @ rotation.T
    raise DimensionMismatchError(f"no parameter {index} on S^{k - 1}")


def legendre_image_rows(grad_fn: GradientFn, hess_fn: Optional[GradientFn], bases: np.ndarray,
                        rule: SphereRule, derivative: str = "hessian") -> np.ndarray:
    """
    Rows [p, d_1 p, ..., d_{k-1} p] of the Legendre image p = dF(E u) of <E>.

    Args:
        grad_fn: directions (m, N, n) -> gradients (m, N, n)
        hess_fn: directions (m, N, n) -> Hessians (m, N, n, n); unused for
            derivative="central"
        bases: (m, n, k) orthonormal frames E
        rule: Sphere rule on S^{k-1}
        derivative: "hessian" (d p = D^2F E du) or "central" differences in
            the sphere parameters

    Returns:
        Array (m, N, k, n)
    """
    if derivative not in DERIVATIVES:
        raise UnknownOptionError(f"unknown derivative scheme {derivative!r}")
    directions = np.einsum("mnk,qk->mqn", bases, rule.points)
    p = grad_fn(directions)
    k = rule.k
    if k == 1:
        return p[:, :, None, :]
    if derivative == "hessian":
        pushed = np.einsum("mnk,qtk->mqtn", bases, rule.tangents)
        dp = np.einsum("mqij,mqtj->mqti", hess_fn(directions), pushed)
    else:
        h = NUMERICS_CONFIG["fd_step_theta"]
        columns = []
        for index in range(k - 1):
            plus = np.einsum("mnk,qk->mqn", bases, _shifted_points(rule, index, h))
            minus = np.einsum("mnk,qk->mqn", bases, _shifted_points(rule, index, -h))
            columns.append((grad_fn(plus) - grad_fn(minus)) / (2.0 * h))
        dp = np.stack(columns, axis=2)
    return np.concatenate([p[:, :, None, :], dp], axis=2)


def _dual_volume_from_rows(rows: np.ndarray, bases: np.ndarray, rule: SphereRule) -> np.ndarray:
    k = rule.k
    projected = np.einsum("mqti,mik->mqtk", rows, bases)
    return np.einsum("mq,q->m", np.linalg.det(projected), rule.weights) / k


def _busemann_from_rows(rows: np.ndarray, rule: SphereRule) -> np.ndarray:
    k = rule.k
    return np.einsum("mqc,q->mc", wedge_components(rows), rule.weights) / (k * unit_ball_volume(k))


def _frame_of(a: SimpleKVector) -> Tuple[np.ndarray, float]:
    if a.is_zero():
        raise DegenerateKVectorError("density of a zero k-vector frame requested")
    return span_basis(a), a.magnitude


def _check_k(norm: MinkowskiNorm, a: SimpleKVector) -> None:
    if a.n != norm.dim:
        raise DimensionMismatchError(f"k-vector in R^{a.n} for a norm on R^{norm.dim}")
    if a.k > 3:
        raise DimensionMismatchError(f"densities are implemented for k <= 3, got k={a.k}")


@dataclass
class DensityEvaluation:
    """Value of a density on a k-vector with its cubature refinement gap."""
    kind: str
    value: float
    error_estimate: float
    route: str
    k: int
    n: int

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind,
            "value": self.value,
            "error_estimate": self.error_estimate,
            "route": self.route,
            "k": self.k,
            "n": self.n,
        }


def _dual_ball_volume(norm: MinkowskiNorm, frame: np.ndarray, route: str, nodes: Optional[int]) -> float:
    k = frame.shape[1]
    rule = sphere_rule(k, nodes)
    if route == "polar":
        restricted = norm.restrict(frame)
        return float(np.dot(rule.area_weights, restricted.dual(rule.points) ** (-k)) / k)
    rows = legendre_image_rows(norm.gradient, norm.hessian, frame[None], rule)
    return float(_dual_volume_from_rows(rows, frame[None], rule)[0])


def _primal_ball_volume(norm: MinkowskiNorm, frame: np.ndarray, nodes: Optional[int]) -> float:
    k = frame.shape[1]
    rule = sphere_rule(k, nodes)
    restricted = norm.restrict(frame)
    return float(np.dot(np.abs(rule.area_weights), restricted.evaluate(rule.points) ** (-k)) / k)


def evaluate_density(norm: MinkowskiNorm, a: SimpleKVector, kind: str = HOLMES_THOMPSON,
                     route: str = "auto", nodes: Optional[int] = None,
                     estimate_error: bool = True) -> DensityEvaluation:
    """
    Evaluate the Holmes-Thompson or Busemann-Hausdorff density on a.

    Raises:
        CubatureError: if the half-resolution rule disagrees beyond tolerance
    """
    _check_k(norm, a)
    if route not in ROUTES:
        raise UnknownOptionError(f"unknown route {route!r}")
    frame, magnitude = _frame_of(a)
    k = a.k
    eps = unit_ball_volume(k)
    if kind == HOLMES_THOMPSON:
        if route == "auto":
            route = "polar" if norm.has_closed_form_dual else "legendre"

        def compute(n_nodes):
            return magnitude * _dual_ball_volume(norm, frame, route, n_nodes) / eps
    elif kind == BUSEMANN_HAUSDORFF:
        route = "polar"

        def compute(n_nodes):
            return magnitude * eps / _primal_ball_volume(norm, frame, n_nodes)
    else:
        raise UnknownOptionError(f"unknown density kind {kind!r}")

    value = compute(nodes)
    error = 0.0
    if estimate_error and k > 1:
        error = abs(value - compute(coarse_nodes(k, nodes)))
        check_estimate(value, error, f"{kind} density (k={k}, route {route})")
    return DensityEvaluation(kind, value, error, route, k, a.n)


def ht_density(norm: MinkowskiNorm, a: SimpleKVector, route: str = "auto",
               nodes: Optional[int] = None, estimate_error: bool = True) -> float:
    """Holmes-Thompson density phi(a)."""
    return evaluate_density(norm, a, HOLMES_THOMPSON, route, nodes, estimate_error).value


def busemann_hausdorff_density(norm: MinkowskiNorm, a: SimpleKVector,
                               nodes: Optional[int] = None, estimate_error: bool = True) -> float:
    """Busemann (Hausdorff) density eps_k |a| / vol(B_F intersected with <a>)."""
    return evaluate_density(norm, a, BUSEMANN_HAUSDORFF, "polar", nodes, estimate_error).value


class KDensity:
    """
    A k-density of a Minkowski norm.

    Attributes:
        norm: Underlying norm
        k: Degree
        kind: HOLMES_THOMPSON or BUSEMANN_HAUSDORFF
    """

    def __init__(self, norm: MinkowskiNorm, k: int, kind: str = HOLMES_THOMPSON, nodes: Optional[int] = None):
        if not 1 <= k <= min(norm.dim, 3):
            raise DimensionMismatchError(f"k={k} unsupported for a norm on R^{norm.dim}")
        self.norm = norm
        self.k = k
        self.kind = kind
        self.nodes = nodes

    @property
    def n(self) -> int:
        return self.norm.dim

    @property
    def epsilon_k(self) -> float:
        return unit_ball_volume(self.k)

    def evaluate(self, a: SimpleKVector) -> float:
        if a.k != self.k:
            raise DimensionMismatchError(f"{self.k}-density evaluated on a {a.k}-vector")
        if a.is_zero():
            return 0.0
        return evaluate_density(self.norm, a, self.kind, nodes=self.nodes, estimate_error=False).value

    def __call__(self, a: SimpleKVector) -> float:
        return self.evaluate(a)


@dataclass(frozen=True)
class BusemannForm:
    """beta_a as a k-covector, with the base k-vector it calibrates."""
    base: SimpleKVector
    value: KCovector

    def __call__(self, b) -> float:
        return pair(self.value, b)


def busemann_form(norm: MinkowskiNorm, a: SimpleKVector, derivative: str = "hessian",
                  nodes: Optional[int] = None) -> BusemannForm:
    """
    beta_a(b) = (1 / (k eps_k)) int <b, p ^ d_1 p ^ ... ^ d_{k-1} p>,
    p running over the Legendre image of the unit sphere of <a>.

    For k = 1 this is (dF_e - dF_{-e}) / 2; for k = n it is phi(a)/|a| times
    the determinant in the frame of a.
    """
    _check_k(norm, a)
    frame, _ = _frame_of(a)
    rule = sphere_rule(a.k, nodes)
    rows = legendre_image_rows(norm.gradient, norm.hessian, frame[None], rule, derivative)
    return BusemannForm(a, KCovector(a.n, a.k, _busemann_from_rows(rows, rule)[0]))


def ht_legendre(norm: MinkowskiNorm, a: SimpleKVector, nodes: Optional[int] = None) -> KCovector:
    """Legendre map of the Holmes-Thompson density, L(a) = phi(a) beta_a."""
    phi = ht_density(norm, a, nodes=nodes)
    return busemann_form(norm, a, nodes=nodes).value * phi


# ---------------------------------------------------------------------------
# Derivatives on the Grassmann cone
# ---------------------------------------------------------------------------

def _factor_step(a: SimpleKVector, step: Optional[float]) -> float:
    base = NUMERICS_CONFIG["fd_step_density"] if step is None else step
    return base * max(1.0, float(np.max(np.linalg.norm(a.factors, axis=1))))


def density_derivative(density: Callable[[SimpleKVector], float], a: SimpleKVector,
                       directions: np.ndarray, step: Optional[float] = None) -> float:
    """
    Central difference of t -> density(factors + t W) at t = 0.

    The derivative is the differential of the density applied to the
    Grassmann-cone tangent sum(tangent_terms(a, W)).
    """
    h = _factor_step(a, step)
    directions = np.asarray(directions, dtype=float)
    plus = density(SimpleKVector(a.factors + h * directions))
    minus = density(SimpleKVector(a.factors - h * directions))
    return (plus - minus) / (2.0 * h)


def ht_legendre_fd(norm: MinkowskiNorm, a: SimpleKVector, step: Optional[float] = None,
                   nodes: Optional[int] = None) -> KCovector:
    """
    d(phi^2/2)_a by finite differences, for k = n - 1.

    Every (n-1)-vector is simple, so the differential is a covector on all of
    Lambda^{n-1} R^n; it is recovered from its values on the n tangents
    obtained by replacing one factor by the unit normal, plus a itself.
    """
    if a.k != a.n - 1:
        raise DimensionMismatchError("the finite-difference Legendre map needs k = n - 1")
    normal = orthogonal_complement(a)[:, 0]
    density = KDensity(norm, a.k, nodes=nodes)
    phi = density(a)
    rows, values = [], []
    for j in range(a.k + 1):
        directions = np.zeros_like(a.factors)
        if j < a.k:
            directions[j] = normal
        else:
            directions[0] = a.factors[0]
        rows.append(sum(term.plucker() for term in tangent_terms(a, directions)))
        values.append(phi * density_derivative(density, a, directions, step))
    components = np.linalg.solve(np.array(rows), np.array(values))
    return KCovector(a.n, a.k, components)


@dataclass
class TangencyReport:
    """Legendre-axiom residuals of the Holmes-Thompson Legendre map at a."""
    phi: float
    euler_gap: float
    homogeneity_gap: float
    max_tangency_residual: float
    directions: int

    def to_dict(self) -> Dict:
        return {
            "phi": self.phi,
            "euler_gap": self.euler_gap,
            "homogeneity_gap": self.homogeneity_gap,
            "max_tangency_residual": self.max_tangency_residual,
            "directions": self.directions,
        }


def legendre_axioms_check(norm: MinkowskiNorm, a: SimpleKVector, directions: int = 20,
                          seed: int = 0, step: Optional[float] = None,
                          nodes: Optional[int] = None) -> TangencyReport:
    """
    Check L(ta) = tL(a), L(a)(a) = phi(a)^2 and L(a)(b) = 0 on T_a S_phi.

    A tangent to the level set of phi through a is b = adot - (dphi(adot)/phi(a)) a
    for a random cone tangent adot; L(a)(b) = phi(a) (beta_a(adot) - dphi(adot)).
    """
    rng = np.random.default_rng(seed)
    density = KDensity(norm, a.k, nodes=nodes)
    phi = density(a)
    legendre = ht_legendre(norm, a, nodes=nodes)
    euler_gap = abs(pair(legendre, a) - phi ** 2) / phi ** 2
    doubled = ht_legendre(norm, a.scaled(2.0), nodes=nodes)
    homogeneity_gap = float(np.max(np.abs(doubled.components - 2.0 * legendre.components))) / max(legendre.norm(), 1e-300)
    beta = busemann_form(norm, a, nodes=nodes)
    worst = 0.0
    for _ in range(directions):
        w = rng.standard_normal(a.factors.shape)
        derivative = density_derivative(density, a, w, step)
        residual = phi * abs(beta(tangent_terms(a, w)) - derivative)
        worst = max(worst, residual)
    logger.debug("Legendre axioms: euler %.3e, homogeneity %.3e, tangency %.3e", euler_gap, homogeneity_gap, worst)
    return TangencyReport(phi, euler_gap, homogeneity_gap, worst, directions)


def hilbert_vertical_residual(norm: MinkowskiNorm, a: SimpleKVector, directions: int = 10,
                              seed: int = 0, step: Optional[float] = None,
                              nodes: Optional[int] = None) -> float:
    """
    max over random cone tangents adot of |d/dt beta_{a + t adot}(a)| / phi(a).

    The Hilbert form does not see motions of the base point along the fiber,
    so this derivative vanishes at t = 0.
    """
    rng = np.random.default_rng(seed)
    h = _factor_step(a, step)
    phi = ht_density(norm, a, nodes=nodes, estimate_error=False)
    worst = 0.0
    for _ in range(directions):
        w = rng.standard_normal(a.factors.shape)
        plus = busemann_form(norm, SimpleKVector(a.factors + h * w), nodes=nodes)(a)
        minus = busemann_form(norm, SimpleKVector(a.factors - h * w), nodes=nodes)(a)
        worst = max(worst, abs(plus - minus) / (2.0 * h))
    return worst / phi


def projected_sigma_area(norm: MinkowskiNorm, a: SimpleKVector, b: SimpleKVector,
                         nodes: Optional[int] = None) -> float:
    """
    (1/eps_2) times the b-measured signed area enclosed by the projection of
    Sigma_a onto <b>*, for 2-vectors; equals beta_a(b).

    Computed with the shoelace formula on the projected node polygon.
    """
    if a.k != 2 or b.k != 2:
        raise DimensionMismatchError("projected areas are implemented for 2-vectors")
    frame, _ = _frame_of(a)
    rule = sphere_rule(2, nodes)
    p = norm.gradient(rule.points @ frame.T)
    q = p @ span_basis(b)
    shifted = np.roll(q, -1, axis=0)
    area = 0.5 * float(np.sum(q[:, 0] * shifted[:, 1] - q[:, 1] * shifted[:, 0]))
    return b.magnitude * area / unit_ball_volume(2)


# ---------------------------------------------------------------------------
# Local calibration
# ---------------------------------------------------------------------------

def sample_nearby_planes(a: SimpleKVector, radius: float, samples: int,
                         rng: np.random.Generator) -> List[SimpleKVector]:
    """
    Unit simple k-vectors whose planes lie within principal angle `radius` of <a>.

    b = Q exp(S) [I_k; 0] with Q = [E C] and S = [[0, -M^T], [M, 0]]; the
    principal angles of <b> against <a> are the singular values of M, whose
    spectral norm is drawn uniformly in (0, radius].
    """
    frame = span_basis(a)
    complement = orthogonal_complement(a)
    basis = np.hstack([frame, complement])
    k, n = a.k, a.n
    planes = []
    for _ in range(samples):
        m = rng.standard_normal((n - k, k))
        m *= radius * (1.0 - rng.random()) / max(np.linalg.norm(m, 2), 1e-300)
        s = np.zeros((n, n))
        s[k:, :k] = m
        s[:k, k:] = -m.T
        rotated = basis @ linalg.expm(s)
        planes.append(SimpleKVector(rotated[:, :k].T))
    return planes


@dataclass
class CalibrationReport:
    """Sampled check of beta_a(b) <= phi(b) near a."""
    radius: float
    samples: int
    tolerance: float
    base_gap: float
    max_violation: float
    argmax: int
    argmax_angles: List[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance and self.base_gap <= self.tolerance

    def to_dict(self) -> Dict:
        return {
            "radius": self.radius,
            "samples": self.samples,
            "tolerance": self.tolerance,
            "base_gap": self.base_gap,
            "max_violation": self.max_violation,
            "argmax": self.argmax,
            "argmax_angles": self.argmax_angles,
            "passed": self.passed,
        }


def local_calibration_check(norm: MinkowskiNorm, a: SimpleKVector, radius: float = 0.2,
                            samples: int = 200, seed: int = 0, tolerance: float = 1e-6,
                            nodes: Optional[int] = None) -> CalibrationReport:
    """
    Sample unit b near <a> and measure max(beta_a(b) - phi(b)).

    a is first rescaled so that phi(a) = 1; beta_a is invariant under that.
    """
    phi_a = ht_density(norm, a, nodes=nodes)
    unit = a.scaled(1.0 / phi_a)
    beta = busemann_form(norm, unit, nodes=nodes)
    base_gap = abs(beta(unit) - 1.0)
    rng = np.random.default_rng(seed)
    worst, argmax, angles = -np.inf, -1, []
    for i, b in enumerate(sample_nearby_planes(unit, radius, samples, rng)):
        violation = beta(b) - ht_density(norm, b, nodes=nodes, estimate_error=False)
        if violation > worst:
            worst, argmax = violation, i
            angles = principal_angles(unit, b).tolist()
    if worst > tolerance:
        logger.warning("calibration violated by %.3e at sample %d", worst, argmax)
    return CalibrationReport(radius, samples, tolerance, base_gap, float(worst), argmax, angles)


# ---------------------------------------------------------------------------
# Batched evaluation over chart points
# ---------------------------------------------------------------------------

def _chart_callables(chart, points: np.ndarray):
    x = points[:, None, :]

    def grad_fn(w):
        return chart.gradient_v(np.broadcast_to(x, w.shape), w)

    def hess_fn(w):
        return chart.hessian_v(np.broadcast_to(x, w.shape), w)

    def metric_fn(w):
        return chart.metric(np.broadcast_to(x, w.shape), w)

    return grad_fn, hess_fn, metric_fn


def density_field(chart, points: np.ndarray, frames: np.ndarray, kind: str = HOLMES_THOMPSON,
                  nodes: Optional[int] = None) -> np.ndarray:
    """
    Density of the chart at each point on the k-vector with the given factors.

    Args:
        chart: FinslerChart (metric, gradient_v, hessian_v)
        points: (m, n)
        frames: (m, k, n) factor stacks
        kind: HOLMES_THOMPSON or BUSEMANN_HAUSDORFF
        nodes: Sphere-rule resolution

    Returns:
        (m,) densities
    """
    points = np.asarray(points, dtype=float)
    frames = np.asarray(frames, dtype=float)
    k = frames.shape[1]
    bases, magnitudes = span_basis_batch(frames)
    rule = sphere_rule(k, nodes)
    grad_fn, hess_fn, metric_fn = _chart_callables(chart, points)
    eps = unit_ball_volume(k)
    if kind == HOLMES_THOMPSON:
        rows = legendre_image_rows(grad_fn, hess_fn, bases, rule)
        return magnitudes * _dual_volume_from_rows(rows, bases, rule) / eps
    if kind == BUSEMANN_HAUSDORFF:
        directions = np.einsum("mnk,qk->mqn", bases, rule.points)
        volume = np.einsum("mq,q->m", metric_fn(directions) ** (-k), np.abs(rule.area_weights)) / k
        return magnitudes * eps / volume
    raise UnknownOptionError(f"unknown density kind {kind!r}")


def busemann_form_field(chart, points: np.ndarray, frames: np.ndarray, nodes: Optional[int] = None,
                        derivative: str = "hessian") -> np.ndarray:
    """Busemann-form components (m, C(n, k)) of the chart at each point for each frame."""
    points = np.asarray(points, dtype=float)
    frames = np.asarray(frames, dtype=float)
    bases, _ = span_basis_batch(frames)
    rule = sphere_rule(frames.shape[1], nodes)
    grad_fn, hess_fn, _ = _chart_callables(chart, points)
    rows = legendre_image_rows(grad_fn, hess_fn, bases, rule, derivative)
    return _busemann_from_rows(rows, rule)
