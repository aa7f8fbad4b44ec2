"""
Immersed patches, their Holmes-Thompson volume, first variations and the
mean-curvature covector h, plus the fiber-integration identity relating the
Hilbert 2-form to the Hilbert 1-form.

Sign convention: h(u) > 0 when moving along u increases volume, so a unit
sphere has h = 2 <n_out, .> and a circle of radius R has h = (1/R) <n_out, .>.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from config.settings import NUMERICS_CONFIG, VARIATION_CONFIG
from .cubature import ball_rule, box_rule, periodic_trapezoid, richardson, unit_ball_volume
from .densities import BUSEMANN_HAUSDORFF, HOLMES_THOMPSON, busemann_form_field, density_field
from .exceptions import DimensionMismatchError, DomainError, ImmersionError, UnknownOptionError
from .exterior import SimpleKVector, span_basis_batch, wedge_components
from .finsler import FinslerChart, UnitBundlePoint, d_omega1, euler_lagrange_residual, hilbert_one_form

logger = logging.getLogger(__name__)

PatchMap = Callable[[np.ndarray], np.ndarray]


class ImmersedPatch:
    """
    Parametrized k-submanifold alpha: Q -> R^n over a box Q in R^k,
    oriented by the parameter order.

    Args:
        map_fn: q (..., k) -> points (..., n)
        lower, upper: Corners of Q
        jacobian_fn: q (..., k) -> (..., n, k); central differences if omitted
        name: Label used in reports
    """

    def __init__(self, map_fn: PatchMap, lower, upper, jacobian_fn: Optional[PatchMap] = None,
                 name: str = "patch"):
        self.map_fn = map_fn
        self.lower = np.atleast_1d(np.asarray(lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(upper, dtype=float))
        self.jacobian_fn = jacobian_fn
        self.name = name
        self.k = self.lower.shape[0]
        self.n = int(np.asarray(map_fn(0.5 * (self.lower + self.upper))).shape[-1])
        if self.k > self.n:
            raise DimensionMismatchError(f"a {self.k}-dimensional patch cannot live in R^{self.n}")

    def points(self, q) -> np.ndarray:
        return np.asarray(self.map_fn(np.asarray(q, dtype=float)), dtype=float)

    def jacobian(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self.jacobian_fn is not None:
            return np.asarray(self.jacobian_fn(q), dtype=float)
        h = VARIATION_CONFIG["jacobian_step"]
        columns = [(self.points(q + h * e) - self.points(q - h * e)) / (2.0 * h) for e in np.eye(self.k)]
        return np.stack(columns, axis=-1)

    def frames(self, q) -> np.ndarray:
        """Factor stacks (..., k, n) of the tangent k-vectors d_1 alpha ^ ... ^ d_k alpha."""
        return np.swapaxes(self.jacobian(q), -1, -2)

    def tangent_kvector(self, q) -> SimpleKVector:
        return SimpleKVector(self.frames(np.asarray(q, dtype=float)))

    def reparametrized(self, fn: PatchMap, jacobian: PatchMap, lower, upper,
                       name: Optional[str] = None) -> "ImmersedPatch":
        """alpha o psi for an orientation-preserving diffeomorphism psi of boxes."""
        def map_fn(q):
            return self.points(fn(q))

        def jacobian_fn(q):
            return np.einsum("...nk,...kj->...nj", self.jacobian(fn(q)), jacobian(q))

        return ImmersedPatch(map_fn, lower, upper, jacobian_fn, name or f"{self.name}-reparametrized")


def check_immersion(frames: np.ndarray, what: str = "patch") -> np.ndarray:
    """Euclidean magnitudes of the tangent k-vectors; raises ImmersionError on degeneracy."""
    gram = np.einsum("...ki,...li->...kl", frames, frames)
    magnitudes = np.sqrt(np.maximum(np.linalg.det(gram), 0.0))
    scale = np.maximum(1.0, np.prod(np.linalg.norm(frames, axis=-1), axis=-1))
    if np.any(magnitudes <= NUMERICS_CONFIG["zero_tolerance"] * scale):
        raise ImmersionError(f"{what} is not an immersion on its quadrature grid")
    return magnitudes


# ---------------------------------------------------------------------------
# Standard patches
# ---------------------------------------------------------------------------

def flat_patch(origin, axes, lower, upper, name: str = "flat") -> ImmersedPatch:
    """alpha(q) = origin + sum q_i axes_i."""
    origin = np.asarray(origin, dtype=float)
    axes = np.atleast_2d(np.asarray(axes, dtype=float))

    def map_fn(q):
        return origin + q @ axes

    def jacobian_fn(q):
        return np.broadcast_to(axes.T, np.shape(q)[:-1] + axes.T.shape)

    return ImmersedPatch(map_fn, lower, upper, jacobian_fn, name)


def sphere_octant(radius: float = 1.0) -> ImmersedPatch:
    """Spherical coordinates (theta, psi) in (0, pi/2)^2; outward orientation."""

    def map_fn(q):
        th, ps = q[..., 0], q[..., 1]
        return radius * np.stack([np.sin(th) * np.cos(ps), np.sin(th) * np.sin(ps), np.cos(th)], axis=-1)

    def jacobian_fn(q):
        th, ps = q[..., 0], q[..., 1]
        d_th = np.stack([np.cos(th) * np.cos(ps), np.cos(th) * np.sin(ps), -np.sin(th)], axis=-1)
        d_ps = np.stack([-np.sin(th) * np.sin(ps), np.sin(th) * np.cos(ps), np.zeros_like(th)], axis=-1)
        return radius * np.stack([d_th, d_ps], axis=-1)

    return ImmersedPatch(map_fn, [0.0, 0.0], [np.pi / 2, np.pi / 2], jacobian_fn, "sphere-octant")


def sphere_cap(radius: float = 1.0, half_width: float = 0.5) -> ImmersedPatch:
    """alpha(q) = R (q_1, q_2, 1) / sqrt(1 + |q|^2) over [-w, w]^2; outward orientation."""

    def map_fn(q):
        lifted = np.concatenate([q, np.ones(q.shape[:-1] + (1,))], axis=-1)
        return radius * lifted / np.linalg.norm(lifted, axis=-1, keepdims=True)

    def jacobian_fn(q):
        lifted = np.concatenate([q, np.ones(q.shape[:-1] + (1,))], axis=-1)
        r = np.linalg.norm(lifted, axis=-1)[..., None, None]
        eye = np.eye(3)[:, :2]
        outer = lifted[..., :, None] * q[..., None, :]
        return radius * (eye / r - outer / r ** 3)

    return ImmersedPatch(map_fn, [-half_width] * 2, [half_width] * 2, jacobian_fn, "sphere-cap")


def circle_arc(radius: float = 1.0, start: float = -0.5, stop: float = 0.5, dim: int = 3) -> ImmersedPatch:
    """alpha(t) = R (cos t, sin t, 0...), counterclockwise."""

    def map_fn(q):
        t = q[..., 0]
        out = np.zeros(t.shape + (dim,))
        out[..., 0], out[..., 1] = radius * np.cos(t), radius * np.sin(t)
        return out

    def jacobian_fn(q):
        t = q[..., 0]
        out = np.zeros(t.shape + (dim, 1))
        out[..., 0, 0], out[..., 1, 0] = -radius * np.sin(t), radius * np.cos(t)
        return out

    return ImmersedPatch(map_fn, [start], [stop], jacobian_fn, "circle-arc")


def graph_patch(height: float, curvature: float, lower, upper, name: str = "paraboloid") -> ImmersedPatch:
    """alpha(q) = (q_1, q_2, height + curvature |q|^2 / 2); curvature 0 gives an offset plane."""

    def map_fn(q):
        z = height + 0.5 * curvature * np.sum(q * q, axis=-1)
        return np.concatenate([q, z[..., None]], axis=-1)

    def jacobian_fn(q):
        top = np.broadcast_to(np.eye(2), q.shape[:-1] + (2, 2))
        return np.concatenate([top, curvature * q[..., None, :]], axis=-2)

    return ImmersedPatch(map_fn, lower, upper, jacobian_fn, name)


def bent_patch(patch: ImmersedPatch, bend: float, name: Optional[str] = None) -> ImmersedPatch:
    """
    alpha(q) + bend |q - c|^2 / 2 nu, with c the box center and nu a unit
    Euclidean normal of the patch at c. On a flat graph this is the
    paraboloid of curvature `bend`.
    """
    if patch.k >= patch.n:
        raise DimensionMismatchError(f"a {patch.k}-dimensional patch in R^{patch.n} has no normal to bend along")
    center = 0.5 * (patch.lower + patch.upper)
    left, _, _ = np.linalg.svd(patch.jacobian(center))
    normal = left[:, -1]

    def map_fn(q):
        offset = q - center
        return patch.points(q) + 0.5 * bend * np.sum(offset * offset, axis=-1)[..., None] * normal

    def jacobian_fn(q):
        return patch.jacobian(q) + bend * normal[:, None] * (q - center)[..., None, :]

    return ImmersedPatch(map_fn, patch.lower, patch.upper, jacobian_fn, name or f"{patch.name}-bent")


# ---------------------------------------------------------------------------
# Variation fields
# ---------------------------------------------------------------------------

BUMP_PROFILES = ("polynomial", "cosine")


def bump_profile(r: np.ndarray, profile: str) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    inside = r < 1.0
    if profile == "polynomial":
        return np.where(inside, (1.0 - np.minimum(r, 1.0) ** 2) ** 4, 0.0)
    if profile == "cosine":
        return np.where(inside, np.cos(0.5 * np.pi * np.minimum(r, 1.0)) ** 4, 0.0)
    raise UnknownOptionError(f"unknown bump profile {profile!r}")


def bump_derivative_over_r(r: np.ndarray, profile: str) -> np.ndarray:
    """b'(r) / r, finite at r = 0."""
    r = np.asarray(r, dtype=float)
    inside = r < 1.0
    rc = np.minimum(r, 1.0)
    if profile == "polynomial":
        return np.where(inside, -8.0 * (1.0 - rc ** 2) ** 3, 0.0)
    if profile == "cosine":
        half = 0.5 * np.pi * rc
        safe = np.where(rc > 1e-8, rc, 1.0)
        ratio = np.where(rc > 1e-8, -2.0 * np.pi * np.cos(half) ** 3 * np.sin(half) / safe, -np.pi ** 2)
        return np.where(inside, ratio, 0.0)
    raise UnknownOptionError(f"unknown bump profile {profile!r}")


@dataclass
class VariationField:
    """
    X(q) = bump(|q - c| / rho) (w0 + W1 (q - c) / rho), supported in the
    parameter disk of radius rho about c.
    """
    center: np.ndarray
    radius: float
    constant: np.ndarray
    linear: np.ndarray
    profile: str = "polynomial"

    def __post_init__(self):
        self.center = np.atleast_1d(np.asarray(self.center, dtype=float))
        self.constant = np.asarray(self.constant, dtype=float)
        self.linear = np.asarray(self.linear, dtype=float).reshape(self.constant.shape[0], self.center.shape[0])
        if self.profile not in BUMP_PROFILES:
            raise UnknownOptionError(f"unknown bump profile {self.profile!r}")

    @classmethod
    def localized(cls, center, radius: float, direction, profile: str = "polynomial") -> "VariationField":
        direction = np.asarray(direction, dtype=float)
        center = np.atleast_1d(np.asarray(center, dtype=float))
        return cls(center, radius, direction, np.zeros((direction.shape[0], center.shape[0])), profile)

    @classmethod
    def random(cls, rng: np.random.Generator, patch: ImmersedPatch, radius: float,
               profile: str = "polynomial") -> "VariationField":
        low, high = patch.lower + radius, patch.upper - radius
        center = low + (high - low) * rng.random(patch.k)
        return cls(center, radius, rng.standard_normal(patch.n),
                   0.5 * rng.standard_normal((patch.n, patch.k)), profile)

    def _scaled(self, q):
        s = (np.asarray(q, dtype=float) - self.center) / self.radius
        return s, np.linalg.norm(s, axis=-1)

    def value(self, q) -> np.ndarray:
        s, r = self._scaled(q)
        amplitude = self.constant + np.einsum("nk,...k->...n", self.linear, s)
        return bump_profile(r, self.profile)[..., None] * amplitude

    def jacobian(self, q) -> np.ndarray:
        """dX/dq, shape (..., n, k)."""
        s, r = self._scaled(q)
        amplitude = self.constant + np.einsum("nk,...k->...n", self.linear, s)
        grad_bump = bump_derivative_over_r(r, self.profile)[..., None] * s / self.radius
        return (amplitude[..., :, None] * grad_bump[..., None, :]
                + bump_profile(r, self.profile)[..., None, None] * self.linear / self.radius)

    def support_rule(self, n_radial: Optional[int] = None, n_angular: Optional[int] = None):
        """Quadrature nodes in Q over the support disk, Jacobian rho^k included."""
        n_radial = n_radial or VARIATION_CONFIG["radial_nodes"]
        n_angular = n_angular or VARIATION_CONFIG["angular_nodes"]
        nodes, weights = ball_rule(self.center.shape[0], n_radial, n_angular)
        return self.center + self.radius * nodes, weights * self.radius ** self.center.shape[0]

    def fits_inside(self, patch: ImmersedPatch) -> bool:
        return bool(np.all(self.center - self.radius >= patch.lower) and np.all(self.center + self.radius <= patch.upper))

    def to_dict(self) -> Dict:
        return {"center": self.center.tolist(), "radius": self.radius, "constant": self.constant.tolist(),
                "linear": self.linear.tolist(), "profile": self.profile}


# ---------------------------------------------------------------------------
# Volumes
# ---------------------------------------------------------------------------

@dataclass
class VolumeResult:
    value: float
    error_estimate: float
    grid: int
    kind: str

    def to_dict(self) -> Dict:
        return {"value": self.value, "error_estimate": self.error_estimate, "grid": self.grid, "kind": self.kind}


def _grid_volume(chart: FinslerChart, patch: ImmersedPatch, grid: int, kind: str, nodes: Optional[int]) -> float:
    q, w = box_rule(grid, patch.lower, patch.upper)
    frames = patch.frames(q)
    check_immersion(frames, patch.name)
    return float(np.dot(w, density_field(chart, patch.points(q), frames, kind, nodes)))


def ht_volume(chart: FinslerChart, patch: ImmersedPatch, grid: Optional[int] = None, coarse_grid: Optional[int] = None,
              kind: str = HOLMES_THOMPSON, nodes: Optional[int] = None) -> VolumeResult:
    """Tensor Gauss-Legendre quadrature of phi(alpha(q), d alpha) over Q, with a grid-refinement estimate."""
    grid = grid or VARIATION_CONFIG["grid"]
    coarse_grid = coarse_grid or VARIATION_CONFIG["coarse_grid"]
    value = _grid_volume(chart, patch, grid, kind, nodes)
    coarse = _grid_volume(chart, patch, coarse_grid, kind, nodes)
    logger.debug("%s volume of %s: %.15g (coarse %.15g)", kind, patch.name, value, coarse)
    return VolumeResult(value, abs(value - coarse), grid, kind)


def lifted_volume(chart: FinslerChart, patch: ImmersedPatch, grid: Optional[int] = None,
                  nodes: Optional[int] = None) -> float:
    """Integral over the tangent lift of the Hilbert k-form: the quadrature of beta_a(a)."""
    grid = grid or VARIATION_CONFIG["grid"]
    q, w = box_rule(grid, patch.lower, patch.upper)
    frames = patch.frames(q)
    check_immersion(frames, patch.name)
    beta = busemann_form_field(chart, patch.points(q), frames, nodes)
    phi = density_field(chart, patch.points(q), frames, HOLMES_THOMPSON, nodes)
    values = np.einsum("mc,mc->m", beta, wedge_components(frames)) * phi
    # Theta_k at the unit k-vector a / phi(a) is beta_a, so int Theta = int beta_a(a)
    return float(np.dot(w, values / phi))


def _support_volume(chart, patch, field_, s, nodes_q, weights, kind, nodes) -> float:
    points = patch.points(nodes_q) + s * field_.value(nodes_q)
    frames = np.swapaxes(patch.jacobian(nodes_q) + s * field_.jacobian(nodes_q), -1, -2)
    check_immersion(frames, f"{patch.name} (deformed)")
    return float(np.dot(weights, density_field(chart, points, frames, kind, nodes)))


@dataclass
class FirstVariation:
    """d/ds Vol(alpha + s X) at s = 0 with its Richardson diagnostics."""
    value: float
    coarse: float
    fine: float
    s_step: float
    flagged: bool
    x_norm: float
    kind: str = HOLMES_THOMPSON

    @property
    def ratio(self) -> float:
        return abs(self.value) / self.x_norm if self.x_norm > 0 else 0.0

    def to_dict(self) -> Dict:
        return {"value": self.value, "coarse": self.coarse, "fine": self.fine, "s_step": self.s_step,
                "flagged": self.flagged, "x_norm": self.x_norm, "ratio": self.ratio, "kind": self.kind}


def variation_norm(patch: ImmersedPatch, field_: VariationField, n_radial: Optional[int] = None,
                   n_angular: Optional[int] = None) -> float:
    """||X|| = int |X| dA with the Euclidean area element of the patch."""
    q, w = field_.support_rule(n_radial, n_angular)
    magnitudes = check_immersion(patch.frames(q), patch.name)
    return float(np.dot(w, np.linalg.norm(field_.value(q), axis=-1) * magnitudes))


def first_variation(chart: FinslerChart, patch: ImmersedPatch, field_: VariationField, s_step: Optional[float] = None,
                    kind: str = HOLMES_THOMPSON, nodes: Optional[int] = None, n_radial: Optional[int] = None,
                    n_angular: Optional[int] = None, tolerance: Optional[float] = None) -> FirstVariation:
    """
    Central difference (Vol(s) - Vol(-s)) / 2s at steps s and s/2, combined by
    Richardson extrapolation; only the support of X contributes.
    """
    s_step = s_step or VARIATION_CONFIG["s_step"]
    tolerance = VARIATION_CONFIG["richardson_tolerance"] if tolerance is None else tolerance
    if field_.center.shape[0] != patch.k or field_.constant.shape[0] != patch.n:
        raise DimensionMismatchError("variation field does not match the patch")
    if not field_.fits_inside(patch):
        raise DomainError("variation field support leaves the parameter box")
    q, w = field_.support_rule(n_radial, n_angular)

    def central(s):
        return (_support_volume(chart, patch, field_, s, q, w, kind, nodes)
                - _support_volume(chart, patch, field_, -s, q, w, kind, nodes)) / (2.0 * s)

    coarse, fine = central(s_step), central(0.5 * s_step)
    value = richardson(coarse, fine, 2)
    flagged = abs(value - fine) > tolerance * max(1.0, abs(value))
    if flagged:
        logger.warning("first variation Richardson disagreement %.3e", abs(value - fine))
    x_norm = variation_norm(patch, field_, n_radial, n_angular)
    return FirstVariation(value, coarse, fine, s_step, flagged, x_norm, kind)


def hausdorff_comparison(chart: FinslerChart, patch: ImmersedPatch, field_: VariationField,
                         s_step: Optional[float] = None, nodes: Optional[int] = None) -> Dict[str, float]:
    """First variations of the Holmes-Thompson and Busemann-Hausdorff volumes for the same X."""
    ht = first_variation(chart, patch, field_, s_step, HOLMES_THOMPSON, nodes)
    bh = first_variation(chart, patch, field_, s_step, BUSEMANN_HAUSDORFF, nodes)
    return {"holmes_thompson": ht.value, "busemann_hausdorff": bh.value, "x_norm": ht.x_norm}


# ---------------------------------------------------------------------------
# Mean curvature covector
# ---------------------------------------------------------------------------

@dataclass
class CurvatureCovector:
    """h at alpha(q0) as a covector on R^n."""
    point: np.ndarray
    q0: np.ndarray
    covector: np.ndarray
    tangent_defect: float
    radius: float
    method: str = "variation"

    def __call__(self, u) -> float:
        return float(self.covector @ np.asarray(u, dtype=float))

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.covector))

    def to_dict(self) -> Dict:
        return {"point": self.point.tolist(), "q0": self.q0.tolist(), "covector": self.covector.tolist(),
                "magnitude": self.magnitude, "tangent_defect": self.tangent_defect, "radius": self.radius,
                "method": self.method}


def _tangent_defect(patch: ImmersedPatch, q0: np.ndarray, h: np.ndarray) -> float:
    J = patch.jacobian(q0)
    columns = J / np.linalg.norm(J, axis=0, keepdims=True)
    return float(np.max(np.abs(h @ columns))) if columns.size else 0.0


def _covector_at_radius(chart, patch, q0, radius, profile, s_step, nodes, kind) -> np.ndarray:
    bump = VariationField.localized(q0, radius, np.zeros(patch.n), profile)
    q, w = bump.support_rule()
    weight = bump_profile(np.linalg.norm((q - q0) / radius, axis=-1), profile)
    normalization = float(np.dot(w, weight * density_field(chart, patch.points(q), patch.frames(q), kind, nodes)))
    h = np.empty(patch.n)
    for j, e in enumerate(np.eye(patch.n)):
        field_ = VariationField.localized(q0, radius, e, profile)
        h[j] = first_variation(chart, patch, field_, s_step, kind, nodes).value / normalization
    return h


def mean_curvature_covector(chart: FinslerChart, patch: ImmersedPatch, q0, radius: Optional[float] = None,
                            profile: Optional[str] = None, s_step: Optional[float] = None, extrapolate: bool = False,
                            nodes: Optional[int] = None, kind: str = HOLMES_THOMPSON) -> CurvatureCovector:
    """
    h_j = delta Vol(bump e_j) / int bump phi, the bump centred at q0.

    With extrapolate=True the radius-rho and radius-rho/2 values are
    combined to cancel the O(rho^2) averaging bias.
    """
    q0 = np.atleast_1d(np.asarray(q0, dtype=float))
    radius = radius or VARIATION_CONFIG["bump_radius"]
    profile = profile or VARIATION_CONFIG["bump_profile"]
    h = _covector_at_radius(chart, patch, q0, radius, profile, s_step, nodes, kind)
    if extrapolate:
        h = richardson(h, _covector_at_radius(chart, patch, q0, 0.5 * radius, profile, s_step, nodes, kind), 2)
    return CurvatureCovector(patch.points(q0), q0, h, _tangent_defect(patch, q0, h), radius)


def mean_curvature_theta(chart: FinslerChart, patch: ImmersedPatch, q0, step: Optional[float] = None,
                         nodes: Optional[int] = None) -> CurvatureCovector:
    """
    h(u) = d eta(u, a_1, ..., a_k) / phi(a) with eta(y) = beta_{sigma(y)} and
    sigma(y) the tangent plane at q0 + J^+ (y - alpha(q0)).

    d eta uses central differences along constant vector fields:
    d eta(v_0, ..., v_k) = sum_i (-1)^i D_{v_i} eta(v_0, ..., v_i omitted, ..., v_k).
    """
    q0 = np.atleast_1d(np.asarray(q0, dtype=float))
    h = NUMERICS_CONFIG["fd_step_x"] * 10 if step is None else step
    x0 = patch.points(q0)
    J0 = patch.jacobian(q0)
    pinv = np.linalg.pinv(J0)
    tangents = J0.T
    directions = np.vstack([np.eye(patch.n), tangents])
    stencil = np.concatenate([x0 + h * directions, x0 - h * directions], axis=0)
    frames = patch.frames(q0 + (stencil - x0) @ pinv.T)
    eta = busemann_form_field(chart, stencil, frames, nodes)
    count = directions.shape[0]
    derivative = (eta[:count] - eta[count:]) / (2.0 * h)
    phi = float(density_field(chart, x0[None], J0.T[None], HOLMES_THOMPSON, nodes)[0])

    def d_eta(vectors: np.ndarray, derivative_rows: List[int]) -> float:
        total = 0.0
        for i, row in enumerate(derivative_rows):
            rest = np.delete(vectors, i, axis=0)
            total += (-1) ** i * float(derivative[row] @ wedge_components(rest))
        return total

    tangent_rows = list(range(patch.n, patch.n + patch.k))
    covector = np.empty(patch.n)
    for j in range(patch.n):
        vectors = np.vstack([np.eye(patch.n)[j], tangents])
        covector[j] = d_eta(vectors, [j] + tangent_rows) / phi
    return CurvatureCovector(x0, q0, covector, _tangent_defect(patch, q0, covector), 0.0, "theta")


def curve_residual_covector(chart: FinslerChart, patch: ImmersedPatch, t0: float) -> np.ndarray:
    """-R / F(c') for a curve patch, R the Euler-Lagrange residual; equals h for reversible F."""
    if patch.k != 1:
        raise DimensionMismatchError("residual covectors are defined for curves")
    t = np.array([float(t0)])
    step = VARIATION_CONFIG["jacobian_step"] * 100
    velocity = patch.jacobian(t)[:, 0]
    acceleration = (patch.jacobian(t + step)[:, 0] - patch.jacobian(t - step)[:, 0]) / (2.0 * step)
    residual = euler_lagrange_residual(chart, patch.points(t), velocity, acceleration)
    return -residual / float(chart.metric(patch.points(t), velocity))


# ---------------------------------------------------------------------------
# Fiber integration
# ---------------------------------------------------------------------------

Section = Callable[[np.ndarray], np.ndarray]


def constant_section(frame) -> Section:
    """sigma(y) = the fixed 2-vector with the given factors."""
    frame = np.asarray(frame, dtype=float)

    def section(y):
        return np.broadcast_to(frame, np.shape(y)[:-1] + frame.shape)

    return section


def rotating_section(rate: float) -> Section:
    """sigma(y) = e_1' ^ e_2 with e_1' = cos(rate y_3) e_1 + sin(rate y_3) e_3, n = 3."""

    def section(y):
        y = np.asarray(y, dtype=float)
        angle = rate * y[..., 2]
        first = np.stack([np.cos(angle), np.zeros_like(angle), np.sin(angle)], axis=-1)
        second = np.broadcast_to(np.array([0.0, 1.0, 0.0]), first.shape)
        return np.stack([first, second], axis=-2)

    return section


@dataclass
class FiberIdentityReport:
    lhs: float
    rhs: float
    constant: float

    @property
    def gap(self) -> float:
        return abs(self.lhs - self.rhs) / max(abs(self.lhs), 1e-12)

    def to_dict(self) -> Dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "constant": self.constant, "gap": self.gap}


def fiber_identity_check(chart: FinslerChart, section: Section, x, test_vector: SimpleKVector,
                         nodes: int = 64, method: str = "analytic",
                         nodes_lhs: Optional[int] = None) -> FiberIdentityReport:
    """
    Compare (sigma* Theta_2)(b) = beta_{sigma(x)}(b) with
    -(1 / (2! eps_2)) int over the fiber of (omega_1 ^ d omega_1)(b1~, b2~, d_theta),
    the fiber {unit v in <sigma(x)>} oriented by the frame of sigma(x) and
    b_i~ the lifts of the factors of b through y -> fiber of sigma(y).
    """
    x = np.asarray(x, dtype=float)
    k = test_vector.k
    if k != 2 or chart.dim != 3:
        raise DimensionMismatchError("the fiber identity check is implemented for k = 2 in R^3")
    lhs = float(busemann_form_field(chart, x[None], section(x[None]), nodes_lhs)[0] @ test_vector.plucker())

    theta, weights = periodic_trapezoid(nodes)
    h_theta = NUMERICS_CONFIG["fd_step_theta"]
    h_x = NUMERICS_CONFIG["fd_step_x"]

    def fiber_vectors(y: np.ndarray, angles_offset: float = 0.0) -> np.ndarray:
        bases, _ = span_basis_batch(section(y[None]))
        c = np.stack([np.cos(theta + angles_offset), np.sin(theta + angles_offset)], axis=-1)
        u = c @ bases[0].T
        return u / chart.metric(np.broadcast_to(y, u.shape), u)[:, None]

    v = fiber_vectors(x)
    dv_dtheta = (fiber_vectors(x, h_theta) - fiber_vectors(x, -h_theta)) / (2.0 * h_theta)
    lifts = []
    for b in test_vector.factors:
        dv = (fiber_vectors(x + h_x * b) - fiber_vectors(x - h_x * b)) / (2.0 * h_x)
        lifts.append(np.concatenate([np.broadcast_to(b, dv.shape), dv], axis=-1))

    total = 0.0
    for i in range(nodes):
        point = UnitBundlePoint(x, v[i])
        omega = hilbert_one_form(chart, point)
        b1, b2 = lifts[0][i], lifts[1][i]
        vertical = np.concatenate([np.zeros(3), dv_dtheta[i]])
        integrand = (omega @ b1 * d_omega1(chart, point, b2, vertical, method)
                     - omega @ b2 * d_omega1(chart, point, b1, vertical, method)
                     + omega @ vertical * d_omega1(chart, point, b1, b2, method))
        total += weights[i] * integrand
    constant = (-1.0) ** (k * (k + 1) // 2) / (2.0 * unit_ball_volume(k))
    return FiberIdentityReport(lhs, constant * total, constant)


# ---------------------------------------------------------------------------
# Main theorem experiment
# ---------------------------------------------------------------------------

@dataclass
class MinimalityReport:
    """First variations of a totally geodesic patch, with a bent control patch."""
    ratios: List[float]
    h_magnitudes: List[float]
    bent_ratios: List[float]
    tolerance: float
    h_tolerance: float
    bent_threshold: float
    flagged: int = 0
    trials: int = 0
    fields: List[Dict] = field(default_factory=list)

    @property
    def max_ratio(self) -> float:
        return max(self.ratios) if self.ratios else 0.0

    @property
    def max_h(self) -> float:
        return max(self.h_magnitudes) if self.h_magnitudes else 0.0

    @property
    def max_bent_ratio(self) -> float:
        return max(self.bent_ratios) if self.bent_ratios else float("nan")

    @property
    def discrimination_checked(self) -> bool:
        return bool(self.bent_ratios)

    @property
    def passed(self) -> bool:
        discriminates = not self.discrimination_checked or self.max_bent_ratio > self.bent_threshold
        return self.max_ratio <= self.tolerance and self.max_h <= self.h_tolerance and discriminates

    def to_dict(self) -> Dict:
        return {"trials": self.trials, "ratios": self.ratios, "max_first_variation": self.max_ratio,
                "h_norms": self.h_magnitudes, "max_h": self.max_h, "bent_ratios": self.bent_ratios,
                "max_bent_ratio": self.max_bent_ratio if self.bent_ratios else None,
                "discrimination_checked": self.discrimination_checked,
                "thresholds": {"tolerance": self.tolerance, "h_tolerance": self.h_tolerance,
                               "bent_threshold": self.bent_threshold},
                "flagged": self.flagged, "pass": self.passed}


def totally_geodesic_minimality_experiment(chart: FinslerChart, patch: ImmersedPatch, trials: int, seed: int,
                                           bent_patch: Optional[ImmersedPatch] = None, radius: Optional[float] = None,
                                           tolerance: float = 1e-4, h_tolerance: float = 1e-4,
                                           bent_threshold: float = 1e-2, h_points: Optional[np.ndarray] = None,
                                           nodes: Optional[int] = None) -> MinimalityReport:
    """
    |delta Vol| / ||X|| over random compactly supported X on a totally
    geodesic patch, h at interior points, and the same variations on a bent
    patch, which must exceed `bent_threshold` somewhere.
    """
    radius = radius or VARIATION_CONFIG["bump_radius"]
    rng = np.random.default_rng(seed)
    report = MinimalityReport([], [], [], tolerance, h_tolerance, bent_threshold, trials=trials)
    for trial in range(trials):
        field_ = VariationField.random(rng, patch, radius)
        result = first_variation(chart, patch, field_, nodes=nodes)
        report.ratios.append(result.ratio)
        report.flagged += int(result.flagged)
        report.fields.append(field_.to_dict())
        logger.debug("trial %d: |dVol|/|X| = %.3e", trial, result.ratio)
        if bent_patch is not None:
            report.bent_ratios.append(first_variation(chart, bent_patch, field_, nodes=nodes).ratio)
    if bent_patch is None:
        logger.warning("no bent control patch; minimality is not checked against a non-minimal surface")
    if h_points is None:
        h_points = np.array([0.5 * (patch.lower + patch.upper)])
    for q0 in np.atleast_2d(h_points):
        report.h_magnitudes.append(mean_curvature_covector(chart, patch, q0, radius, nodes=nodes).magnitude)
    logger.info("minimality: max ratio %.3e, max |h| %.3e, bent %.3e",
                report.max_ratio, report.max_h, report.max_bent_ratio)
    return report
