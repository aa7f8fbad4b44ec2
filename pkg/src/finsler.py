"""
Finsler metrics on coordinate boxes: geodesic flow on the unit tangent
bundle, the Hilbert 1-form omega_1 and its exterior derivative.

Charts are batched like norms: x and v of shape (..., n) broadcast together.
The unit bundle is charted as (x, v) in R^{2n}; tangent vectors to it are
2n-vectors (X_x, X_v).
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg

from config.settings import NUMERICS_CONFIG
from .exceptions import DimensionMismatchError, GeodesicSolveError, InvalidNormError, UnknownOptionError
from .norms import MinkowskiNorm, _as_vectors

logger = logging.getLogger(__name__)

Field = Callable[[np.ndarray], np.ndarray]


class FinslerChart(ABC):
    """
    Field of Minkowski norms F(x, .) over an open box in R^n.

    Subclasses implement F and its v-derivatives; x-derivatives default to
    central differences with step fd_step_x * (1 + |x|).
    """

    kind = "abstract"

    def __init__(self, dim: int, lower: Optional[Sequence[float]] = None,
                 upper: Optional[Sequence[float]] = None):
        self.dim = dim
        self.lower = np.full(dim, -np.inf) if lower is None else np.asarray(lower, dtype=float)
        self.upper = np.full(dim, np.inf) if upper is None else np.asarray(upper, dtype=float)

    @abstractmethod
    def metric(self, x, v) -> np.ndarray:
        """F(x, v)."""

    @abstractmethod
    def gradient_v(self, x, v) -> np.ndarray:
        """d_v F."""

    @abstractmethod
    def hessian_v(self, x, v) -> np.ndarray:
        """D^2_v F."""

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x > self.lower) & (x < self.upper), axis=-1)

    def _x_step(self, x: np.ndarray) -> np.ndarray:
        return NUMERICS_CONFIG["fd_step_x"] * (1.0 + np.linalg.norm(x, axis=-1))

    def gradient_x(self, x, v) -> np.ndarray:
        """d_x F by central differences."""
        x, v = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
        h = self._x_step(x)[..., None]
        columns = []
        for e in np.eye(self.dim):
            columns.append((self.metric(x + h * e, v) - self.metric(x - h * e, v)) / (2.0 * h[..., 0]))
        return np.stack(columns, axis=-1)

    def mixed(self, x, v) -> np.ndarray:
        """d_x d_v F as a matrix [i, j] = d^2 F / dv_i dx_j, by central differences."""
        x, v = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
        h = self._x_step(x)[..., None]
        columns = []
        for e in np.eye(self.dim):
            columns.append((self.gradient_v(x + h * e, v) - self.gradient_v(x - h * e, v)) / (2.0 * h))
        return np.stack(columns, axis=-1)

    def fundamental_tensor(self, x, v) -> np.ndarray:
        """g_v = F D^2_v F + d_vF d_vF^T."""
        f = self.metric(x, v)[..., None, None]
        grad = self.gradient_v(x, v)
        return f * self.hessian_v(x, v) + grad[..., :, None] * grad[..., None, :]

    def legendre(self, x, v) -> np.ndarray:
        """L^1_x(v) = d_v(F^2/2)."""
        return self.metric(x, v)[..., None] * self.gradient_v(x, v)

    def lagrangian_x(self, x, v) -> np.ndarray:
        """d_x(F^2/2)."""
        return self.metric(x, v)[..., None] * self.gradient_x(x, v)

    def lagrangian_mixed(self, x, v) -> np.ndarray:
        """d_x d_v(F^2/2), [i, j] = d^2 L / dv_i dx_j."""
        return (self.gradient_v(x, v)[..., :, None] * self.gradient_x(x, v)[..., None, :]
                + self.metric(x, v)[..., None, None] * self.mixed(x, v))

    def norm_at(self, x) -> "ChartNorm":
        return ChartNorm(self, x)

    def describe(self) -> Dict:
        return {"kind": self.kind, "dim": self.dim}


class ChartNorm(MinkowskiNorm):
    """The Minkowski norm F(x, .) of a chart at a frozen point x."""

    def __init__(self, chart: FinslerChart, x):
        self.chart = chart
        self.x = np.asarray(x, dtype=float)
        super().__init__(chart.dim)

    def _point(self, v):
        v = _as_vectors(v, self.dim)
        return np.broadcast_to(self.x, v.shape), v

    def evaluate(self, v) -> np.ndarray:
        return self.chart.metric(*self._point(v))

    def gradient(self, v) -> np.ndarray:
        return self.chart.gradient_v(*self._point(v))

    def hessian(self, v) -> np.ndarray:
        return self.chart.hessian_v(*self._point(v))


class MinkowskiChart(FinslerChart):
    """x-independent chart carrying a single norm (Euclidean, constant Randers, ...)."""

    kind = "minkowski"

    def __init__(self, norm: MinkowskiNorm, lower=None, upper=None):
        super().__init__(norm.dim, lower, upper)
        self.norm = norm

    def metric(self, x, v) -> np.ndarray:
        x, v = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
        return self.norm.evaluate(v)

    def gradient_v(self, x, v) -> np.ndarray:
        x, v = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
        return self.norm.gradient(v)

    def hessian_v(self, x, v) -> np.ndarray:
        x, v = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
        return self.norm.hessian(v)

    def gradient_x(self, x, v) -> np.ndarray:
        x, v = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
        return np.zeros_like(v)

    def mixed(self, x, v) -> np.ndarray:
        x, v = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
        return np.zeros(v.shape + (self.dim,))

    def describe(self) -> Dict:
        return {"kind": self.kind, "norm": self.norm.describe()}


class RandersChart(FinslerChart):
    """
    F(x, v) = sqrt(v^T g(x) v) + <b(x), v> with |b(x)|_{g(x)^{-1}} < 1.

    A Riemannian chart is the case b = 0.
    """

    kind = "randers"

    def __init__(self, metric_field: Field, drift_field: Optional[Field], dim: int,
                 lower=None, upper=None, name: str = "randers"):
        super().__init__(dim, lower, upper)
        self.metric_field = metric_field
        self.drift_field = drift_field
        self.name = name

    def _fields(self, x, v):
        x, v = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
        g = self.metric_field(x)
        gv = np.einsum("...ij,...j->...i", g, v)
        alpha = np.sqrt(np.maximum(np.einsum("...i,...i->...", v, gv), 0.0))
        b = np.zeros_like(v) if self.drift_field is None else self.drift_field(x)
        return g, gv, alpha, b, v

    def drift_norm(self, x) -> np.ndarray:
        """|b(x)|_{g(x)^{-1}}."""
        if self.drift_field is None:
            return np.zeros(np.shape(x)[:-1])
        x = np.asarray(x, dtype=float)
        b = self.drift_field(x)
        return np.sqrt(np.einsum("...i,...i->...", b, np.linalg.solve(self.metric_field(x), b[..., None])[..., 0]))

    def validate(self, points) -> None:
        """Reject drift fields that leave the Randers cone at the sample points."""
        worst = float(np.max(self.drift_norm(points)))
        if worst >= 1.0:
            raise InvalidNormError(f"Randers drift reaches |b|_(g^-1) = {worst:.6g} >= 1")

    def metric(self, x, v) -> np.ndarray:
        _, _, alpha, b, v = self._fields(x, v)
        return alpha + np.einsum("...i,...i->...", b, v)

    def gradient_v(self, x, v) -> np.ndarray:
        _, gv, alpha, b, _ = self._fields(x, v)
        return gv / alpha[..., None] + b

    def hessian_v(self, x, v) -> np.ndarray:
        g, gv, alpha, _, _ = self._fields(x, v)
        alpha = alpha[..., None, None]
        return g / alpha - gv[..., :, None] * gv[..., None, :] / alpha ** 3

    def describe(self) -> Dict:
        return {"kind": self.kind, "name": self.name}


class RiemannianChart(RandersChart):
    kind = "riemannian"

    def __init__(self, metric_field: Field, dim: int, lower=None, upper=None, name: str = "riemannian"):
        super().__init__(metric_field, None, dim, lower, upper, name)


def stereographic_sphere_metric(x: np.ndarray) -> np.ndarray:
    """Round unit sphere in stereographic coordinates, g = 4 (1 + |x|^2)^-2 I."""
    x = np.asarray(x, dtype=float)
    factor = 4.0 / (1.0 + np.einsum("...i,...i->...", x, x)) ** 2
    return factor[..., None, None] * np.eye(x.shape[-1])


def conformal_bump_metric(amplitude: float, width: float, center: Sequence[float]) -> Field:
    """g = (1 + amplitude exp(-|x - c|^2 / width^2))^2 I."""
    center = np.asarray(center, dtype=float)

    def field(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r2 = np.sum((x - center) ** 2, axis=-1)
        factor = (1.0 + amplitude * np.exp(-r2 / width ** 2)) ** 2
        return factor[..., None, None] * np.eye(x.shape[-1])

    return field


def constant_metric(A) -> Field:
    A = np.asarray(A, dtype=float)

    def field(x: np.ndarray) -> np.ndarray:
        return np.broadcast_to(A, np.shape(x)[:-1] + A.shape)

    return field


def constant_drift(b) -> Field:
    b = np.asarray(b, dtype=float)

    def field(x: np.ndarray) -> np.ndarray:
        return np.broadcast_to(b, np.shape(x))

    return field


def rotational_drift(strength: float) -> Field:
    """b(x) = strength (-x_2, x_1, 0, ...) / (1 + |x|^2); not closed, so geodesics feel it."""

    def field(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        b = np.zeros_like(x)
        b[..., 0] = -x[..., 1]
        b[..., 1] = x[..., 0]
        return strength * b / (1.0 + np.sum(x * x, axis=-1))[..., None]

    return field


# ---------------------------------------------------------------------------
# Geodesics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UnitBundlePoint:
    """(x, v) with F(x, v) = 1."""
    x: np.ndarray
    v: np.ndarray

    @classmethod
    def normalized(cls, chart: FinslerChart, x, v) -> "UnitBundlePoint":
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        if x.shape != (chart.dim,) or v.shape != (chart.dim,):
            raise DimensionMismatchError("unit bundle points need x and v in R^n")
        speed = float(chart.metric(x, v))
        if speed <= 0.0:
            raise InvalidNormError("cannot normalize a zero vector onto the unit bundle")
        return cls(x, v / speed)

    @property
    def state(self) -> np.ndarray:
        return np.concatenate([self.x, self.v])


def spray(chart: FinslerChart, x, v, max_condition: Optional[float] = None) -> np.ndarray:
    """
    Geodesic acceleration g_v^{-1} (d_x L - M v), L = F^2/2, M = d_x d_v L.

    Raises:
        GeodesicSolveError: if g_v is ill-conditioned or not positive definite
    """
    max_condition = max_condition or NUMERICS_CONFIG["max_condition_number"]
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    g = chart.fundamental_tensor(x, v)
    rhs = chart.lagrangian_x(x, v) - np.einsum("...ij,...j->...i", chart.lagrangian_mixed(x, v), v)
    flat_g = g.reshape(-1, chart.dim, chart.dim)
    flat_rhs = rhs.reshape(-1, chart.dim)
    out = np.empty_like(flat_rhs)
    for i, (gi, ri) in enumerate(zip(flat_g, flat_rhs)):
        condition = float(np.linalg.cond(gi))
        if not np.isfinite(condition) or condition > max_condition:
            raise GeodesicSolveError("fundamental tensor is ill-conditioned", condition)
        try:
            out[i] = linalg.cho_solve(linalg.cho_factor(gi), ri)
        except linalg.LinAlgError as exc:
            raise GeodesicSolveError("fundamental tensor is not positive definite", condition) from exc
    return out.reshape(rhs.shape)


@dataclass
class GeodesicTrajectory:
    """
    Sampled unit-speed geodesic.

    Attributes:
        times: (N,) sample times
        positions: (N, n)
        velocities: (N, n)
        truncated: True if the trajectory left the chart domain before T
    """
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    truncated: bool = False
    speed_errors: Optional[np.ndarray] = field(default=None)

    @property
    def max_speed_error(self) -> float:
        return float(np.max(self.speed_errors)) if self.speed_errors is not None and len(self.speed_errors) else 0.0

    def to_frame(self) -> pd.DataFrame:
        """Columns t, x0..x{n-1}, v0..v{n-1}, speed_error."""
        n = self.positions.shape[1]
        data = {"t": self.times}
        for i in range(n):
            data[f"x{i}"] = self.positions[:, i]
        for i in range(n):
            data[f"v{i}"] = self.velocities[:, i]
        data["speed_error"] = self.speed_errors
        return pd.DataFrame(data)

    def to_dict(self) -> Dict:
        return {
            "steps": int(len(self.times) - 1),
            "final_time": float(self.times[-1]),
            "final_position": self.positions[-1].tolist(),
            "final_velocity": self.velocities[-1].tolist(),
            "truncated": self.truncated,
            "max_speed_error": self.max_speed_error,
        }


def geodesic(chart: FinslerChart, x0, v0, T: float, steps: int) -> GeodesicTrajectory:
    """
    RK4 integration of the geodesic equations from (x0, v0), F(x0, v0) = 1.

    The velocity is projected back to the unit sphere F(x, .) = 1 after each
    step. Leaving the chart domain ends the trajectory with truncated=True.
    """
    start = UnitBundlePoint.normalized(chart, x0, v0)
    if abs(float(chart.metric(np.asarray(x0, float), np.asarray(v0, float))) - 1.0) > 1e-8:
        logger.warning("initial velocity had F != 1; normalized")
    dt = T / steps
    x, v = start.x.copy(), start.v.copy()
    times, positions, velocities, errors = [0.0], [x.copy()], [v.copy()], [0.0]
    truncated = False

    def rhs(state_x, state_v):
        return state_v, spray(chart, state_x, state_v)

    for step in range(1, steps + 1):
        k1x, k1v = rhs(x, v)
        k2x, k2v = rhs(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
        k3x, k3v = rhs(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
        k4x, k4v = rhs(x + dt * k3x, v + dt * k3v)
        x_new = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        v_new = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if not bool(chart.contains(x_new)):
            truncated = True
            logger.warning("geodesic left the chart domain at t=%.6g", step * dt)
            break
        speed = float(chart.metric(x_new, v_new))
        errors.append(abs(speed - 1.0))
        x, v = x_new, v_new / speed
        times.append(step * dt)
        positions.append(x.copy())
        velocities.append(v.copy())
    return GeodesicTrajectory(np.array(times), np.array(positions), np.array(velocities),
                              truncated, np.array(errors))


def reversal_gap(chart: FinslerChart, x0, v0, T: float, steps: int) -> float:
    """
    Max distance between the forward geodesic from (x0, v0) and the geodesic
    shot back from its endpoint with the reversed (renormalized) velocity,
    compared at matching step indices.
    """
    forward = geodesic(chart, x0, v0, T, steps)
    backward = geodesic(chart, forward.positions[-1], -forward.velocities[-1], T, steps)
    count = min(len(forward.times), len(backward.times))
    reversed_forward = forward.positions[::-1][:count]
    return float(np.max(np.linalg.norm(backward.positions[:count] - reversed_forward, axis=-1)))


def euler_lagrange_residual(chart: FinslerChart, position, velocity, acceleration) -> np.ndarray:
    """
    d/dt (d_v F) - d_x F along a curve, from its position, velocity and
    acceleration; the length functional is parametrization invariant, so
    this vanishes on geodesics of any speed.
    """
    x = np.asarray(position, dtype=float)
    v = np.asarray(velocity, dtype=float)
    a = np.asarray(acceleration, dtype=float)
    return (np.einsum("...ij,...j->...i", chart.mixed(x, v), v)
            + np.einsum("...ij,...j->...i", chart.hessian_v(x, v), a)
            - chart.gradient_x(x, v))


def curve_geodesic_residual(chart: FinslerChart, position: Field, velocity: Field,
                            acceleration: Field, times: np.ndarray) -> float:
    """sup over `times` of |Euler-Lagrange residual| of a parametrized curve."""
    t = np.asarray(times, dtype=float)
    residual = euler_lagrange_residual(chart, position(t), velocity(t), acceleration(t))
    return float(np.max(np.linalg.norm(residual, axis=-1)))


# ---------------------------------------------------------------------------
# Hilbert 1-form
# ---------------------------------------------------------------------------

def hilbert_one_form(chart: FinslerChart, point: UnitBundlePoint) -> np.ndarray:
    """omega_1 = L^1_x(v) o D pi, as a 2n-covector (L^1_x(v), 0)."""
    return np.concatenate([chart.legendre(point.x, point.v), np.zeros(chart.dim)])


def _omega_at(chart: FinslerChart, state: np.ndarray) -> np.ndarray:
    n = chart.dim
    return np.concatenate([chart.legendre(state[:n], state[n:]), np.zeros(n)])


def _directional(chart: FinslerChart, state: np.ndarray, direction: np.ndarray, h: float,
                 target: np.ndarray) -> float:
    """d/dt omega_{state + t direction}(target) at t = 0, staying inside the domain."""
    n = chart.dim
    plus, minus = state + h * direction, state - h * direction
    inside_plus = bool(chart.contains(plus[:n]))
    inside_minus = bool(chart.contains(minus[:n]))
    if inside_plus and inside_minus:
        return (_omega_at(chart, plus) @ target - _omega_at(chart, minus) @ target) / (2.0 * h)
    logger.warning("d omega_1 stencil leaves the domain; using a one-sided stencil")
    sign = 1.0 if inside_plus else -1.0
    f0 = _omega_at(chart, state) @ target
    f1 = _omega_at(chart, state + sign * h * direction) @ target
    f2 = _omega_at(chart, state + 2 * sign * h * direction) @ target
    return sign * (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h)


def d_omega1(chart: FinslerChart, point: UnitBundlePoint, X, Y, method: str = "analytic",
             step: Optional[float] = None) -> float:
    """
    d omega_1 (X, Y) for tangent vectors X, Y in R^{2n} at a unit-bundle point.

    "analytic": (M X_x + g X_v) . Y_x - (M Y_x + g Y_v) . X_x with
    M = d_x d_v (F^2/2) and g the fundamental tensor.
    "central": X omega(Y) - Y omega(X) by central differences along the
    constant extensions of X and Y.
    """
    n = chart.dim
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape != (2 * n,) or Y.shape != (2 * n,):
        raise DimensionMismatchError("unit-bundle tangent vectors live in R^{2n}")
    if method == "analytic":
        mixed = chart.lagrangian_mixed(point.x, point.v)
        g = chart.fundamental_tensor(point.x, point.v)
        dx_theta = mixed @ X[:n] + g @ X[n:]
        dy_theta = mixed @ Y[:n] + g @ Y[n:]
        return float(dx_theta @ Y[:n] - dy_theta @ X[:n])
    if method == "central":
        h = NUMERICS_CONFIG["fd_step_bundle"] if step is None else step
        state = point.state
        return _directional(chart, state, X, h, Y) - _directional(chart, state, Y, h, X)
    raise UnknownOptionError(f"unknown d omega_1 method {method!r}")


def unit_bundle_normal(chart: FinslerChart, point: UnitBundlePoint) -> np.ndarray:
    """(d_x F, d_v F), the differential of F whose kernel is the unit-bundle tangent space."""
    return np.concatenate([chart.gradient_x(point.x, point.v), chart.gradient_v(point.x, point.v)])


def random_bundle_tangent(chart: FinslerChart, point: UnitBundlePoint, rng: np.random.Generator) -> np.ndarray:
    """A random vector of R^{2n} projected into ker dF."""
    normal = unit_bundle_normal(chart, point)
    y = rng.standard_normal(2 * chart.dim)
    return y - (y @ normal) / (normal @ normal) * normal


def geodesic_lift_tangent(chart: FinslerChart, point: UnitBundlePoint) -> np.ndarray:
    """Tangent (v, spray) of the lifted geodesic through a unit-bundle point."""
    return np.concatenate([point.v, spray(chart, point.x, point.v)])


def vertical_vector(chart: FinslerChart, point: UnitBundlePoint, direction) -> np.ndarray:
    """(0, w) with w the direction projected to T_v of the unit sphere F(x, .) = 1."""
    w = np.asarray(direction, dtype=float)
    grad = chart.gradient_v(point.x, point.v)
    w = w - (grad @ w) * point.v
    return np.concatenate([np.zeros(chart.dim), w])
