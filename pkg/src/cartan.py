"""
Finsler surfaces: the canonical coframe (omega_1, omega_2, omega_3) on the
unit tangent bundle, the invariants I, J, K and curve curvature.

The unit bundle of a 2-dimensional chart is charted by z = (x_1, x_2, theta)
with v = u(theta) / F(x, u(theta)), u(theta) = (cos theta, sin theta). Forms
are 3-vectors of components on (dx_1, dx_2, dtheta); 2-forms are
antisymmetric 3x3 matrices with (alpha ^ beta)_ij = alpha_i beta_j - alpha_j beta_i.

Structure equations:
    d omega_1 = -omega_2 ^ omega_3
    d omega_2 = omega_1 ^ omega_3 - I omega_2 ^ omega_3
    d omega_3 = -K omega_1 ^ omega_2 - J omega_2 ^ omega_3
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import pandas as pd

from config.settings import CARTAN_CONFIG, NUMERICS_CONFIG
from .exceptions import DimensionMismatchError, DomainError, GeodesicSolveError
from .finsler import FinslerChart, GeodesicTrajectory, spray

logger = logging.getLogger(__name__)

FormField = Callable[[np.ndarray], np.ndarray]

D_THETA = np.array([0.0, 0.0, 1.0])


def _check_surface(chart: FinslerChart) -> None:
    if chart.dim != 2:
        raise DimensionMismatchError(f"Cartan invariants need a surface chart, got dim={chart.dim}")


def fiber_vector(chart: FinslerChart, x, theta) -> np.ndarray:
    """The unit vector of direction theta at x."""
    theta = np.asarray(theta, dtype=float)
    u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    x = np.broadcast_to(np.asarray(x, dtype=float), u.shape)
    return u / chart.metric(x, u)[..., None]


def direction_angle(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.arctan2(v[..., 1], v[..., 0])


def _horizontal_forms(chart: FinslerChart, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """omega_1 = (d_v F, 0) and omega_2 = (g_v w, 0) with w = R p / sqrt(det g_v)."""
    x = z[..., :2]
    v = fiber_vector(chart, x, z[..., 2])
    p = chart.gradient_v(x, v)
    g = chart.fundamental_tensor(x, v)
    det = np.linalg.det(g)
    if np.any(det <= NUMERICS_CONFIG["zero_tolerance"]):
        raise GeodesicSolveError("fundamental tensor is degenerate", float("inf"))
    w = np.stack([-p[..., 1], p[..., 0]], axis=-1) / np.sqrt(det)[..., None]
    zero = np.zeros(z.shape[:-1] + (1,))
    omega1 = np.concatenate([p, zero], axis=-1)
    omega2 = np.concatenate([np.einsum("...ij,...j->...i", g, w), zero], axis=-1)
    return omega1, omega2


def exterior_derivative(form: FormField, z: np.ndarray, step: float) -> np.ndarray:
    """
    d alpha at points z (m, 3) by central differences: Omega_ij = d_i alpha_j - d_j alpha_i.

    `form` maps (M, 3) points to (M, 3) components.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    eye = np.eye(3)
    stencil = z[:, None, :] + step * np.concatenate([eye, -eye])[None]
    values = form(stencil.reshape(-1, 3)).reshape(z.shape[0], 6, 3)
    jac = (values[:, :3] - values[:, 3:]) / (2.0 * step)
    return jac - np.swapaxes(jac, -1, -2)


def wedge2(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    return alpha[..., :, None] * beta[..., None, :] - beta[..., :, None] * alpha[..., None, :]


def _components(omega: np.ndarray) -> np.ndarray:
    return np.stack([omega[..., 0, 1], omega[..., 0, 2], omega[..., 1, 2]], axis=-1)


def expand_two_form(omega: np.ndarray, basis) -> np.ndarray:
    """Coefficients (m, 3) of omega on the 2-forms basis[0], basis[1], basis[2]."""
    matrix = np.stack([_components(b) for b in basis], axis=-1)
    return np.linalg.solve(matrix, _components(omega)[..., None])[..., 0]


def _connection(chart: FinslerChart, z: np.ndarray, step: float) -> Dict[str, np.ndarray]:
    """omega_3 = a omega_1 + b omega_2 + c dtheta and I from the first two equations."""
    omega1, omega2 = _horizontal_forms(chart, z)
    dtheta = np.broadcast_to(D_THETA, omega1.shape)
    basis = (wedge2(omega1, omega2), wedge2(omega1, dtheta), wedge2(omega2, dtheta))
    d1 = expand_two_form(exterior_derivative(lambda y: _horizontal_forms(chart, y)[0], z, step), basis)
    d2 = expand_two_form(exterior_derivative(lambda y: _horizontal_forms(chart, y)[1], z, step), basis)
    a, c = d1[:, 0], -d1[:, 2]
    invariant_i = -d2[:, 2] / c
    b = d2[:, 0] - invariant_i * a
    omega3 = a[:, None] * omega1 + b[:, None] * omega2 + c[:, None] * dtheta
    return {"omega1": omega1, "omega2": omega2, "omega3": omega3, "I": invariant_i,
            "residual_1": np.abs(d1[:, 1]), "residual_2": np.abs(d2[:, 1] - c)}


def _third_form(chart: FinslerChart, step: float) -> FormField:
    def form(y):
        return _connection(chart, y, step)["omega3"]
    return form


@dataclass
class SurfaceCoframe:
    """The coframe at (x, v) in (dx_1, dx_2, dtheta) components."""
    x: np.ndarray
    v: np.ndarray
    theta: float
    omega1: np.ndarray
    omega2: np.ndarray
    omega3: np.ndarray

    @property
    def fiber_value(self) -> float:
        """omega_3 on the fiber tangent d/dtheta; nonzero everywhere."""
        return float(self.omega3[2])

    def matrix(self) -> np.ndarray:
        return np.vstack([self.omega1, self.omega2, self.omega3])

    def to_dict(self) -> Dict:
        return {"x": self.x.tolist(), "v": self.v.tolist(), "theta": self.theta,
                "omega1": self.omega1.tolist(), "omega2": self.omega2.tolist(), "omega3": self.omega3.tolist()}


def _bundle_point(chart: FinslerChart, x, v) -> np.ndarray:
    _check_surface(chart)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if x.shape != (2,) or v.shape != (2,):
        raise DimensionMismatchError("surface coframes take x, v in R^2")
    if abs(float(chart.metric(x, v)) - 1.0) > NUMERICS_CONFIG["renormalize_tolerance"]:
        logger.warning("coframe requested at F(x, v) != 1; using the direction of v")
    return np.concatenate([x, [float(direction_angle(v))]])


def coframe(chart: FinslerChart, x, v, step: Optional[float] = None) -> SurfaceCoframe:
    """(omega_1, omega_2, omega_3) at the unit-bundle point over (x, v)."""
    step = step or CARTAN_CONFIG["bundle_step"]
    z = _bundle_point(chart, x, v)
    data = _connection(chart, z[None], step)
    return SurfaceCoframe(z[:2], fiber_vector(chart, z[:2], z[2]), float(z[2]),
                          data["omega1"][0], data["omega2"][0], data["omega3"][0])


def invariant_table(chart: FinslerChart, z: np.ndarray, step: Optional[float] = None) -> pd.DataFrame:
    """
    I, J, K and the three structure-equation residuals at bundle points z (m, 3).

    Columns: x0, x1, theta, I, J, K, residual_1, residual_2, residual_3, fiber_omega3.
    """
    _check_surface(chart)
    step = step or CARTAN_CONFIG["bundle_step"]
    z = np.atleast_2d(np.asarray(z, dtype=float))
    data = _connection(chart, z, step)
    d3 = exterior_derivative(_third_form(chart, step), z, step)
    basis = (wedge2(data["omega1"], data["omega2"]), wedge2(data["omega1"], data["omega3"]),
             wedge2(data["omega2"], data["omega3"]))
    c12, c13, c23 = expand_two_form(d3, basis).T
    return pd.DataFrame({
        "x0": z[:, 0], "x1": z[:, 1], "theta": z[:, 2],
        "I": data["I"], "J": -c23, "K": -c12,
        "residual_1": data["residual_1"], "residual_2": data["residual_2"], "residual_3": np.abs(c13),
        "fiber_omega3": data["omega3"][:, 2],
    })


@dataclass
class CartanInvariants:
    I: float
    J: float
    K: float
    residuals: Tuple[float, float, float]
    tolerance: float

    @property
    def flagged(self) -> bool:
        return max(self.residuals) > self.tolerance

    def to_dict(self) -> Dict:
        return {"I": self.I, "J": self.J, "K": self.K, "residuals": list(self.residuals),
                "tolerance": self.tolerance, "flagged": self.flagged}


def invariants_IJK(chart: FinslerChart, x, v, step: Optional[float] = None,
                   tolerance: Optional[float] = None) -> CartanInvariants:
    """Read off I, J, K from the structure equations at (x, v)."""
    tolerance = CARTAN_CONFIG["residual_tolerance"] if tolerance is None else tolerance
    row = invariant_table(chart, _bundle_point(chart, x, v)[None], step).iloc[0]
    result = CartanInvariants(float(row["I"]), float(row["J"]), float(row["K"]),
                              (float(row["residual_1"]), float(row["residual_2"]), float(row["residual_3"])),
                              tolerance)
    if result.flagged:
        logger.warning("structure-equation residual %.3e exceeds %.1e", max(result.residuals), tolerance)
    return result


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------

def _lift_tangent(position, velocity, acceleration) -> Tuple[np.ndarray, np.ndarray]:
    """Bundle point and tangent (c', theta') of the lift of a plane curve."""
    c, dc, ddc = (np.asarray(a, dtype=float) for a in (position, velocity, acceleration))
    speed2 = np.sum(dc * dc, axis=-1)
    theta_dot = (dc[..., 0] * ddc[..., 1] - dc[..., 1] * ddc[..., 0]) / speed2
    z = np.concatenate([c, direction_angle(dc)[..., None]], axis=-1)
    return z, np.concatenate([dc, theta_dot[..., None]], axis=-1)


def curve_curvature(chart: FinslerChart, position, velocity, acceleration, step: Optional[float] = None) -> np.ndarray:
    """k = omega_3(V) / omega_1(V) along a curve sampled as (position, velocity, acceleration) arrays."""
    _check_surface(chart)
    step = step or CARTAN_CONFIG["bundle_step"]
    z, tangent = _lift_tangent(position, velocity, acceleration)
    flat_z = np.atleast_2d(z)
    data = _connection(chart, flat_z, step)
    flat_t = np.atleast_2d(tangent)
    first = np.einsum("mi,mi->m", data["omega1"], flat_t)
    if np.any(np.abs(first) <= NUMERICS_CONFIG["zero_tolerance"]):
        raise DimensionMismatchError("curve velocity vanishes")
    curvature = np.einsum("mi,mi->m", data["omega3"], flat_t) / first
    return curvature.reshape(np.shape(z)[:-1])


def curve_mean_curvature(chart: FinslerChart, position, velocity, acceleration,
                         step: Optional[float] = None) -> np.ndarray:
    """h = -k omega_2 as covectors on R^2, shape (..., 2)."""
    step = step or CARTAN_CONFIG["bundle_step"]
    k = np.atleast_1d(curve_curvature(chart, position, velocity, acceleration, step))
    z, _ = _lift_tangent(position, velocity, acceleration)
    omega2 = _horizontal_forms(chart, np.atleast_2d(z))[1][:, :2]
    return (-k[:, None] * omega2).reshape(np.shape(z)[:-1] + (2,))


def trajectory_curvature(chart: FinslerChart, trajectory: GeodesicTrajectory,
                         step: Optional[float] = None) -> np.ndarray:
    """Curvature at every sample of a geodesic trajectory, accelerations from the spray."""
    acceleration = spray(chart, trajectory.positions, trajectory.velocities)
    return curve_curvature(chart, trajectory.positions, trajectory.velocities, acceleration, step)


def omega2_on_lift(chart: FinslerChart, position, velocity, acceleration) -> np.ndarray:
    """omega_2 of the lift tangent; vanishes for every regular curve."""
    z, tangent = _lift_tangent(position, velocity, acceleration)
    omega2 = _horizontal_forms(chart, np.atleast_2d(z))[1]
    return np.einsum("mi,mi->m", omega2, np.atleast_2d(tangent))


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def sample_bundle(rng: np.random.Generator, lower, upper, samples: int) -> np.ndarray:
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x = lower + (upper - lower) * rng.random((samples, 2))
    theta = 2.0 * np.pi * rng.random(samples)
    return np.column_stack([x, theta])


@dataclass
class StructureReport:
    table: pd.DataFrame
    tolerance: float
    nonzero_threshold: float

    @property
    def max_residuals(self) -> Tuple[float, float, float]:
        return tuple(float(self.table[f"residual_{i}"].max()) for i in (1, 2, 3))

    @property
    def max_abs_I(self) -> float:
        return float(self.table["I"].abs().max())

    @property
    def min_fiber_omega3(self) -> float:
        return float(self.table["fiber_omega3"].abs().min())

    @property
    def passed(self) -> bool:
        return max(self.max_residuals) <= self.tolerance and self.min_fiber_omega3 > 0.0

    def to_dict(self) -> Dict:
        return {
            "samples": int(len(self.table)),
            "max_residuals": list(self.max_residuals),
            "max_abs_I": self.max_abs_I,
            "I_nonzero": self.max_abs_I > self.nonzero_threshold,
            "K_range": [float(self.table["K"].min()), float(self.table["K"].max())],
            "J_range": [float(self.table["J"].min()), float(self.table["J"].max())],
            "min_fiber_omega3": self.min_fiber_omega3,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def structure_residuals(chart: FinslerChart, samples: int, seed: int, lower=None, upper=None,
                        step: Optional[float] = None, tolerance: Optional[float] = None) -> StructureReport:
    """Invariants and residuals on `samples` random unit-bundle points of the box [lower, upper]."""
    tolerance = CARTAN_CONFIG["residual_tolerance"] if tolerance is None else tolerance
    lower = chart.lower if lower is None else lower
    upper = chart.upper if upper is None else upper
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise DomainError("sampling box must be bounded")
    z = sample_bundle(np.random.default_rng(seed), lower, upper, samples)
    report = StructureReport(invariant_table(chart, z, step), tolerance, CARTAN_CONFIG["nonzero_threshold"])
    logger.info("structure residuals over %d points: %s", samples,
                ", ".join(f"{r:.2e}" for r in report.max_residuals))
    return report
