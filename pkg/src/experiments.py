"""
Named experiments and the runner that executes them, writes the JSON report,
the CSV series and the runtime sidecar.
"""

import logging
import os
import platform
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import psutil
from scipy import linalg

from config.settings import EXPERIMENT_CONFIG, PATHS, VARIATION_CONFIG, get_settings
from .cartan import curve_mean_curvature, invariant_table, sample_bundle, structure_residuals, trajectory_curvature
from .crofton import (CroftonChart, GaussianBumpMeasure, crofton_length_identity_check, default_window,
                      line_geodesic_residual)
from .densities import (BUSEMANN_HAUSDORFF, HOLMES_THOMPSON, evaluate_density,
                        hilbert_vertical_residual, ht_legendre, ht_legendre_fd, legendre_axioms_check,
                        local_calibration_check)
from .descriptors import (build_chart, build_curve, build_field, build_kvector, build_patch, build_section,
                          load_schema, validate)
from .exceptions import ConfigValidationError
from .exterior import SimpleKVector
from .finsler import (FinslerChart, MinkowskiChart, RandersChart, RiemannianChart, constant_metric, geodesic,
                      reversal_gap, rotational_drift, stereographic_sphere_metric)
from .models import ExperimentConfig, ExperimentReport, RunRecord, stable_dumps
from .norms import EuclideanNorm, MinkowskiNorm, RandersNorm
from .variation import (bent_patch, circle_arc, constant_section, curve_residual_covector, fiber_identity_check,
                        flat_patch, graph_patch, hausdorff_comparison, ht_volume, mean_curvature_covector,
                        mean_curvature_theta, rotating_section, sphere_cap, sphere_octant,
                        totally_geodesic_minimality_experiment, VariationField)

logger = logging.getLogger(__name__)


@dataclass
class Outcome:
    """What an experiment hands back to the runner."""
    outputs: Dict[str, Any]
    tolerances: Dict[str, Any]
    passed: bool
    error_estimates: Dict[str, Any] = field(default_factory=dict)
    series: Dict[str, pd.DataFrame] = field(default_factory=dict)


Experiment = Callable[[ExperimentConfig], Outcome]
EXPERIMENTS: Dict[str, Experiment] = {}


def experiment(name: str):
    def register(fn: Experiment) -> Experiment:
        EXPERIMENTS[name] = fn
        return fn
    return register


def _seed(config: ExperimentConfig) -> int:
    return EXPERIMENT_CONFIG["default_seed"] if config.seed is None else int(config.seed)


def _norm_from(config: ExperimentConfig) -> Optional[MinkowskiNorm]:
    if not config.chart:
        return None
    chart = build_chart(config.chart)
    if not isinstance(chart, MinkowskiChart):
        raise ConfigValidationError("this experiment needs a minkowski chart", "chart")
    return chart.norm


def random_randers(rng: np.random.Generator, n: int, max_drift: float = 0.5) -> RandersNorm:
    """Random SPD A and a drift with |b|_(A^-1) uniform in [0, max_drift)."""
    m = rng.standard_normal((n, n))
    A = m @ m.T / n + 0.5 * np.eye(n)
    direction = rng.standard_normal(n)
    direction /= np.linalg.norm(direction)
    b = max_drift * rng.random() * (linalg.cholesky(A, lower=True) @ direction)
    return RandersNorm(A, b)


def random_kvector(rng: np.random.Generator, n: int, k: int) -> SimpleKVector:
    return SimpleKVector(rng.standard_normal((k, n)))


def _quadrature(chart: CroftonChart) -> Dict[str, int]:
    return {"polar_nodes": chart.polar_nodes, "azimuth_nodes": chart.azimuth_nodes,
            "equator_nodes": chart.equator_nodes}


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------

@experiment("euclidean-recovery")
def euclidean_recovery(config: ExperimentConfig) -> Outcome:
    rng = np.random.default_rng(_seed(config))
    samples = int(config.param("samples", 100))
    max_n = int(config.param("max_n", 4))
    tol = config.tolerance("relative", 1e-6)
    rows = []
    for _ in range(samples):
        n = int(rng.integers(2, max_n + 1))
        k = int(rng.integers(1, min(n, 3) + 1))
        a = random_kvector(rng, n, k)
        norm = EuclideanNorm(dim=n)
        ht = evaluate_density(norm, a, HOLMES_THOMPSON)
        bh = evaluate_density(norm, a, BUSEMANN_HAUSDORFF)
        rows.append({"n": n, "k": k, "euclidean": a.magnitude, "holmes_thompson": ht.value,
                     "busemann_hausdorff": bh.value,
                     "error_ht": abs(ht.value - a.magnitude) / a.magnitude,
                     "error_bh": abs(bh.value - a.magnitude) / a.magnitude})
    frame = pd.DataFrame(rows, columns=["n", "k", "euclidean", "holmes_thompson", "busemann_hausdorff",
                                        "error_ht", "error_bh"])
    worst_ht, worst_bh = float(frame["error_ht"].max()), float(frame["error_bh"].max())
    return Outcome({"samples": samples, "max_error_ht": worst_ht, "max_error_bh": worst_bh},
                   {"relative": tol}, max(worst_ht, worst_bh) <= tol, series={"samples": frame})


@experiment("density-eval")
def density_eval(config: ExperimentConfig) -> Outcome:
    norm = _norm_from(config) or EuclideanNorm(dim=3)
    a = build_kvector(config.param("kvector", {"factors": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]}))
    nodes = config.param("nodes")
    ht = evaluate_density(norm, a, HOLMES_THOMPSON, config.param("route", "auto"), nodes)
    bh = evaluate_density(norm, a, BUSEMANN_HAUSDORFF, nodes=nodes)
    outputs = {"norm": norm.describe(), "kvector": a.factors, "holmes_thompson": ht.value,
               "busemann_hausdorff": bh.value, "route": ht.route}
    tolerances, passed = {}, True
    expected = config.param("expected")
    if expected is not None:
        tol = config.tolerance("relative", 1e-6)
        gap = abs(ht.value - expected) / abs(expected)
        outputs["relative_gap"] = gap
        tolerances["relative"] = tol
        passed = gap <= tol
    return Outcome(outputs, tolerances, passed,
                   {"holmes_thompson": ht.error_estimate, "busemann_hausdorff": bh.error_estimate})


@experiment("density-calibration")
def density_calibration(config: ExperimentConfig) -> Outcome:
    rng = np.random.default_rng(_seed(config))
    norms = int(config.param("norms", 20))
    samples = int(config.param("samples", 200))
    radius = float(config.param("radius", 0.2))
    nodes = config.param("nodes")
    tol = config.tolerance("calibration", 1e-6)
    fixed = _norm_from(config)
    rows = []
    for i in range(norms):
        norm = fixed or random_randers(rng, 3)
        a = random_kvector(rng, norm.dim, 2)
        report = local_calibration_check(norm, a, radius, samples, int(rng.integers(2 ** 31)), tol, nodes)
        rows.append({"norm": i, "drift_norm": getattr(norm, "drift_norm", 0.0), "base_gap": report.base_gap,
                     "max_violation": report.max_violation, "argmax": report.argmax})
    frame = pd.DataFrame(rows, columns=["norm", "drift_norm", "base_gap", "max_violation", "argmax"])
    outputs = {"norms": norms, "samples": samples, "radius": radius,
               "max_violation": float(frame["max_violation"].max()), "max_base_gap": float(frame["base_gap"].max())}
    passed = outputs["max_violation"] <= tol and outputs["max_base_gap"] <= tol
    return Outcome(outputs, {"calibration": tol}, passed, series={"norms": frame})


@experiment("legendre-axioms")
def legendre_axioms(config: ExperimentConfig) -> Outcome:
    rng = np.random.default_rng(_seed(config))
    norm = _norm_from(config) or random_randers(rng, 3)
    k = int(config.param("k", norm.dim - 1))
    a = random_kvector(rng, norm.dim, k)
    nodes = config.param("nodes")
    tol = config.tolerance("axioms", 1e-5)
    report = legendre_axioms_check(norm, a, int(config.param("directions", 20)), _seed(config), nodes=nodes)
    outputs = report.to_dict()
    outputs["vertical_residual"] = hilbert_vertical_residual(norm, a, seed=_seed(config), nodes=nodes)
    gaps = [report.euler_gap, report.homogeneity_gap, report.max_tangency_residual, outputs["vertical_residual"]]
    if k == norm.dim - 1:
        legendre = ht_legendre(norm, a, nodes)
        fd = ht_legendre_fd(norm, a, nodes=nodes)
        outputs["fd_gap"] = float(np.max(np.abs(legendre.components - fd.components))) / legendre.norm()
        gaps.append(outputs["fd_gap"])
    return Outcome(outputs, {"axioms": tol}, max(gaps) <= tol)


# ---------------------------------------------------------------------------
# Geodesics
# ---------------------------------------------------------------------------

def _default_sphere_chart() -> FinslerChart:
    return RiemannianChart(stereographic_sphere_metric, 2, [-3.0, -3.0], [3.0, 3.0], "round-sphere")


@experiment("geodesic-shoot")
def geodesic_shoot(config: ExperimentConfig) -> Outcome:
    chart = build_chart(config.chart) if config.chart else _default_sphere_chart()
    x0 = np.asarray(config.param("x0", [0.0] * chart.dim), dtype=float)
    v0 = np.asarray(config.param("v0", np.eye(chart.dim)[0]), dtype=float)
    T = float(config.param("T", 1.5))
    steps = int(config.param("steps", 300))
    tol = config.tolerance("speed", 1e-8)
    trajectory = geodesic(chart, x0, v0, T, steps)
    outputs = trajectory.to_dict()
    if config.param("reversal", True):
        outputs["reversal_gap"] = reversal_gap(chart, x0, v0, T, steps)
    passed = not trajectory.truncated and trajectory.max_speed_error <= tol
    return Outcome(outputs, {"speed": tol}, passed, series={"trajectory": trajectory.to_frame()})


# ---------------------------------------------------------------------------
# Variation
# ---------------------------------------------------------------------------

@experiment("classical-limits")
def classical_limits(config: ExperimentConfig) -> Outcome:
    """Euclidean R^3 oracles: areas, circle and sphere mean curvature, flat patches."""
    chart = MinkowskiChart(EuclideanNorm(dim=3))
    rel = config.tolerance("relative", 1e-2)
    flat_tol = config.tolerance("flat", 1e-8)
    area_tol = config.tolerance("area", 1e-4)
    radius = config.param("bump_radius", VARIATION_CONFIG["bump_radius"])
    rows = []

    octant = ht_volume(chart, sphere_octant(1.0), config.param("grid"), config.param("coarse_grid"))
    rows.append({"case": "sphere-octant-area", "expected": np.pi / 2, "computed": octant.value,
                 "relative_error": abs(octant.value - np.pi / 2) / (np.pi / 2), "tolerance": area_tol})
    square = ht_volume(chart, flat_patch([0, 0, 0], np.eye(3)[:2], [0, 0], [1, 1]))
    rows.append({"case": "unit-square-area", "expected": 1.0, "computed": square.value,
                 "relative_error": abs(square.value - 1.0), "tolerance": area_tol})

    circle = mean_curvature_covector(chart, circle_arc(2.0), [0.0], radius, extrapolate=True)
    rows.append({"case": "circle-radius-2", "expected": 0.5, "computed": circle.magnitude,
                 "relative_error": float(np.linalg.norm(circle.covector - [0.5, 0.0, 0.0]) / 0.5),
                 "tolerance": rel})
    sphere = mean_curvature_covector(chart, sphere_cap(1.0), [0.0, 0.0], radius, extrapolate=True)
    rows.append({"case": "unit-sphere", "expected": 2.0, "computed": sphere.magnitude,
                 "relative_error": float(np.linalg.norm(sphere.covector - [0.0, 0.0, 2.0]) / 2.0),
                 "tolerance": rel})
    plane = flat_patch([0, 0, 0], [[1.0, 0.2, 0.0], [0.0, 1.0, 0.5]], [-0.5, -0.5], [0.5, 0.5])
    flat = mean_curvature_covector(chart, plane, [0.1, -0.05], radius)
    rows.append({"case": "flat-plane", "expected": 0.0, "computed": flat.magnitude,
                 "relative_error": flat.magnitude, "tolerance": flat_tol})

    frame = pd.DataFrame(rows, columns=["case", "expected", "computed", "relative_error", "tolerance"])
    passed = bool(np.all(frame["relative_error"] <= frame["tolerance"]))
    outputs = {"cases": frame.drop(columns="tolerance").to_dict("records"),
               "sphere_h": sphere.covector, "circle_h": circle.covector}
    return Outcome(outputs, {"relative": rel, "flat": flat_tol, "area": area_tol}, passed,
                   {"sphere-octant-area": octant.error_estimate}, {"cases": frame})


@experiment("variation-h")
def variation_h(config: ExperimentConfig) -> Outcome:
    chart = build_chart(config.chart) if config.chart else MinkowskiChart(EuclideanNorm(dim=3))
    patch = build_patch(config.patch) if config.patch else sphere_cap(1.0)
    q0 = np.atleast_1d(np.asarray(config.param("point", 0.5 * (patch.lower + patch.upper)), dtype=float))
    method = config.param("method", "variation")
    nodes = config.param("nodes")
    outputs, tolerances, passed = {"point": patch.points(q0)}, {}, True
    h = None
    if method in ("variation", "both"):
        h = mean_curvature_covector(chart, patch, q0, config.param("bump_radius"), config.param("profile"),
                                    extrapolate=bool(config.param("extrapolate", False)), nodes=nodes)
        outputs["variation"] = h.to_dict()
    if method in ("theta", "both"):
        theta = mean_curvature_theta(chart, patch, q0, nodes=nodes)
        outputs["theta"] = theta.to_dict()
        if h is not None:
            gap = float(np.linalg.norm(h.covector - theta.covector)) / max(h.magnitude, theta.magnitude, 1e-12)
            outputs["route_gap"] = gap
            tolerances["route_gap"] = config.tolerance("route_gap", 1e-2)
            passed = gap <= tolerances["route_gap"]
        h = h or theta
    if config.param("field") is not None:
        outputs["hausdorff_comparison"] = hausdorff_comparison(chart, patch, build_field(config.param("field")),
                                                               nodes=nodes)
    expected = config.param("expected")
    if expected is not None:
        tolerances["relative"] = config.tolerance("relative", 1e-2)
        expected = np.asarray(expected, dtype=float)
        gap = float(np.linalg.norm(h.covector - expected)) / max(float(np.linalg.norm(expected)), 1.0)
        outputs["expected_gap"] = gap
        passed = passed and gap <= tolerances["relative"]
    return Outcome(outputs, tolerances, passed)


@experiment("fiber-identity")
def fiber_identity(config: ExperimentConfig) -> Outcome:
    rng = np.random.default_rng(_seed(config))
    nodes = int(config.param("nodes", 64))
    euclid_tol = config.tolerance("euclidean", 1e-6)
    randers_tol = config.tolerance("randers", 1e-4)
    euclidean = MinkowskiChart(EuclideanNorm(dim=3))
    b = random_kvector(rng, 3, 2)
    base = fiber_identity_check(euclidean, constant_section(np.eye(3)[:2]), np.zeros(3), b, nodes)
    if config.chart:
        chart = build_chart(config.chart)
    else:
        chart = RandersChart(constant_metric(np.eye(3)), rotational_drift(0.3), 3, name="rotational-randers")
    section = build_section(config.param("section")) if config.param("section") else rotating_section(0.5)
    rows = []
    for i in range(int(config.param("points", 10))):
        x = rng.uniform(-1.0, 1.0, 3)
        report = fiber_identity_check(chart, section, x, random_kvector(rng, 3, 2), nodes,
                                      config.param("method", "analytic"))
        rows.append({"point": i, "x0": x[0], "x1": x[1], "x2": x[2], "lhs": report.lhs, "rhs": report.rhs,
                     "gap": report.gap})
    frame = pd.DataFrame(rows, columns=["point", "x0", "x1", "x2", "lhs", "rhs", "gap"])
    outputs = {"euclidean": base.to_dict(), "max_randers_gap": float(frame["gap"].max()),
               "constant": base.constant}
    passed = base.gap <= euclid_tol and outputs["max_randers_gap"] <= randers_tol
    return Outcome(outputs, {"euclidean": euclid_tol, "randers": randers_tol}, passed, series={"points": frame})


@experiment("main-theorem")
def main_theorem(config: ExperimentConfig) -> Outcome:
    if config.chart:
        chart = build_chart(config.chart)
    else:
        chart = CroftonChart(GaussianBumpMeasure(3, 1.0, 0.5, 1.0, [0.1, -0.2, 0.3]), polar_nodes=8,
                             azimuth_nodes=24, equator_nodes=32)
    half = float(config.param("half_width", 0.5))
    height = float(config.param("height", 0.1))
    patch = build_patch(config.patch) if config.patch else graph_patch(height, 0.0, [-half] * 2, [half] * 2, "plane")
    bend = float(config.param("bend", 1.0))
    bent = bent_patch(patch, bend) if bend else None
    report = totally_geodesic_minimality_experiment(
        chart, patch, int(config.param("trials", 20)), _seed(config), bent_patch=bent,
        radius=config.param("bump_radius"), tolerance=config.tolerance("first_variation", 1e-4),
        h_tolerance=config.tolerance("h", 1e-4), bent_threshold=config.tolerance("bent", 1e-2),
        h_points=config.param("h_points"), nodes=config.param("nodes"))
    frame = pd.DataFrame({"trial": np.arange(len(report.ratios)), "ratio": report.ratios,
                          "bent_ratio": report.bent_ratios or [np.nan] * len(report.ratios)})
    outputs = report.to_dict()
    outputs["chart"] = chart.describe() if not isinstance(chart, CroftonChart) else chart.measure.describe()
    outputs["bent_control"] = bent.name if bent is not None else None
    if config.param("hausdorff", False):
        field_ = VariationField.random(np.random.default_rng(_seed(config) + 1), patch,
                                       config.param("bump_radius") or VARIATION_CONFIG["bump_radius"])
        outputs["hausdorff_comparison"] = hausdorff_comparison(chart, patch, field_, nodes=config.param("nodes"))
    tolerances = outputs.pop("thresholds")
    return Outcome(outputs, tolerances, report.passed, {"flagged_richardson": report.flagged}, {"trials": frame})


# ---------------------------------------------------------------------------
# Crofton
# ---------------------------------------------------------------------------

def _crofton_chart(config: ExperimentConfig) -> CroftonChart:
    if config.chart:
        chart = build_chart(config.chart)
        if not isinstance(chart, CroftonChart):
            raise ConfigValidationError("this experiment needs a crofton chart", "chart")
        return chart
    return CroftonChart(GaussianBumpMeasure(2, 1.0, 0.5, 1.0))


@experiment("crofton-length")
def crofton_length(config: ExperimentConfig) -> Outcome:
    chart = _crofton_chart(config)
    dim = chart.dim
    start, end = [-1.0] + [0.0] * (dim - 1), [1.0] + [0.0] * (dim - 1)
    curve = build_curve(config.param("curve", {"type": "detour", "start": start, "end": end, "height": 0.5}))
    samples = int(config.param("mc_samples", 1_000_000))
    seed = _seed(config)
    report = crofton_length_identity_check(chart.measure, curve, samples, seed, workers=config.param("workers"),
                                           **_quadrature(chart))
    sigma = config.tolerance("sigma", 3.0)
    report.sigma_limit = sigma
    outputs = {"curve": report.to_dict()}
    passed = report.passed
    if config.param("compare_segment", True):
        segment = build_curve({"type": "segment", "start": curve[0].tolist(), "end": curve[-1].tolist()})
        straight = crofton_length_identity_check(chart.measure, segment, samples, seed,
                                                 window=_window(curve, segment), workers=config.param("workers"),
                                                 **_quadrature(chart))
        straight.sigma_limit = sigma
        outputs["segment"] = straight.to_dict()
        outputs["segment_shorter"] = straight.rhs <= report.rhs
        passed = passed and straight.passed and outputs["segment_shorter"]
    return Outcome(outputs, {"sigma": sigma}, passed, {"standard_error": report.standard_error})


def _window(*curves: np.ndarray) -> Tuple[float, float]:
    return default_window(np.vstack(curves))


@experiment("crofton-lines")
def crofton_lines(config: ExperimentConfig) -> Outcome:
    chart = _crofton_chart(config)
    rng = np.random.default_rng(_seed(config))
    tol = config.tolerance("residual", 1e-5)
    bent_threshold = config.tolerance("bent", 1e-3)
    rows = []
    for i in range(int(config.param("lines", 5))):
        x0 = rng.uniform(-1.0, 1.0, chart.dim)
        v0 = rng.standard_normal(chart.dim)
        normal = rng.standard_normal(chart.dim)
        normal -= (normal @ v0) / (v0 @ v0) * v0
        straight = line_geodesic_residual(chart.measure, x0, v0, **_quadrature(chart))
        bent = line_geodesic_residual(chart.measure, x0, v0, bump=0.2, bump_direction=normal, **_quadrature(chart))
        rows.append({"line": i, "residual": straight, "bent_residual": bent})
    frame = pd.DataFrame(rows, columns=["line", "residual", "bent_residual"])
    outputs = {"max_residual": float(frame["residual"].max()), "min_bent_residual": float(frame["bent_residual"].min())}
    passed = outputs["max_residual"] <= tol and outputs["min_bent_residual"] > bent_threshold
    return Outcome(outputs, {"residual": tol, "bent": bent_threshold}, passed, series={"lines": frame})


# ---------------------------------------------------------------------------
# Cartan
# ---------------------------------------------------------------------------

@experiment("cartan-invariants")
def cartan_invariants(config: ExperimentConfig) -> Outcome:
    chart = build_chart(config.chart) if config.chart else _default_sphere_chart()
    tol = config.tolerance("residual", 1e-4)
    lower = np.asarray(config.param("lower", [-1.0, -1.0]), dtype=float)
    upper = np.asarray(config.param("upper", [1.0, 1.0]), dtype=float)
    grid = int(config.param("grid", 0))
    if grid:
        axes = [np.linspace(lo, hi, grid) for lo, hi in zip(lower, upper)]
        angles = np.linspace(0.0, 2.0 * np.pi, int(config.param("angles", 8)), endpoint=False)
        z = np.stack(np.meshgrid(*axes, angles, indexing="ij"), axis=-1).reshape(-1, 3)
    else:
        z = sample_bundle(np.random.default_rng(_seed(config)), lower, upper, int(config.param("samples", 200)))
    table = invariant_table(chart, z)
    worst = [float(table[f"residual_{i}"].max()) for i in (1, 2, 3)]
    outputs = {"points": int(len(table)), "max_residuals": worst, "max_abs_I": float(table["I"].abs().max()),
               "K_range": [float(table["K"].min()), float(table["K"].max())],
               "J_range": [float(table["J"].min()), float(table["J"].max())]}
    return Outcome(outputs, {"residual": tol}, max(worst) <= tol, series={"invariants": table})


def _suite_charts(config: ExperimentConfig) -> Dict[str, FinslerChart]:
    box = ([-1.0, -1.0], [1.0, 1.0])
    strength = float(config.param("randers_strength", 0.1))
    return {
        "euclidean": RiemannianChart(constant_metric(np.eye(2)), 2, *box, name="euclidean"),
        "round-sphere": RiemannianChart(stereographic_sphere_metric, 2, *box, name="round-sphere"),
        "randers": RandersChart(constant_metric(np.eye(2)), rotational_drift(strength), 2, *box, name="randers"),
    }


@experiment("cartan-suite")
def cartan_suite(config: ExperimentConfig) -> Outcome:
    samples = int(config.param("samples", 1000))
    seed = _seed(config)
    residual_tol = config.tolerance("residual", 1e-4)
    i_tol = config.tolerance("riemannian_I", 1e-4)
    k_tol = config.tolerance("sphere_K", 1e-3)
    geodesic_tol = config.tolerance("geodesic_curvature", 1e-5)
    h_tol = config.tolerance("h_agreement", 1e-2)
    outputs: Dict[str, Any] = {}
    checks: List[bool] = []
    tables = []
    for name, chart in _suite_charts(config).items():
        report = structure_residuals(chart, samples, seed, tolerance=residual_tol)
        outputs[name] = report.to_dict()
        checks.append(report.passed)
        if name != "randers":
            checks.append(report.max_abs_I <= i_tol)
        table = report.table.copy()
        table.insert(0, "chart", name)
        tables.append(table)
    sphere_K = tables[1]["K"]
    outputs["sphere_K_error"] = float(np.max(np.abs(sphere_K - 1.0)))
    checks.append(outputs["sphere_K_error"] <= k_tol)

    sphere = _suite_charts(config)["round-sphere"]
    trajectory = geodesic(sphere, [0.1, -0.2], [1.0, 0.4], float(config.param("geodesic_T", 0.6)),
                          int(config.param("geodesic_steps", 120)))
    outputs["max_geodesic_curvature"] = float(np.max(np.abs(trajectory_curvature(sphere, trajectory))))
    checks.append(outputs["max_geodesic_curvature"] <= geodesic_tol)

    arc = circle_arc(0.5, -0.6, 0.6, dim=2)
    t0 = np.array([0.0])
    velocity = arc.jacobian(t0)[:, 0]
    acceleration = -arc.points(t0)
    cartan_h = curve_mean_curvature(sphere, arc.points(t0), velocity, acceleration)
    variation_h = mean_curvature_covector(sphere, arc, t0, config.param("bump_radius"), extrapolate=True).covector
    outputs["h_cartan"] = cartan_h
    outputs["h_variation"] = variation_h
    outputs["h_residual"] = curve_residual_covector(sphere, arc, 0.0)
    outputs["h_gap"] = float(np.linalg.norm(cartan_h - variation_h) / np.linalg.norm(variation_h))
    checks.append(outputs["h_gap"] <= h_tol)

    tolerances = {"residual": residual_tol, "riemannian_I": i_tol, "sphere_K": k_tol,
                  "geodesic_curvature": geodesic_tol, "h_agreement": h_tol}
    return Outcome(outputs, tolerances, all(checks), series={"invariants": pd.concat(tables, ignore_index=True)})


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------

def load_config(data: Dict[str, Any], path: Optional[str] = None) -> ExperimentConfig:
    """Validate a config dictionary against the experiment schema."""
    validate(data, load_schema("experiment.schema.json"), path)
    return ExperimentConfig.from_dict(data)


class ExperimentRunner:
    """
    Runs named experiments and records their reports.
    """

    def __init__(self, out_dir: Optional[str] = None, write_csv: Optional[bool] = None):
        """
        Initialize the runner.

        Args:
            out_dir: Directory for reports; defaults to PATHS["results_dir"]
            write_csv: Whether to write CSV series
        """
        self.out_dir = out_dir or PATHS["results_dir"]
        self.write_csv = EXPERIMENT_CONFIG["write_csv"] if write_csv is None else write_csv

    def run(self, config: ExperimentConfig) -> Tuple[ExperimentReport, RunRecord]:
        """
        Run an experiment, write its report files and return them.

        Args:
            config: Validated experiment config

        Returns:
            The report and the runtime record
        """
        if config.experiment not in EXPERIMENTS:
            raise ConfigValidationError(f"unknown experiment {config.experiment!r}", "experiment")
        logger.info("running %s (seed %s)", config.experiment, config.seed)

        # Measure memory usage before
        process = psutil.Process()
        memory_before = process.memory_info().rss / (1024 * 1024)

        start_time = time.time()
        outcome = EXPERIMENTS[config.experiment](config)
        runtime_ms = (time.time() - start_time) * 1000

        memory_usage = process.memory_info().rss / (1024 * 1024) - memory_before

        report = ExperimentReport(
            experiment=config.experiment,
            inputs=config.to_dict(),
            outputs=outcome.outputs,
            tolerances=outcome.tolerances,
            passed=bool(outcome.passed),
            error_estimates=outcome.error_estimates,
            series=outcome.series,
        )
        files = self._write(config.report_name, report)
        record = RunRecord(config.experiment, int(runtime_ms), float(memory_usage), self._get_hardware_info(), files,
                           settings=get_settings())
        sidecar = os.path.join(self.out_dir, f"{config.report_name}.run.json")
        with open(sidecar, "w", encoding="utf-8") as handle:
            handle.write(stable_dumps(record.to_dict()))
        logger.info("%s %s in %.1f s -> %s", config.experiment, "passed" if report.passed else "FAILED",
                    runtime_ms / 1000.0, files[0])
        return report, record

    def _write(self, name: str, report: ExperimentReport) -> List[str]:
        os.makedirs(self.out_dir, exist_ok=True)
        path = os.path.join(self.out_dir, f"{name}.json")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(report.to_json())
        files = [path]
        if self.write_csv:
            for key, frame in report.series.items():
                csv_path = os.path.join(self.out_dir, f"{name}.{key}.csv")
                frame.to_csv(csv_path, index=False, float_format=f"%.{EXPERIMENT_CONFIG['float_digits']}g")
                files.append(csv_path)
        return files

    def _get_hardware_info(self) -> Dict[str, Any]:
        """
        Get information about the hardware environment.

        Returns:
            Hardware configuration information
        """
        return {
            "cpu": platform.processor(),
            "cores": psutil.cpu_count(logical=False),
            "logical_cores": psutil.cpu_count(logical=True),
            "memory_total_gb": round(psutil.virtual_memory().total / (1024**3), 2),
            "platform": platform.platform(),
            "python_version": platform.python_version()
        }
