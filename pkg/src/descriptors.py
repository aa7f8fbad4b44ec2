"""
JSON descriptors to library objects: norms, charts, hyperplane measures,
patches, polylines, variation fields, 2-vector sections and k-vectors.

Every builder validates its descriptor against schemas/descriptors.schema.json
first and raises ConfigValidationError on mismatch.
"""

import json
import logging
import os
from functools import lru_cache
from typing import Any, Dict, Optional

import jsonschema
import numpy as np

from config.settings import PATHS
from .crofton import (AnisotropicBumpMeasure, CroftonChart, GaussianBumpMeasure, HyperplaneMeasure,
                      UniformMeasure, detour_polyline, segment_polyline)
from .exceptions import ConfigValidationError
from .exterior import SimpleKVector
from .finsler import (FinslerChart, MinkowskiChart, RandersChart, RiemannianChart, conformal_bump_metric,
                      constant_drift, constant_metric, rotational_drift, stereographic_sphere_metric)
from .norms import EuclideanNorm, MinkowskiNorm, RandersNorm
from .variation import (ImmersedPatch, VariationField, circle_arc, constant_section, flat_patch, graph_patch,
                        rotating_section, sphere_cap, sphere_octant)

logger = logging.getLogger(__name__)


@lru_cache(maxsize=None)
def load_schema(name: str) -> Dict[str, Any]:
    with open(os.path.join(PATHS["schemas_dir"], name), "r", encoding="utf-8") as handle:
        return json.load(handle)


def validate(instance: Any, schema: Dict[str, Any], path: Optional[str] = None) -> None:
    """Raise ConfigValidationError with the most relevant jsonschema message."""
    validator = jsonschema.Draft202012Validator(schema)
    error = jsonschema.exceptions.best_match(validator.iter_errors(instance))
    if error is not None:
        location = "/".join(str(p) for p in error.absolute_path)
        prefix = f"{path}/{location}" if path and location else (path or location or None)
        raise ConfigValidationError(error.message, prefix)


def normalize_descriptor(descriptor: Any) -> Any:
    """Copy of `descriptor` with every `kind` key folded into `type`; an explicit `type` wins."""
    if isinstance(descriptor, dict):
        out = {key: normalize_descriptor(value) for key, value in descriptor.items()}
        if "kind" in out:
            kind = out.pop("kind")
            out.setdefault("type", kind)
        return out
    return descriptor


def validate_descriptor(descriptor: Dict[str, Any], kind: str, path: Optional[str] = None) -> Dict[str, Any]:
    """Normalize and validate; returns the normalized descriptor."""
    descriptor = normalize_descriptor(descriptor)
    schema = load_schema("descriptors.schema.json")
    validate(descriptor, {"$defs": schema["$defs"], "$ref": f"#/$defs/{kind}"}, path or kind)
    return descriptor


def _array(value, default=None):
    return default if value is None else np.asarray(value, dtype=float)


def build_norm(descriptor: Dict[str, Any]) -> MinkowskiNorm:
    descriptor = validate_descriptor(descriptor, "norm")
    if descriptor["type"] == "euclidean":
        return EuclideanNorm(_array(descriptor.get("A")), descriptor.get("dim"))
    b = _array(descriptor["b"])
    return RandersNorm(_array(descriptor.get("A"), np.eye(b.shape[0])), b)


def _metric_field(descriptor: Dict[str, Any], dim: int):
    kind = descriptor["type"]
    if kind == "stereographic":
        return stereographic_sphere_metric
    if kind == "conformal_bump":
        return conformal_bump_metric(descriptor.get("amplitude", 0.5), descriptor.get("width", 1.0),
                                     descriptor.get("center", [0.0] * dim))
    return constant_metric(_array(descriptor.get("A"), np.eye(dim)))


def _drift_field(descriptor: Dict[str, Any]):
    if descriptor["type"] == "constant":
        return constant_drift(descriptor["b"])
    return rotational_drift(descriptor.get("strength", 0.2))


def build_measure(descriptor: Dict[str, Any]) -> HyperplaneMeasure:
    descriptor = validate_descriptor(descriptor, "measure")
    params = {k: v for k, v in descriptor.items() if k not in ("type", "dim")}
    kind = descriptor["type"]
    dim = descriptor.get("dim", 3)
    if kind == "uniform":
        return UniformMeasure(dim, params.get("base", 1.0))
    if kind == "gaussian_bump":
        return GaussianBumpMeasure(dim, **params)
    return AnisotropicBumpMeasure(dim, **params)


def build_chart(descriptor: Dict[str, Any]) -> FinslerChart:
    """
    Build a chart from a descriptor such as
    {"type": "randers", "dim": 2, "metric": {"type": "constant"},
     "drift": {"type": "constant", "b": [0.1, 0.0]}}.
    """
    descriptor = validate_descriptor(descriptor, "chart")
    kind = descriptor["type"]
    lower, upper = descriptor.get("lower"), descriptor.get("upper")
    if kind == "minkowski":
        return MinkowskiChart(build_norm(descriptor["norm"]), lower, upper)
    if kind == "crofton":
        return CroftonChart(build_measure(descriptor["measure"]), lower, upper, **descriptor.get("quadrature", {}))
    dim = descriptor["dim"]
    metric = _metric_field(descriptor["metric"], dim)
    if kind == "riemannian":
        return RiemannianChart(metric, dim, lower, upper, descriptor.get("name", "riemannian"))
    chart = RandersChart(metric, _drift_field(descriptor["drift"]), dim, lower, upper,
                         descriptor.get("name", "randers"))
    if lower is not None and upper is not None:
        corners = np.array(np.meshgrid(*zip(lower, upper), indexing="ij")).reshape(dim, -1).T
        chart.validate(np.vstack([corners, 0.5 * (np.asarray(lower) + np.asarray(upper))]))
    return chart


def build_patch(descriptor: Dict[str, Any]) -> ImmersedPatch:
    descriptor = validate_descriptor(descriptor, "patch")
    kind = descriptor["type"]
    if kind == "flat":
        return flat_patch(descriptor["origin"], descriptor["axes"], descriptor["lower"], descriptor["upper"])
    if kind == "sphere_octant":
        return sphere_octant(descriptor.get("radius", 1.0))
    if kind == "sphere_cap":
        return sphere_cap(descriptor.get("radius", 1.0), descriptor.get("half_width", 0.5))
    if kind == "circle_arc":
        return circle_arc(descriptor.get("radius", 1.0), descriptor.get("start", -0.5),
                          descriptor.get("stop", 0.5), descriptor.get("dim", 3))
    return graph_patch(descriptor.get("height", 0.0), descriptor.get("curvature", 0.0),
                       descriptor["lower"], descriptor["upper"])


def build_curve(descriptor: Dict[str, Any]) -> np.ndarray:
    """Polyline (N, n) from a segment or detour descriptor."""
    descriptor = validate_descriptor(descriptor, "curve")
    if descriptor["type"] == "segment":
        return segment_polyline(descriptor["start"], descriptor["end"], descriptor.get("points", 2))
    return detour_polyline(descriptor["start"], descriptor["end"], descriptor.get("height", 0.5),
                           descriptor.get("points", 201))


def build_field(descriptor: Dict[str, Any]) -> VariationField:
    descriptor = validate_descriptor(descriptor, "field")
    constant = np.asarray(descriptor["constant"], dtype=float)
    center = np.atleast_1d(np.asarray(descriptor["center"], dtype=float))
    linear = descriptor.get("linear", np.zeros((constant.shape[0], center.shape[0])))
    return VariationField(center, descriptor["radius"], constant, linear, descriptor.get("profile", "polynomial"))


def build_section(descriptor: Dict[str, Any]):
    descriptor = validate_descriptor(descriptor, "section")
    if descriptor["type"] == "constant":
        return constant_section(descriptor.get("frame", [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
    return rotating_section(descriptor.get("rate", 0.5))


def build_kvector(descriptor: Dict[str, Any]) -> SimpleKVector:
    descriptor = validate_descriptor(descriptor, "kvector")
    return SimpleKVector(np.asarray(descriptor["factors"], dtype=float))
