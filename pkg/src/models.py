from typing import Dict, List, Any, Optional
from dataclasses import dataclass, field
import hashlib
import json
import math
from datetime import datetime

import numpy as np

from config.settings import EXPERIMENT_CONFIG


def _round(value: float, digits: int) -> float:
    if not math.isfinite(value) or value == 0.0:
        return value
    return float(f"{value:.{digits}g}")


def to_plain(obj: Any, digits: Optional[int] = None) -> Any:
    """
    Convert numpy scalars and arrays, tuples and nested containers to plain
    JSON types, rounding floats to `digits` significant digits.
    """
    digits = digits or EXPERIMENT_CONFIG["float_digits"]
    if isinstance(obj, dict):
        return {str(k): to_plain(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v, digits) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist(), digits)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = _round(float(obj), digits)
        return value if math.isfinite(value) else None
    if hasattr(obj, "to_dict"):
        return to_plain(obj.to_dict(), digits)
    return obj


def stable_dumps(obj: Any, digits: Optional[int] = None) -> str:
    """Sorted-key JSON with rounded floats; equal inputs give identical bytes."""
    return json.dumps(to_plain(obj, digits), sort_keys=True, indent=2, allow_nan=False) + "\n"


@dataclass
class ExperimentConfig:
    """
    A named experiment with its descriptors and numeric parameters.
    """
    experiment: str
    seed: Optional[int] = None
    chart: Dict[str, Any] = field(default_factory=dict)
    patch: Dict[str, Any] = field(default_factory=dict)
    parameters: Dict[str, Any] = field(default_factory=dict)
    tolerances: Dict[str, float] = field(default_factory=dict)
    name: Optional[str] = None

    @property
    def report_name(self) -> str:
        return self.name or self.experiment

    def param(self, key: str, default: Any = None) -> Any:
        return self.parameters.get(key, default)

    def tolerance(self, key: str, default: float) -> float:
        return float(self.tolerances.get(key, default))

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for the report's inputs section."""
        return {
            "experiment": self.experiment,
            "name": self.report_name,
            "seed": self.seed,
            "chart": self.chart,
            "patch": self.patch,
            "parameters": self.parameters,
            "tolerances": self.tolerances,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        """Create from an (already schema-validated) dictionary."""
        return cls(
            experiment=data["experiment"],
            seed=data.get("seed"),
            chart=data.get("chart", {}),
            patch=data.get("patch", {}),
            parameters=data.get("parameters", {}),
            tolerances=data.get("tolerances", {}),
            name=data.get("name"),
        )


@dataclass
class ExperimentReport:
    """
    Results of one experiment run: inputs, outputs, tolerances, error
    estimates and the pass/fail verdict.
    """
    experiment: str
    inputs: Dict[str, Any]
    outputs: Dict[str, Any]
    tolerances: Dict[str, Any]
    passed: bool
    error_estimates: Dict[str, Any] = field(default_factory=dict)
    series: Dict[str, Any] = field(default_factory=dict)
    timestamp: datetime = field(default_factory=datetime.now)

    def content(self) -> Dict[str, Any]:
        """Everything that must be reproducible from the seed."""
        return to_plain({
            "experiment": self.experiment,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "tolerances": self.tolerances,
            "error_estimates": self.error_estimates,
            "pass": self.passed,
        })

    @property
    def determinism_hash(self) -> str:
        return hashlib.sha256(stable_dumps(self.content()).encode("utf-8")).hexdigest()

    def to_dict(self) -> Dict[str, Any]:
        result = self.content()
        result["determinism_sha256"] = self.determinism_hash
        result["timestamp"] = self.timestamp.isoformat()
        return result

    def to_json(self) -> str:
        return stable_dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentReport':
        timestamp = datetime.now()
        if data.get("timestamp"):
            try:
                timestamp = datetime.fromisoformat(data["timestamp"])
            except ValueError:
                pass
        return cls(
            experiment=data["experiment"],
            inputs=data.get("inputs", {}),
            outputs=data.get("outputs", {}),
            tolerances=data.get("tolerances", {}),
            passed=bool(data.get("pass", False)),
            error_estimates=data.get("error_estimates", {}),
            timestamp=timestamp,
        )


@dataclass
class RunRecord:
    """
    Runtime measurements of an experiment; written next to the report, never into it.
    """
    experiment: str
    runtime_ms: int
    memory_usage_mb: float
    hardware_config: Dict[str, Any]
    output_files: List[str] = field(default_factory=list)
    settings: Dict[str, Any] = field(default_factory=dict)
    timestamp: datetime = field(default_factory=datetime.now)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "experiment": self.experiment,
            "runtime_ms": self.runtime_ms,
            "memory_usage_mb": self.memory_usage_mb,
            "hardware_config": self.hardware_config,
            "output_files": self.output_files,
            "settings": self.settings,
            "timestamp": self.timestamp.isoformat(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunRecord':
        hardware_config = data.get("hardware_config", {})
        if isinstance(hardware_config, str):
            try:
                hardware_config = json.loads(hardware_config)
            except json.JSONDecodeError:
                hardware_config = {}
        timestamp = datetime.now()
        if data.get("timestamp"):
            try:
                timestamp = datetime.fromisoformat(data["timestamp"])
            except ValueError:
                pass
        return cls(
            experiment=data["experiment"],
            runtime_ms=int(data.get("runtime_ms", 0)),
            memory_usage_mb=float(data.get("memory_usage_mb", 0.0)),
            hardware_config=hardware_config,
            output_files=data.get("output_files", []),
            settings=data.get("settings", {}),
            timestamp=timestamp,
        )
