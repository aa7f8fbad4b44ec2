"""Tests for shipped experiment configs and the runner's report files."""

import glob
import json
import os

import pandas as pd
import pytest

from config.settings import PATHS
from src.descriptors import load_schema
from src.exceptions import ConfigValidationError
from src.experiments import EXPERIMENTS, ExperimentRunner, load_config
from src.models import ExperimentConfig

SHIPPED = sorted(glob.glob(os.path.join(PATHS["experiments_dir"], "*.json")))


def shipped(name, **parameters):
    with open(os.path.join(PATHS["experiments_dir"], f"{name}.json"), "r", encoding="utf-8") as handle:
        data = json.load(handle)
    data.setdefault("parameters", {}).update(parameters)
    return load_config(data)


def test_registry_matches_schema():
    names = load_schema("experiment.schema.json")["properties"]["experiment"]["enum"]
    assert sorted(names) == sorted(EXPERIMENTS)


@pytest.mark.parametrize("path", SHIPPED, ids=os.path.basename)
def test_shipped_configs_validate(path):
    with open(path, "r", encoding="utf-8") as handle:
        config = load_config(json.load(handle), path)
    assert config.experiment in EXPERIMENTS
    assert os.path.basename(path) == f"{config.experiment}.json"


def test_every_experiment_has_a_config():
    assert {os.path.basename(p)[:-5] for p in SHIPPED} == set(EXPERIMENTS)


@pytest.mark.parametrize("data", [
    {"experiment": "euclidean-recovery"},
    {"experiment": "density-eval", "verbose": True},
    {"experiment": "density-eval", "tolerances": {"relative": -1.0}},
    {"experiment": "not-an-experiment"},
    {"experiment": "density-eval", "name": "has spaces"},
])
def test_load_config_rejects(data):
    with pytest.raises(ConfigValidationError):
        load_config(data)


def test_runner_rejects_unknown_experiment(tmp_path):
    with pytest.raises(ConfigValidationError):
        ExperimentRunner(str(tmp_path)).run(ExperimentConfig("unknown"))


def test_density_eval_needs_minkowski_chart(tmp_path):
    config = load_config({"experiment": "density-eval",
                          "chart": {"type": "riemannian", "dim": 2, "metric": {"type": "stereographic"}}})
    with pytest.raises(ConfigValidationError):
        ExperimentRunner(str(tmp_path)).run(config)


def test_runner_writes_report_series_and_sidecar(tmp_path):
    report, record = ExperimentRunner(str(tmp_path), write_csv=True).run(shipped("euclidean-recovery", samples=10))
    assert report.passed
    base = tmp_path / "euclidean-recovery"
    data = json.loads((tmp_path / "euclidean-recovery.json").read_text())
    assert data["pass"] is True
    assert data["determinism_sha256"] == report.determinism_hash
    assert data["inputs"]["parameters"]["samples"] == 10
    frame = pd.read_csv(f"{base}.samples.csv")
    assert list(frame.columns) == ["n", "k", "euclidean", "holmes_thompson", "busemann_hausdorff",
                                   "error_ht", "error_bh"]
    assert len(frame) == 10
    sidecar = json.loads((tmp_path / "euclidean-recovery.run.json").read_text())
    assert sidecar["output_files"] == record.output_files
    assert sidecar["settings"]["variation"]["bump_radius"] == record.settings["variation"]["bump_radius"]
    assert list(report.series) == ["samples"]
    assert "series" not in data
    assert "runtime_ms" not in data


def test_runner_without_csv(tmp_path):
    _, record = ExperimentRunner(str(tmp_path), write_csv=False).run(shipped("euclidean-recovery", samples=5))
    assert record.output_files == [str(tmp_path / "euclidean-recovery.json")]
    assert not list(tmp_path.glob("*.csv"))


def test_same_seed_same_hash(tmp_path):
    config = shipped("euclidean-recovery", samples=8)
    first, _ = ExperimentRunner(str(tmp_path / "a")).run(config)
    second, _ = ExperimentRunner(str(tmp_path / "b")).run(config)
    assert first.determinism_hash == second.determinism_hash
    assert (tmp_path / "a" / "euclidean-recovery.json").read_text().split('"timestamp"')[0] == \
        (tmp_path / "b" / "euclidean-recovery.json").read_text().split('"timestamp"')[0]
    config.seed += 1
    third, _ = ExperimentRunner(str(tmp_path / "c")).run(config)
    assert third.determinism_hash != first.determinism_hash


def test_named_report(tmp_path):
    config = shipped("density-eval")
    config.name = "randers-plane"
    report, record = ExperimentRunner(str(tmp_path)).run(config)
    assert report.passed
    assert record.output_files[0].endswith("randers-plane.json")
    assert report.outputs["holmes_thompson"] == pytest.approx(1.0, rel=1e-6)


@pytest.mark.slow
@pytest.mark.parametrize("name, parameters", [
    ("density-calibration", {"norms": 2, "samples": 20}),
    ("legendre-axioms", {"directions": 5}),
    ("geodesic-shoot", {}),
    ("classical-limits", {}),
    ("variation-h", {}),
    ("fiber-identity", {"points": 2}),
    ("crofton-lines", {"lines": 2}),
    ("cartan-invariants", {"grid": 3, "angles": 4}),
    ("euclidean-recovery", {"samples": 20}),
    ("cartan-suite", {"samples": 50}),
    ("main-theorem", {"trials": 2, "hausdorff": False}),
    ("crofton-length", {"mc_samples": 200000}),
])
def test_experiment_passes(tmp_path, name, parameters):
    report, _ = ExperimentRunner(str(tmp_path)).run(shipped(name, **parameters))
    assert report.passed, report.outputs


@pytest.mark.slow
def test_main_theorem_bends_the_given_patch(tmp_path):
    patch = {"type": "flat", "origin": [0.0, 0.0, 0.05], "axes": [[1.0, 0.0, 0.2], [0.0, 1.0, 0.0]],
             "lower": [-0.4, -0.4], "upper": [0.4, 0.4]}
    config = shipped("main-theorem", trials=1, hausdorff=False, nodes=16)
    config.patch = patch
    report, _ = ExperimentRunner(str(tmp_path)).run(config)
    assert report.outputs["bent_control"] == "flat-bent"
    assert report.outputs["discrimination_checked"] is True
    assert report.outputs["max_bent_ratio"] > report.outputs["max_first_variation"]


@pytest.mark.slow
def test_main_theorem_without_bend_records_skip(tmp_path):
    config = shipped("main-theorem", trials=1, hausdorff=False, nodes=8, bend=0.0)
    report, _ = ExperimentRunner(str(tmp_path), write_csv=False).run(config)
    assert report.outputs["bent_control"] is None
    assert report.outputs["discrimination_checked"] is False
    assert report.outputs["bent_ratios"] == []
