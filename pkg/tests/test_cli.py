"""Tests for the command-line surface and its exit codes."""

import json

import numpy as np
import pytest

from src.cli import EXIT_ERROR, EXIT_OK, EXIT_USAGE, SUBCOMMANDS, build_parser, main, resolve_config
from src.experiments import EXPERIMENTS


def parse(*argv):
    return build_parser().parse_args(list(argv))


def test_subcommands_map_to_experiments():
    for (group, action), name in SUBCOMMANDS.items():
        assert parse(group, action).experiment == name


def test_resolve_shipped_config_with_overrides():
    data = resolve_config(parse("density", "eval", "--seed", "7", "--param", "nodes=64",
                                "--param", "route=legendre"))
    assert data["experiment"] == "density-eval"
    assert data["seed"] == 7
    assert data["parameters"]["nodes"] == 64
    assert data["parameters"]["route"] == "legendre"
    assert data["parameters"]["expected"] == 1.0


def test_resolve_specific_flags():
    data = resolve_config(parse("variation", "h", "--point", "[0.1, 0.2]",
                                "--chart", '{"type": "minkowski", "norm": {"type": "euclidean", "dim": 3}}'))
    assert data["parameters"]["point"] == [0.1, 0.2]
    assert data["chart"]["norm"]["dim"] == 3
    assert resolve_config(parse("cartan", "invariants", "--grid", "4"))["parameters"]["grid"] == 4
    assert resolve_config(parse("experiment", "main-theorem", "--seed", "5"))["seed"] == 5


def test_run_reads_config_file(tmp_path):
    path = tmp_path / "custom.json"
    path.write_text(json.dumps({"experiment": "geodesic-shoot", "parameters": {"T": 0.5}}))
    data = resolve_config(parse("run", str(path), "--param", "steps=50"))
    assert data["parameters"] == {"T": 0.5, "steps": 50}


@pytest.mark.parametrize("argv", [
    [],
    ["density"],
    ["density", "eval", "--param", "novalue"],
    ["density", "eval", "--chart", "{not json"],
    ["experiment", "no-such-experiment"],
])
def test_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


def test_help_exits_cleanly(capsys):
    assert main(["--help"]) == EXIT_OK
    assert "finsler-lab" in capsys.readouterr().out


def test_missing_config_file(tmp_path):
    assert main(["run", str(tmp_path / "missing.json"), "--out-dir", str(tmp_path)]) == EXIT_USAGE


def test_config_for_other_experiment(tmp_path):
    path = tmp_path / "other.json"
    path.write_text(json.dumps({"experiment": "geodesic-shoot"}))
    assert main(["density", "eval", "--config", str(path), "--out-dir", str(tmp_path)]) == EXIT_USAGE


def test_schema_error_is_usage(tmp_path):
    assert main(["density", "eval", "--chart", '{"type": "hexagonal"}', "--out-dir", str(tmp_path)]) == EXIT_USAGE


def test_library_error_exit_code(tmp_path):
    chart = '{"type": "minkowski", "norm": {"type": "randers", "b": [1.5, 0.0, 0.0]}}'
    assert main(["density", "eval", "--chart", chart, "--out-dir", str(tmp_path)]) == EXIT_ERROR


def test_density_eval_end_to_end(tmp_path, capsys):
    assert main(["density", "eval", "--out-dir", str(tmp_path), "--no-csv"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "holmes_thompson" in out
    assert "report:" in out
    report = json.loads((tmp_path / "density-eval.json").read_text())
    assert report["pass"] is True


def test_failed_check_exit_code(tmp_path):
    assert main(["density", "eval", "--param", "expected=2.0", "--out-dir", str(tmp_path)]) == 1


def test_geodesic_flags_land_in_parameters():
    data = resolve_config(parse("geodesic", "shoot", "--x0", "[0.5, 0.0]", "--v0", "[0.0, 1.0]",
                                "--T", "0.25", "--steps", "40"))
    assert data["parameters"]["x0"] == [0.5, 0.0]
    assert data["parameters"]["v0"] == [0.0, 1.0]
    assert data["parameters"]["T"] == 0.25
    assert data["parameters"]["steps"] == 40
    length = resolve_config(parse("crofton", "check-length", "--mc-samples", "1000"))
    assert length["parameters"]["mc_samples"] == 1000
    assert resolve_config(parse("crofton", "check-lines", "--lines", "3"))["parameters"]["lines"] == 3


def test_measure_flag_keeps_crofton_quadrature():
    data = resolve_config(parse("experiment", "main-theorem", "--trials", "2",
                                "--measure", '{"kind": "gaussian_bump", "amplitude": 0.5, "base": 1.0}'))
    assert data["parameters"]["trials"] == 2
    assert data["chart"]["type"] == "crofton"
    assert data["chart"]["measure"] == {"kind": "gaussian_bump", "amplitude": 0.5, "base": 1.0, "dim": 3}
    assert data["chart"]["quadrature"]["polar_nodes"] == 8


def test_chart_from_file(tmp_path, capsys):
    chart = tmp_path / "sphere.json"
    chart.write_text(json.dumps({"type": "riemannian", "dim": 2, "metric": {"type": "stereographic"},
                                 "lower": [-3.0, -3.0], "upper": [3.0, 3.0]}))
    argv = ["geodesic", "shoot", "--chart", str(chart), "--x0", "[0, 0]", "--v0", "[1, 0]", "--T", "0.5",
            "--out-dir", str(tmp_path), "--no-csv"]
    assert main(argv) == EXIT_OK
    report = json.loads((tmp_path / "geodesic-shoot.json").read_text())
    assert report["inputs"]["chart"]["metric"]["type"] == "stereographic"
    assert report["inputs"]["parameters"]["T"] == 0.5


def test_unreadable_chart_file(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert main(["density", "eval", "--chart", str(broken), "--out-dir", str(tmp_path)]) == EXIT_USAGE


def test_unknown_option_is_usage(tmp_path):
    assert main(["density", "eval", "--param", "route=bogus", "--out-dir", str(tmp_path)]) == EXIT_USAGE


def test_domain_error_exit_code(tmp_path):
    assert main(["variation", "h", "--param", "bump_radius=5.0", "--out-dir", str(tmp_path)]) == EXIT_ERROR


def test_unexpected_exception_exit_code(tmp_path, monkeypatch):
    def singular(config):
        raise np.linalg.LinAlgError("singular matrix")

    monkeypatch.setitem(EXPERIMENTS, "density-eval", singular)
    assert main(["density", "eval", "--out-dir", str(tmp_path)]) == EXIT_ERROR
