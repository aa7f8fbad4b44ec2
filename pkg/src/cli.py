"""
Command-line interface: every subcommand resolves to an experiment config,
runs it and prints a summary table.

Exit status: 0 pass, 1 failed check, 2 usage or config error, 3 numerical failure.
"""

import argparse
import json
import logging
import os
import sys
from typing import Any, Callable, Dict, List, Optional, Tuple

from tabulate import tabulate

from config.settings import LOGGING_CONFIG, PATHS, ensure_directories
from .exceptions import ConfigValidationError, FinslerLabError
from .experiments import EXPERIMENTS, ExperimentRunner, load_config
from .models import ExperimentReport, to_plain

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_ERROR = 0, 1, 2, 3

SUBCOMMANDS = {
    ("density", "eval"): "density-eval",
    ("density", "calibrate"): "density-calibration",
    ("geodesic", "shoot"): "geodesic-shoot",
    ("crofton", "check-length"): "crofton-length",
    ("crofton", "check-lines"): "crofton-lines",
    ("variation", "h"): "variation-h",
    ("cartan", "invariants"): "cartan-invariants",
}


def configure_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> None:
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        os.makedirs(os.path.dirname(log_file) or ".", exist_ok=True)
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(level=(level or LOGGING_CONFIG["level"]).upper(), format=LOGGING_CONFIG["format"],
                        handlers=handlers, force=True)


def _json_argument(text: str) -> Any:
    """Inline JSON, or the path of a JSON file."""
    if os.path.isfile(text):
        try:
            with open(text, "r", encoding="utf-8") as handle:
                return json.load(handle)
        except (OSError, json.JSONDecodeError) as exc:
            raise argparse.ArgumentTypeError(f"cannot read {text}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"neither a JSON file nor inline JSON: {exc}") from exc


def _param_argument(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError("parameters are key=value with a JSON value")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


# Per-experiment shortcuts: (flag, type, help); each lands in parameters under its dest name.
EXPERIMENT_FLAGS = {
    "geodesic-shoot": [("--x0", _json_argument, "Start point as a JSON list"),
                       ("--v0", _json_argument, "Initial velocity as a JSON list"),
                       ("--T", float, "Integration time"),
                       ("--steps", int, "RK4 steps")],
    "crofton-length": [("--measure", _json_argument, "Hyperplane measure descriptor (JSON or file)"),
                       ("--mc-samples", int, "Monte-Carlo sample count")],
    "crofton-lines": [("--measure", _json_argument, "Hyperplane measure descriptor (JSON or file)"),
                      ("--lines", int, "Number of random lines")],
    "variation-h": [("--point", _json_argument, "Parameter point q0 as a JSON list")],
    "cartan-invariants": [("--grid", int, "Grid points per coordinate")],
    "main-theorem": [("--measure", _json_argument, "Hyperplane measure descriptor (JSON or file)"),
                     ("--trials", int, "Number of random variations")],
}

FLAG_PARAMETERS = ("x0", "v0", "T", "steps", "mc_samples", "lines", "point", "grid", "trials")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Experiment config JSON (defaults to the shipped config)")
    parser.add_argument("--seed", type=int, help="Override the config seed")
    parser.add_argument("--out-dir", help=f"Report directory (default {PATHS['results_dir']})")
    parser.add_argument("--chart", type=_json_argument, help="Chart descriptor, inline JSON or a JSON file")
    parser.add_argument("--patch", type=_json_argument, help="Patch descriptor, inline JSON or a JSON file")
    parser.add_argument("--param", type=_param_argument, action="append", default=[],
                        help="Override a parameter, key=JSON (repeatable)")
    parser.add_argument("--no-csv", action="store_true", help="Skip CSV series")


def _add_flags(parser: argparse.ArgumentParser, flags: List[Tuple[str, Callable, str]]) -> None:
    for flag, kind, text in flags:
        parser.add_argument(flag, type=kind, help=text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="finsler-lab",
                                     description="Numerical Finsler geometry: densities, geodesics, minimality")
    parser.add_argument("--log-level", help="Logging level (default from FINSLER_LOG_LEVEL)")
    parser.add_argument("--log-file", help="Also log to this file")
    commands = parser.add_subparsers(dest="command", required=True)

    groups: Dict[str, argparse._SubParsersAction] = {}
    for (group, action), name in SUBCOMMANDS.items():
        if group not in groups:
            groups[group] = commands.add_parser(group, help=f"{group} experiments").add_subparsers(
                dest="action", required=True)
        sub = groups[group].add_parser(action, help=f"run {name}")
        _add_common(sub)
        sub.set_defaults(experiment=name)
        _add_flags(sub, EXPERIMENT_FLAGS.get(name, []))

    named = commands.add_parser("experiment", help="run a named experiment")
    named.add_argument("name", choices=sorted(EXPERIMENTS))
    _add_common(named)
    _add_flags(named, EXPERIMENT_FLAGS["main-theorem"])

    run = commands.add_parser("run", help="run an experiment config file")
    run.add_argument("config_file")
    _add_common(run)
    return parser


def _read_json(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigValidationError(str(exc), path) from exc


def _with_measure(chart: Dict[str, Any], measure: Dict[str, Any]) -> Dict[str, Any]:
    """Crofton chart for `measure`, keeping the quadrature and dimension of a Crofton `chart`."""
    base = chart if chart.get("type", chart.get("kind")) == "crofton" else {"type": "crofton"}
    measure = dict(measure)
    if "dim" not in measure and "dim" in base.get("measure", {}):
        measure["dim"] = base["measure"]["dim"]
    return {**base, "measure": measure}


def resolve_config(args: argparse.Namespace) -> Dict[str, Any]:
    """Merge the config file (or the shipped default) with command-line overrides."""
    if args.command == "run":
        path = args.config_file
        name = None
    else:
        name = args.name if args.command == "experiment" else args.experiment
        path = args.config or os.path.join(PATHS["experiments_dir"], f"{name}.json")
    data = _read_json(path) if os.path.exists(path) or args.command == "run" or args.config else {}
    if name is not None:
        data.setdefault("experiment", name)
        if data["experiment"] != name:
            raise ConfigValidationError(f"config is for {data['experiment']!r}, not {name!r}", path)
    if args.seed is not None:
        data["seed"] = args.seed
    if args.chart is not None:
        data["chart"] = args.chart
    if args.patch is not None:
        data["patch"] = args.patch
    parameters = dict(data.get("parameters", {}))
    for key, value in args.param:
        parameters[key] = value
    for key in FLAG_PARAMETERS:
        if getattr(args, key, None) is not None:
            parameters[key] = getattr(args, key)
    if getattr(args, "measure", None) is not None:
        data["chart"] = _with_measure(data.get("chart") or {}, args.measure)
    if parameters:
        data["parameters"] = parameters
    return data


def summarize(report: ExperimentReport) -> str:
    """Two-column table of the scalar outputs."""
    rows = []
    for key, value in sorted(to_plain(report.outputs).items()):
        if isinstance(value, (int, float, str, bool)) or value is None:
            rows.append([key, value])
    rows.append(["pass", report.passed])
    return tabulate(rows, headers=["output", "value"], tablefmt="simple", floatfmt=".6g")


def _label(args: argparse.Namespace) -> str:
    return getattr(args, "experiment", None) or getattr(args, "name", None) or "run"


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    configure_logging(args.log_level, args.log_file)
    try:
        config = load_config(resolve_config(args))
        if args.out_dir is None:
            ensure_directories()
        runner = ExperimentRunner(args.out_dir, write_csv=False if args.no_csv else None)
        report, record = runner.run(config)
    except ConfigValidationError as exc:
        logger.error("invalid config: %s", exc)
        return EXIT_USAGE
    except FinslerLabError as exc:
        logger.error("%s failed: %s", _label(args), exc)
        return EXIT_ERROR
    except Exception as exc:
        logger.error("%s failed with %s: %s", _label(args), type(exc).__name__, exc)
        logger.debug("traceback", exc_info=True)
        return EXIT_ERROR
    print(summarize(report))
    print(f"report: {record.output_files[0]}")
    return EXIT_OK if report.passed else EXIT_FAILED
