"""
Command-line surface: mass, flatten, flow, sweep and check.
"""
import argparse
import logging
import os
from typing import List, Optional

from pydantic import ValidationError

from ..geometry.errors import AdmissionError
from ..geometry.mass import adm_mass
from ..geometry.solver import scalar_flatten
from ..utils.config_utils import ensure_directories, load_config
from ..utils.io_utils import load_radial_metric, output_path, save_radial_solution, save_record, write_csv
from .checks import check_all
from .runner import ScenarioRunner, load_scenario, with_overrides

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="Output directory (overrides PMT_OUTPUT_DIR and config)")
    common.add_argument("--config", default=None, help="Configuration file (default config.yaml)")
    common.add_argument("--seed", type=int, default=None, help="Seed for sampled points")
    common.add_argument("--verbose", action="store_true", help="Debug logging")

    scenario = argparse.ArgumentParser(add_help=False)
    scenario.add_argument("scenario", help="Scenario YAML file")
    scenario.add_argument("--grid-points", type=int, default=None, help="Grid points per decade")
    scenario.add_argument("--a", type=float, default=None, help="Cutoff scale a (> 3R)")
    scenario.add_argument("--workers", type=int, default=None, help="Worker processes for family members")

    parser = argparse.ArgumentParser(prog="pmt-lab", description="Near-equality mass laboratory")
    commands = parser.add_subparsers(dest="command", required=True)

    mass = commands.add_parser("mass", parents=[common], help="ADM mass of a radial metric table")
    mass.add_argument("metric_file", help="Columnar r A B table")

    flatten = commands.add_parser("flatten", parents=[common], help="Scalar-flatten a radial metric table")
    flatten.add_argument("metric_file", help="Columnar r A B table")

    commands.add_parser("flow", parents=[common, scenario], help="Mass flow m(s) per family member")
    commands.add_parser("sweep", parents=[common, scenario], help="Near-equality sweep over a family")
    commands.add_parser("check", parents=[common], help="Run the invariant suite")
    return parser


def _stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def _mass(args, config) -> int:
    g = load_radial_metric(args.metric_file)
    report = adm_mass(g)
    directory = ensure_directories(config, args.out)
    save_record(report.to_record(), output_path(directory, f"{_stem(args.metric_file)}_mass.json"))
    write_csv([report.csv_row()], output_path(directory, f"{_stem(args.metric_file)}_mass.csv"))
    print(f"m = {report.extrapolated_mass!r} (order {report.convergence_order:.3g}, {report.fit_method})")
    return 0


def _flatten(args, config) -> int:
    g = load_radial_metric(args.metric_file)
    result = scalar_flatten(g)
    directory = ensure_directories(config, args.out)
    stem = _stem(args.metric_file)
    record = result.to_record()
    save_record(record, output_path(directory, f"{stem}_flatten.json"))
    save_radial_solution(g.r, result.w, output_path(directory, f"{stem}_w.txt"), n=g.n, quantity="w")
    print(f"m(g) = {record.mass_g!r}, m(g_tilde) = {record.mass_g_tilde!r}, min v = {record.v_min!r}")
    return 0


def _scenario(args):
    scenario = load_scenario(args.scenario)
    return with_overrides(scenario, a=args.a, grid_points=args.grid_points, seed=args.seed)


def _flow(args, config) -> int:
    runner = ScenarioRunner(config_path=args.config, workers=args.workers, output_dir=args.out, progress=True)
    artifacts = runner.flow(_scenario(args))
    for name, path in sorted(artifacts.items()):
        print(f"{name}: {path}")
    return 0


def _sweep(args, config) -> int:
    runner = ScenarioRunner(config_path=args.config, workers=args.workers, output_dir=args.out, progress=True)
    table = runner.sweep(_scenario(args))
    for row in table.rows:
        sup = "" if row.sup_deviation is None else f"{row.sup_deviation:.6e}"
        print(f"{row.member:<28} m = {row.mass!r:<24} sup|U-1| = {sup:<14} {row.status}")
    if table.fitted_power is not None:
        print(f"fitted power: {table.fitted_power:.4f}")
    for threshold in table.thresholds:
        print(f"delta({threshold.epsilon:g}) = {threshold.delta}")
    return 0


def _check_command(args, config) -> int:
    seed = args.seed if args.seed is not None else int(config.get("SEED", 0))
    return check_all(output_dir=args.out, seed=seed, config_path=args.config)


_COMMANDS = {"mass": _mass, "flatten": _flatten, "flow": _flow, "sweep": _sweep, "check": _check_command}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments and dispatch.

    Returns:
        Process exit status (0 success, 1 failed checks, 2 invalid input or pipeline error)
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    config = load_config(args.config)
    try:
        return _COMMANDS[args.command](args, config)
    except (AdmissionError, ValidationError) as e:
        logger.error(f"Invalid input: {e}")
        return 2
    except (ValueError, RuntimeError, OSError) as e:
        logger.error(f"{args.command} failed: {type(e).__name__}: {e}")
        return 2
