"""
Scenario runner: each family member goes through flattening, mass, mass flow
and the oscillation check, and lands as one row of a sweep table.
"""
import logging
import os
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml
from pydantic import ValidationError

from .. import __version__
from ..geometry.deformation import (
    FlowRun,
    build_flow_run,
    delta_gamma_experiment,
    delta_gamma_window,
    mass_curve,
    oscillation_bound_check,
)
from ..geometry.harmonic import sup_deviation
from ..geometry.mass import adm_mass
from ..geometry.solver import scalar_flatten
from ..schemas.models import DeltaThreshold, Scenario, SweepRow, SweepSummaryRecord
from ..utils.config_utils import ensure_directories, load_config
from ..utils.io_utils import output_path, save_record, write_csv
from ..utils.parallel_utils import parallel_map
from .families import FamilyMember, family_members
from .plots import plot_deviation_vs_mass, plot_mass_curves

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    "member", "mass", "a", "sup_deviation", "mass_flattened", "sup_flattened_gap", "mdot0", "mdot0_fd",
    "mdot0_fd_total", "oscillation_ratio", "flow_verdict", "status", "scenario_hash", "version",
]
MONOTONE_COLUMNS = ("sup_deviation", "mdot0")


def load_scenario(path: str) -> Scenario:
    """
    Read and validate a YAML scenario file.

    Raises:
        pydantic.ValidationError: a parameter is outside its admissible range
    """
    with open(path, "r") as f:
        data = yaml.safe_load(f) or {}
    try:
        return Scenario.model_validate(data)
    except ValidationError as e:
        logger.error(f"Invalid scenario {path}: {e}")
        raise


def with_overrides(scenario: Scenario, a: Optional[float] = None, grid_points: Optional[int] = None,
                   seed: Optional[int] = None) -> Scenario:
    """Apply CLI overrides and re-validate."""
    data = scenario.model_dump()
    if a is not None:
        data["a"] = a
    if grid_points is not None:
        data["grid"]["points_per_decade"] = grid_points
    if seed is not None:
        data["seed"] = seed
    return Scenario.model_validate(data)


# ---------------------------------------------------------------------------
# Sweep table
# ---------------------------------------------------------------------------

def fit_power(masses: Sequence[float], deviations: Sequence[float]) -> Optional[float]:
    """Least-squares slope of log(deviation) against log(mass) over positive pairs."""
    pairs = [(m, d) for m, d in zip(masses, deviations)
             if m is not None and d is not None and m > 0 and d > 0]
    if len(pairs) < 2:
        return None
    logm, logd = np.log(np.array(pairs)).T
    if np.ptp(logm) == 0:
        return None
    return float(np.polyfit(logm, logd, 1)[0])


def delta_thresholds(rows: Sequence[SweepRow], epsilons: Sequence[float]) -> List[DeltaThreshold]:
    """
    delta(eps): the largest tabulated mass whose row, and every row of smaller
    mass, has sup|U-1| < eps. None when the smallest row already fails.
    """
    ordered = [row for row in rows if row.mass is not None and row.sup_deviation is not None]
    thresholds = []
    for eps in epsilons:
        delta = None
        for row in ordered:
            if row.sup_deviation >= eps:
                break
            delta = row.mass
        thresholds.append(DeltaThreshold(epsilon=eps, delta=delta))
    return thresholds


def _monotone(rows: Sequence[SweepRow], column: str) -> bool:
    values = [getattr(row, column) for row in rows if row.status == "ok"]
    values = [v for v in values if v is not None]
    return all(b >= a - 1e-12 * max(1.0, abs(a)) for a, b in zip(values, values[1:]))


@dataclass
class SweepTable:
    """Rows sorted by mass (failed rows last) with delta(epsilon) and monotonicity flags."""
    scenario: Scenario
    rows: List[SweepRow]
    thresholds: List[DeltaThreshold] = field(default_factory=list)
    fitted_power: Optional[float] = None
    monotone: Dict[str, bool] = field(default_factory=dict)
    artifacts: Dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_rows(cls, scenario: Scenario, rows: Sequence[SweepRow]) -> "SweepTable":
        ordered = sorted(rows, key=lambda row: (row.mass is None, row.mass if row.mass is not None else 0.0,
                                                row.member))
        ok = [row for row in ordered if row.status == "ok"]
        table = cls(scenario=scenario, rows=ordered)
        table.thresholds = delta_thresholds(ok, scenario.sweep.epsilons)
        table.fitted_power = fit_power([row.mass for row in ok], [row.sup_deviation for row in ok])
        table.monotone = {column: _monotone(ordered, column) for column in MONOTONE_COLUMNS}
        for column, flag in table.monotone.items():
            if not flag:
                logger.warning(f"Column {column} is not monotone in the mass")
        return table

    @property
    def failures(self) -> int:
        return sum(1 for row in self.rows if row.status != "ok")

    def summary(self) -> SweepSummaryRecord:
        return SweepSummaryRecord(
            name=self.scenario.name, scenario_hash=self.scenario.scenario_hash(), version=__version__,
            n=self.scenario.n, a=self.scenario.a, family=self.scenario.family.kind,
            members=len(self.rows), failures=self.failures, fitted_power=self.fitted_power,
            thresholds=self.thresholds, monotone=self.monotone,
        )

    def csv_rows(self) -> List[Dict[str, object]]:
        return [row.model_dump(mode="json") for row in self.rows]


# ---------------------------------------------------------------------------
# Members
# ---------------------------------------------------------------------------

@dataclass
class MemberOutcome:
    row: SweepRow
    curve: List[Tuple[float, float]] = field(default_factory=list)
    flow: Optional[FlowRun] = field(default=None, repr=False)


def run_member(member: FamilyMember, scenario: Scenario, run_flow: Optional[bool] = None) -> MemberOutcome:
    """
    build metric -> scalar_flatten -> adm_mass of g and g_tilde -> sampled
    sup (U - U_tilde) -> FlowRun on g_tilde -> delta-gamma -> oscillation check.

    Failures become a row whose status names the exception; they are never raised.
    """
    run_flow = scenario.sweep.run_flow if run_flow is None else run_flow
    row: Dict[str, object] = {
        "member": member.label, "a": scenario.a,
        "scenario_hash": scenario.scenario_hash(), "version": __version__,
    }
    curve: List[Tuple[float, float]] = []
    run = None
    try:
        row["mass"] = adm_mass(member.metric).extrapolated_mass
        row["sup_deviation"] = sup_deviation(member.U, scenario.a, seed=scenario.seed)
        flat = scalar_flatten(member.metric)
        unchanged = flat.g_tilde is member.metric
        row["mass_flattened"] = row["mass"] if unchanged else adm_mass(flat.g_tilde).extrapolated_mass
        row["sup_flattened_gap"] = 0.0 if unchanged else float(np.max(flat.exterior_gap(scenario.a, scenario.seed)))
        if run_flow:
            run = build_flow_run(flat.g_tilde, scenario.a, scenario.sweep.s_grid_points)
            mass_curve(run)
            row["mdot0"] = run.mdot0_formula
            row["mdot0_fd"] = run.mdot0_fd
            row["mdot0_fd_total"] = run.mdot0_fd_total
            if run.m0 > 0 and -np.inf < run.admissible_range[0] < 0:
                C0, gamma = delta_gamma_window(run)
                row["flow_verdict"] = delta_gamma_experiment(run, gamma, C0).verdict
            report = oscillation_bound_check(flat.U_tilde, scenario.a, run.mdot0_formula, run.m0)
            row["oscillation_ratio"] = report.ratio
            curve = sorted(run.mass_samples.items())
    except Exception as e:
        logger.error(f"Member {member.label} failed: {type(e).__name__}: {e}")
        row["status"] = f"{type(e).__name__}: {e}"
    return MemberOutcome(row=SweepRow(**row), curve=curve, flow=run)


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------

class ScenarioRunner:
    """
    Drives a scenario over its family and writes the artifacts.
    """

    def __init__(self, config_path: Optional[str] = None, workers: Optional[int] = None,
                 output_dir: Optional[str] = None, progress: bool = False):
        """
        Initialize the runner.

        Args:
            config_path: Path to configuration file
            workers: Process count for family members (default WORKERS)
            output_dir: Output directory override (--out)
            progress: Show progress bars
        """
        self.config = load_config(config_path)
        self.workers = workers or int(self.config.get("WORKERS", 1))
        self.output_dir = output_dir
        self.progress = progress

    def _directory(self, scenario: Scenario) -> str:
        base = ensure_directories(self.config, self.output_dir or scenario.output_dir)
        directory = os.path.join(base, scenario.name)
        os.makedirs(directory, exist_ok=True)
        return directory

    def _outcomes(self, scenario: Scenario, run_flow: Optional[bool] = None) -> List[MemberOutcome]:
        members = family_members(scenario)
        if not members:
            logger.warning(f"Scenario {scenario.name} has no family members; the table is empty")
            return []
        task = partial(run_member, scenario=scenario, run_flow=run_flow)
        return parallel_map(task, members, workers=self.workers, desc="members", progress=self.progress)

    def _write_flows(self, scenario: Scenario, outcomes: Sequence[MemberOutcome], directory: str) -> Dict[str, str]:
        key = scenario.scenario_hash()
        artifacts: Dict[str, str] = {}
        for outcome in outcomes:
            if outcome.flow is None:
                continue
            label = outcome.row.member
            csv_path = output_path(directory, f"flow_{label}.csv")
            outcome.flow.write_csv(csv_path, extra={"scenario_hash": key, "version": __version__})
            artifacts[f"flow_{label}"] = csv_path
            artifacts[f"flow_{label}_summary"] = save_record(outcome.flow.summary(),
                                                             output_path(directory, f"flow_{label}.json"))
        curves = {outcome.row.member: outcome.curve for outcome in outcomes if outcome.curve}
        if curves:
            artifacts["mass_curves_plot"] = plot_mass_curves(curves, output_path(directory, "mass_curves.svg"), key)
        return artifacts

    def sweep(self, scenario: Scenario) -> SweepTable:
        """Full sweep: table, summary record, plots and per-member flow files."""
        logger.info(f"Running scenario {scenario.name} ({scenario.family.kind.value}, n = {scenario.n}, a = {scenario.a:g})")
        try:
            outcomes = self._outcomes(scenario)
            table = SweepTable.from_rows(scenario, [outcome.row for outcome in outcomes])
            directory = self._directory(scenario)
            key = scenario.scenario_hash()
            table.artifacts["sweep"] = write_csv(table.csv_rows(), output_path(directory, "sweep.csv"), SWEEP_COLUMNS)
            table.artifacts["summary"] = save_record(table.summary(), output_path(directory, "summary.json"))
            table.artifacts["deviation_plot"] = plot_deviation_vs_mass(
                table.rows, output_path(directory, "deviation_vs_mass.svg"), key, table.fitted_power)
            table.artifacts.update(self._write_flows(scenario, outcomes, directory))
        except Exception as e:
            logger.error(f"Scenario {scenario.name} aborted: {e}")
            raise
        logger.info(f"Scenario {scenario.name}: {len(table.rows)} rows, {table.failures} failures")
        return table

    def flow(self, scenario: Scenario) -> Dict[str, str]:
        """Mass flow only: per-member m(s) tables, flow summaries and the m(s) plot."""
        try:
            outcomes = self._outcomes(scenario, run_flow=True)
            return self._write_flows(scenario, outcomes, self._directory(scenario))
        except Exception as e:
            logger.error(f"Flow run for {scenario.name} aborted: {e}")
            raise


def run_scenario(s: Scenario, config_path: Optional[str] = None, workers: Optional[int] = None,
                 output_dir: Optional[str] = None) -> SweepTable:
    """Run a validated scenario and write its artifacts; returns the sweep table."""
    return ScenarioRunner(config_path=config_path, workers=workers, output_dir=output_dir).sweep(s)
