"""
Desk-scale invariant suite behind the ``check`` subcommand.

Each check returns a CheckResult; check_all prints the table, writes
checks.csv and returns a process exit status.
"""
import filecmp
import logging
import os
import tempfile
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from ..geometry.deformation import (
    Cutoff,
    build_flow_run,
    delta_gamma_experiment,
    delta_gamma_window,
    mass_curve,
    mdot0_formula,
)
from ..geometry.errors import AdmissionError
from ..geometry.grid import STENCIL_HALF_WIDTH, log_grid
from ..geometry.harmonic import ExteriorHarmonic, harmonic_dimension, poisson_extend
from ..geometry.mass import adm_mass
from ..geometry.metric import ConformallyFlatMetric, RadialMetric
from ..geometry.norms import (
    WeightedNormSpec,
    barrier_sample_points,
    barrier_subharmonicity_check,
    forced_test_family,
    injectivity_ratio,
    power_test_function,
)
from ..geometry.solver import (
    ConformalBVP,
    comparison_bound_constant,
    scalar_flatten,
    shooting_solve,
    solve_conformal_factor,
)
from ..schemas.models import FamilyKind, FamilySpec, GridSpec, Scenario, SweepSpec
from ..utils.config_utils import ensure_directories, get_setting, load_config
from ..utils.io_utils import output_path, save_radial_metric, load_radial_metric, write_csv
from .families import bump, composite, shell_scalar_curvature
from .runner import ScenarioRunner

logger = logging.getLogger(__name__)

CHECK_COLUMNS = ["check", "passed", "value", "threshold", "detail"]
NEAR_EQUALITY_MASSES = [1.0, 0.3, 0.1, 0.03, 0.01]


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    detail: str = ""

    def row(self) -> dict:
        return {
            "check": self.name,
            "passed": "true" if self.passed else "false",
            "value": "" if self.value is None else f"{self.value:.6e}",
            "threshold": "" if self.threshold is None else f"{self.threshold:.3e}",
            "detail": self.detail,
        }


_CHECKS: List[Callable[[int], CheckResult]] = []


def _check(func: Callable[[int], CheckResult]) -> Callable[[int], CheckResult]:
    _CHECKS.append(func)
    return func


def _bump_family(**overrides) -> FamilySpec:
    return FamilySpec(kind=FamilyKind.BUMP, **overrides)


# ---------------------------------------------------------------------------
# harmonic
# ---------------------------------------------------------------------------

@_check
def poisson_normalization(seed: int) -> CheckResult:
    """Integral of K(x, .) over S_r equals (r/|x|)^(n-2) on a 5 x 5 grid."""
    n = 3
    worst = 0.0
    for r in (0.5, 1.0, 2.0, 3.0, 5.0):
        for factor in (1.5, 2.0, 3.0, 5.0, 10.0):
            x = factor * r * np.array([0.6, 0.0, 0.8])
            value = poisson_extend(lambda y: np.ones(len(y)), r, x)
            worst = max(worst, abs(value - factor ** (2 - n)))
    return CheckResult("poisson_normalization", worst <= 1e-8, worst, 1e-8)


def random_harmonic(n: int, rng: np.random.Generator) -> ExteriorHarmonic:
    """Monopole plus small degree 1 and 2 terms; positive on |x| >= 1."""
    higher = [(l, idx, float(rng.uniform(-0.05, 0.05)))
              for l in (1, 2) for idx in range(harmonic_dimension(n, l))]
    return ExteriorHarmonic(n=n, monopole_coeff=float(rng.uniform(0.0, 0.5))).with_terms(higher)


@_check
def harmonic_scalar_flat(seed: int) -> CheckResult:
    """|R| of U^(4/(n-2)) delta at 1000 exterior points for 20 random harmonic U."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        U = random_harmonic(3, rng)
        directions = rng.normal(size=(1000, 3))
        directions /= np.linalg.norm(directions, axis=1)[:, None]
        points = np.exp(rng.uniform(0.0, np.log(50.0), 1000))[:, None] * directions
        worst = max(worst, float(np.max(np.abs(ConformallyFlatMetric(U).scalar_curvature(points)))))
    return CheckResult("harmonic_scalar_flat", worst < 1e-10, worst, 1e-10)


# ---------------------------------------------------------------------------
# metric / mass
# ---------------------------------------------------------------------------

@_check
def mass_routes(seed: int) -> CheckResult:
    """Extrapolated flux mass against the expansion mass for Schwarzschild."""
    worst = 0.0
    for m in (0.01, 0.1, 1.0):
        report = adm_mass(ConformallyFlatMetric(ExteriorHarmonic.monopole(3, m)))
        worst = max(worst, report.discrepancy)
    return CheckResult("mass_routes", worst <= 1e-6, worst, 1e-6)


@_check
def radial_curvature(seed: int) -> CheckResult:
    """Sampled R_g of a bump metric against its closed form (relative to max |R|)."""
    family = _bump_family()
    member = bump(3, 0.2, family, GridSpec())
    g = member.metric
    interior = slice(STENCIL_HALF_WIDTH, -STENCIL_HALF_WIDTH)
    exact = shell_scalar_curvature(3, g.r, 0.2, family.shell_inner, family.shell_outer)
    gap = float(np.max(np.abs(g.scalar_curvature_profile[interior] - exact[interior])) / np.max(np.abs(exact)))
    return CheckResult("radial_curvature", gap <= 1e-3, gap, 1e-3)


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------

@_check
def flat_background(seed: int) -> CheckResult:
    """R = 0 gives u = 1."""
    g = RadialMetric.schwarzschild_isotropic(3, 0.0)
    u = solve_conformal_factor(ConformalBVP(metric=g)).u
    gap = float(np.max(np.abs(u - 1.0)))
    return CheckResult("flat_background", gap <= 1e-10, gap, 1e-10)


@_check
def shooting_convergence(seed: int) -> CheckResult:
    """Error of the direct solve against shooting drops by ~4 when the grid doubles."""
    errors = []
    for density in (64, 128):
        member = bump(3, 0.2, _bump_family(), GridSpec(points_per_decade=density))
        bvp = ConformalBVP(metric=member.metric)
        direct = solve_conformal_factor(bvp).u
        errors.append(float(np.max(np.abs(direct - shooting_solve(bvp)))))
    ratio = errors[0] / errors[1] if errors[1] > 0 else float("inf")
    return CheckResult("shooting_convergence", ratio >= 3.5, ratio, 3.5,
                       f"errors {errors[0]:.3e}, {errors[1]:.3e}")


@_check
def maximum_principle(seed: int) -> CheckResult:
    """M-matrix operator and u <= 1 for R_g >= 0."""
    member = bump(3, 0.2, _bump_family(), GridSpec())
    solution = solve_conformal_factor(ConformalBVP(metric=member.metric))
    overshoot = float(np.max(solution.u) - 1.0)
    passed = solution.m_matrix and overshoot <= 1e-12
    return CheckResult("maximum_principle", passed, overshoot, 1e-12, f"m_matrix={solution.m_matrix}")


@_check
def flattening_lemma(seed: int) -> CheckResult:
    """
    v > 1 at the interior nodes, U - U_tilde >= 0 and sup (U - U_tilde) <= C (m - m_tilde)
    on five bumps, with U - U_tilde sampled from the two metrics beyond a.
    """
    n, a = 3, float(get_setting("DEFAULT_A"))
    family = _bump_family()
    worst = 0.0
    passed = True
    for charge in (0.02, 0.05, 0.1, 0.2, 0.4):
        member = bump(n, charge, family, GridSpec())
        result = scalar_flatten(member.metric)
        gap = result.exterior_gap(a, seed)
        mass_drop = adm_mass(member.metric).extrapolated_mass - adm_mass(result.g_tilde).extrapolated_mass
        constant = comparison_bound_constant(a, n, member.U.R)
        ratio = float(np.max(gap)) / (constant * mass_drop) if mass_drop > 0 else float("inf")
        worst = max(worst, ratio)
        strict = bool(np.all(result.v[1:-1] > 1.0 + 1e-12))
        passed &= strict and float(np.min(gap)) >= -1e-12 and ratio <= 1.0
    return CheckResult("flattening_lemma", passed, worst, 1.0, "max sup(U - U_tilde) / (C (m - m_tilde))")


@_check
def comparison_constant(seed: int) -> CheckResult:
    value = comparison_bound_constant(3.0, 3)
    values = [comparison_bound_constant(a, 3) for a in (3.0, 4.0, 6.0, 10.0)]
    passed = abs(value - 2.5) <= 1e-12 and all(b < c for b, c in zip(values[1:], values))
    return CheckResult("comparison_constant", passed, value, 2.5)


# ---------------------------------------------------------------------------
# deformation
# ---------------------------------------------------------------------------

def _schwarzschild_run(mass: float, a: float):
    g = RadialMetric.schwarzschild_isotropic(3, mass, points_per_decade=int(get_setting("FLOW_POINTS_PER_DECADE")))
    return mass_curve(build_flow_run(g, a))


@_check
def first_variation(seed: int) -> CheckResult:
    """Finite-difference m'(0) against the Ricci integral (relative)."""
    runs = [("schwarzschild_m1", _schwarzschild_run(1.0, 4.0))]
    family = FamilySpec(kind=FamilyKind.COMPOSITE)
    grid = GridSpec()
    for charge in (0.05, 0.1, 0.2):
        member = composite(3, charge, family, grid)
        g_tilde = scalar_flatten(member.metric).g_tilde
        runs.append((member.label, mass_curve(build_flow_run(g_tilde, float(get_setting("DEFAULT_A"))))))
    worst = 0.0
    for label, run in runs:
        gap = abs(run.mdot0_fd_total - run.mdot0_formula) / run.mdot0_formula
        logger.debug(f"{label}: m'(0) formula {run.mdot0_formula:.6e}, fd {run.mdot0_fd_total:.6e}")
        worst = max(worst, gap)
    return CheckResult("first_variation", worst <= 1e-3, worst, 1e-3)


@_check
def first_variation_sign(seed: int) -> CheckResult:
    """m'(0) > 0 for every Schwarzschild member and exactly 0 for flat space."""
    a = float(get_setting("DEFAULT_A"))
    values = []
    for mass in NEAR_EQUALITY_MASSES:
        g = RadialMetric.schwarzschild_isotropic(3, mass)
        values.append(mdot0_formula(g, Cutoff(a))[0])
    flat, _ = mdot0_formula(RadialMetric.schwarzschild_isotropic(3, 0.0), Cutoff(a))
    passed = all(v > 0 for v in values) and flat == 0.0
    return CheckResult("first_variation_sign", passed, min(values), 0.0, f"flat value {flat!r}")


@_check
def delta_gamma(seed: int) -> CheckResult:
    run = _schwarzschild_run(1e-3, float(get_setting("DEFAULT_A")))
    C0, gamma = delta_gamma_window(run)
    result = delta_gamma_experiment(run, gamma, C0)
    return CheckResult("delta_gamma", result.verdict == "pass", result.mdot0, gamma, result.verdict)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

@_check
def barrier_identity(seed: int) -> CheckResult:
    U = ExteriorHarmonic.monopole(3, 0.5).with_terms([(1, 0, 0.05), (2, 1, 0.02)])
    points = barrier_sample_points(3, 50, 2.0 * U.R, 50.0 * U.R, seed)
    report = barrier_subharmonicity_check(U, float(get_setting("SIGMA")), points)
    passed = report.positive and report.max_relative_gap <= 1e-6
    return CheckResult("barrier_identity", passed, report.max_relative_gap, 1e-6, f"C2 = {report.C2:.4g}")


@_check
def injectivity_flat(seed: int) -> CheckResult:
    sigma = float(get_setting("SIGMA"))
    r = log_grid(1.0, 1e4, int(get_setting("DEFAULT_POINTS_PER_DECADE")))
    spec = WeightedNormSpec(sigma=sigma, alpha=float(get_setting("ALPHA")), k=2, n=3)
    report = injectivity_ratio([power_test_function(3, sigma, r)], spec)
    expected = 1.0 / abs(sigma * (sigma + 1.0))
    gap = abs(report.c0_ratio - expected)
    return CheckResult("injectivity_flat", gap <= 1e-8, gap, 1e-8, f"ratio {report.c0_ratio:.10g}")


@_check
def injectivity_refinement(seed: int) -> CheckResult:
    """C^0 and Schauder ratios of forced solves drift < 5% when the grid doubles."""
    a = float(get_setting("DEFAULT_A"))
    spec = WeightedNormSpec(sigma=float(get_setting("SIGMA")), alpha=float(get_setting("ALPHA")),
                            k=2, rho=a / 4.0, n=3)
    reports = []
    for density in (64, 128):
        g = RadialMetric.schwarzschild_isotropic(3, 0.5, points_per_decade=density)
        reports.append(injectivity_ratio(forced_test_family(g, a, seed=seed), spec))
    coarse, fine = reports
    drift = abs(fine.c0_ratio - coarse.c0_ratio) / fine.c0_ratio
    finite = fine.schauder_ratio is not None and np.isfinite(fine.schauder_ratio)
    if finite:
        drift = max(drift, abs(fine.schauder_ratio - coarse.schauder_ratio) / fine.schauder_ratio)
    return CheckResult("injectivity_refinement", finite and drift < 0.05, drift, 0.05)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _near_equality(kind: FamilyKind, seed: int) -> Scenario:
    if kind == FamilyKind.SCHWARZSCHILD:
        family = FamilySpec(kind=kind, masses=NEAR_EQUALITY_MASSES)
    else:
        family = FamilySpec(kind=kind, amplitudes=[0.5 * m for m in NEAR_EQUALITY_MASSES])
    return Scenario(name=f"check_{kind.value}", family=family, a=float(get_setting("DEFAULT_A")),
                    sweep=SweepSpec(run_flow=False), seed=seed)


@_check
def near_equality_sweep(seed: int) -> CheckResult:
    """sup|U - 1| decreases with the mass at a = 5 with a fitted power in [1/4, 1]."""
    passed = True
    powers = []
    with tempfile.TemporaryDirectory() as scratch:
        runner = ScenarioRunner(output_dir=scratch)
        for kind in (FamilyKind.SCHWARZSCHILD, FamilyKind.BUMP):
            table = runner.sweep(_near_equality(kind, seed))
            power = table.fitted_power
            powers.append(power)
            passed &= table.failures == 0 and table.monotone["sup_deviation"]
            passed &= power is not None and 0.25 <= power <= 1.0 + 1e-6
            if kind == FamilyKind.SCHWARZSCHILD:
                for row in table.rows:
                    expected = row.mass / (2.0 * table.scenario.a)
                    passed &= abs(row.sup_deviation - expected) <= 1e-9 * max(expected, 1e-3)
    value = min(p for p in powers if p is not None) if any(p is not None for p in powers) else None
    return CheckResult("near_equality_sweep", bool(passed), value, 0.25,
                       "fitted powers " + ", ".join("none" if p is None else f"{p:.4f}" for p in powers))


@_check
def sweep_determinism(seed: int) -> CheckResult:
    """Two runs of one scenario write byte-identical files."""
    scenario = _near_equality(FamilyKind.SCHWARZSCHILD, seed)
    names = ["sweep.csv", "summary.json", "deviation_vs_mass.svg"]
    with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
        for directory in (first, second):
            ScenarioRunner(output_dir=directory).sweep(scenario)
        match, mismatch, errors = filecmp.cmpfiles(os.path.join(first, scenario.name),
                                                   os.path.join(second, scenario.name), names, shallow=False)
    passed = not mismatch and not errors
    return CheckResult("sweep_determinism", passed, float(len(mismatch) + len(errors)), 0.0,
                       ",".join(mismatch + errors))


@_check
def corrupted_metric(seed: int) -> CheckResult:
    """A table with a negative B sample is rejected as non-Riemannian."""
    with tempfile.TemporaryDirectory() as scratch:
        path = save_radial_metric(RadialMetric.schwarzschild_isotropic(3, 0.1, points_per_decade=16),
                                  os.path.join(scratch, "metric.txt"))
        with open(path) as handle:
            lines = handle.readlines()
        r, A, B = lines[5].split()
        lines[5] = f"{r} {A} -{B}\n"
        with open(path, "w") as handle:
            handle.writelines(lines)
        try:
            load_radial_metric(path)
        except AdmissionError as e:
            return CheckResult("corrupted_metric", e.invariant == "riemannian", detail=e.invariant)
    return CheckResult("corrupted_metric", False, detail="accepted")


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

def run_checks(seed: int = 0) -> List[CheckResult]:
    results = []
    for func in _CHECKS:
        logger.info(f"Running check {func.__name__}...")
        try:
            results.append(func(seed))
        except Exception as e:
            logger.error(f"Check {func.__name__} raised {type(e).__name__}: {e}")
            results.append(CheckResult(func.__name__, False, detail=f"{type(e).__name__}: {e}"))
    return results


def format_table(results: List[CheckResult]) -> str:
    width = max(len(result.name) for result in results)
    lines = [f"{'check':<{width}}  status  value         threshold"]
    for result in results:
        value = "" if result.value is None else f"{result.value:.3e}"
        threshold = "" if result.threshold is None else f"{result.threshold:.1e}"
        status = "PASS" if result.passed else "FAIL"
        lines.append(f"{result.name:<{width}}  {status:<6}  {value:<12}  {threshold}")
    return "\n".join(lines)


def check_all(output_dir: Optional[str] = None, seed: int = 0, config_path: Optional[str] = None) -> int:
    """
    Run the invariant suite.

    Args:
        output_dir: Where checks.csv goes (default OUTPUT_DIR)
        seed: Seed for sampled points and random harmonic functions
        config_path: Optional configuration file

    Returns:
        0 when every check passes, 1 otherwise
    """
    config = load_config(config_path)
    results = run_checks(seed)
    print(format_table(results))
    directory = ensure_directories(config, output_dir)
    path = write_csv([result.row() for result in results], output_path(directory, "checks.csv"), CHECK_COLUMNS)
    failed = [result.name for result in results if not result.passed]
    if failed:
        logger.error(f"{len(failed)} checks failed: {', '.join(failed)}")
        return 1
    logger.info(f"All {len(results)} checks passed; table written to {path}")
    return 0
