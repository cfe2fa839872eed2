"""
Ricci deformation g_s = g + s phi Ric(g) and the mass flow m(s).

m(s) is the ADM mass of u_s^(4/(n-2)) g_s where u_s solves the conformal
Laplace equation of g_s. Beyond the support of phi the metric is the base
end, so U u_s - 1 is an exact monopole past the grid and m(s) is read from
the matched tail; the flux extrapolation of the composed metric is kept as a
cross-check column.
"""
import csv
import logging
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import AdmissionError, DomainError, InadmissibleDeformation, PreconditionViolation, SolverFailure
from .harmonic import ExteriorHarmonic, sup_deviation
from .mass import adm_mass, monopole_shift
from .metric import RadialMetric, conformal_coefficient, grad_u_fourth_integral, ricci_norm_sq_integral, shell_integral
from .norms import RadialFunction, WeightedNormSpec, weighted_norm
from .quadrature import sphere_sample, unit_sphere_area
from .solver import ConformalBVP, inner_end_mass_shift, solve_conformal_factor
from ..schemas.models import FlowSummaryRecord
from ..utils.config_utils import get_setting
from .grid import STENCIL_HALF_WIDTH
from ..utils.parallel_utils import parallel_map

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Cutoff
# ---------------------------------------------------------------------------

def smoothstep(t: np.ndarray, order: int = 0) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    if order == 0:
        return t ** 3 * (10.0 - 15.0 * t + 6.0 * t ** 2)
    if order == 1:
        return 30.0 * t ** 2 * (1.0 - t) ** 2
    return 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)


@dataclass(frozen=True)
class Cutoff:
    """phi = 0 on r <= a/3, 1 on [a/2, 3a], 0 on r >= 4a; quintic C^2 transitions."""
    a: float

    def __post_init__(self):
        if self.a <= 3.0:
            raise AdmissionError("cutoff_scale", f"a must exceed 3, got {self.a}")

    @property
    def support(self):
        return self.a / 3.0, 4.0 * self.a

    @property
    def plateau(self):
        return self.a / 2.0, 3.0 * self.a


def cutoff_eval(c: Cutoff, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("cutoff is defined for r >= 0")
    rise = smoothstep((r - c.a / 3.0) / (c.a / 6.0))
    fall = 1.0 - smoothstep((r - 3.0 * c.a) / c.a)
    return np.where(r <= 2.0 * c.a, rise, fall)


def cutoff_derivative(c: Cutoff, r, order: int = 1) -> np.ndarray:
    """d^order phi / dr^order for order 1 or 2."""
    r = np.asarray(r, dtype=float)
    width_rise, width_fall = c.a / 6.0, c.a
    rise = smoothstep((r - c.a / 3.0) / width_rise, order) / width_rise ** order
    fall = -smoothstep((r - 3.0 * c.a) / width_fall, order) / width_fall ** order
    inside_rise = (r > c.a / 3.0) & (r < c.a / 2.0)
    inside_fall = (r > 3.0 * c.a) & (r < 4.0 * c.a)
    return np.where(inside_rise, rise, np.where(inside_fall, fall, 0.0))


# ---------------------------------------------------------------------------
# Deformation
# ---------------------------------------------------------------------------

def deform(g: RadialMetric, s: float, c: Cutoff) -> RadialMetric:
    """
    g_s = g + s phi Ric(g): A_s = A (1 + s phi Ric_rad), B_s = B (1 + s phi Ric_tan).

    Raises:
        InadmissibleDeformation: A_s or B_s not positive
    """
    if s == 0.0:
        return g
    phi = cutoff_eval(c, g.r)
    radial, tangential = g.ricci_profile
    stretch_a = 1.0 + s * phi * radial
    stretch_b = 1.0 + s * phi * tangential
    if np.min(stretch_a) <= 0 or np.min(stretch_b) <= 0:
        raise InadmissibleDeformation(s, "deformed metric is not positive definite")
    R_flat = None if g.R_flat is None else max(g.R_flat, 4.0 * c.a)
    return RadialMetric(n=g.n, r=g.r, A=g.A * stretch_a, B=g.B * stretch_b,
                        p=g.p, R_flat=R_flat, inner=g.inner)


def admissibility_scale(g: RadialMetric, c: Cutoff) -> float:
    """1 / max |phi Ric|: the smallest |s| at which g_s can degenerate."""
    phi = cutoff_eval(c, g.r)
    radial, tangential = g.ricci_profile
    peak = float(max(np.max(np.abs(phi * radial)), np.max(np.abs(phi * tangential))))
    return float("inf") if peak == 0.0 else 1.0 / peak


@dataclass
class MassSample:
    """m(s) and the solve behind it."""
    s: float
    ok: bool
    mass: Optional[float] = None
    flux_mass: Optional[float] = None
    inner_shift: float = 0.0
    residual: Optional[float] = None
    reason: str = ""
    u: Optional[np.ndarray] = field(default=None, repr=False)
    potential: Optional[np.ndarray] = field(default=None, repr=False)


def mass_at(g: RadialMetric, c: Cutoff, s: float, base_mass: Optional[float] = None,
            keep_solution: bool = False) -> MassSample:
    """
    Deform, re-flatten and read the mass at one value of s.

    Failures (positivity loss or solver failure) are returned as samples with
    ``ok`` False and the reason, never raised.
    """
    if base_mass is None:
        base_mass = adm_mass(g).extrapolated_mass
    try:
        g_s = deform(g, s, c)
        solution = solve_conformal_factor(ConformalBVP(metric=g_s))
    except (InadmissibleDeformation, AdmissionError, SolverFailure) as e:
        logger.debug(f"s = {s:.6g} not admissible: {e}")
        return MassSample(s=s, ok=False, reason=str(e))
    u = solution.u
    edge = -1
    U_edge = float(g_s.harmonic_factor()[edge])
    mass = base_mass + monopole_shift(g.n, g.r[edge], u[edge], U_edge)
    try:
        flux_mass = adm_mass(g_s.conformal_rescale(u)).extrapolated_mass
    except Exception as e:
        logger.debug(f"Flux cross-check failed at s = {s:.6g}: {e}")
        flux_mass = None
    return MassSample(
        s=s, ok=True, mass=mass, flux_mass=flux_mass, inner_shift=inner_end_mass_shift(u, g_s),
        residual=solution.residual,
        u=u if keep_solution else None,
        potential=conformal_coefficient(g.n) * g_s.scalar_curvature_profile if keep_solution else None,
    )


# ---------------------------------------------------------------------------
# FlowRun
# ---------------------------------------------------------------------------

@dataclass
class FlowRun:
    """A mass curve around s = 0 with both first-variation routes."""
    base_metric: RadialMetric
    cutoff: Cutoff
    s_grid: List[float] = field(default_factory=list)
    samples: List[MassSample] = field(default_factory=list, repr=False)
    s_crit: Optional[float] = None
    m0: Optional[float] = None
    mdot0_formula: Optional[float] = None
    mdot0_lower_bound: Optional[float] = None
    mdot0_fd: Optional[float] = None
    mdot0_fd_total: Optional[float] = None
    mddot_max: Optional[float] = None
    admissible_range: List[float] = field(default_factory=lambda: [0.0, 0.0])
    verdict: Optional[str] = None

    @property
    def mass_samples(self) -> Dict[float, float]:
        return {sample.s: sample.mass for sample in self.samples if sample.ok}

    def successful(self) -> List[MassSample]:
        return [sample for sample in self.samples if sample.ok]

    def summary(self) -> FlowSummaryRecord:
        return FlowSummaryRecord(
            a=self.cutoff.a, m0=self.m0, mdot0_formula=self.mdot0_formula,
            mdot0_lower_bound=self.mdot0_lower_bound, mdot0_fd=self.mdot0_fd,
            mdot0_fd_total=self.mdot0_fd_total, mddot_max=self.mddot_max,
            admissible_range=list(self.admissible_range), verdict=self.verdict,
        )

    def write_csv(self, path: str, extra: Optional[Dict[str, str]] = None) -> None:
        """Rows (s, m(s), flux mass, residual, admissible flag) plus any extra columns."""
        extra = extra or {}
        columns = ["s", "mass", "flux_mass", "inner_shift", "residual", "admissible"] + list(extra)
        with open(path, "w", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=columns)
            writer.writeheader()
            for sample in sorted(self.samples, key=lambda item: item.s):
                row = {
                    "s": repr(sample.s),
                    "mass": "" if sample.mass is None else repr(sample.mass),
                    "flux_mass": "" if sample.flux_mass is None else repr(sample.flux_mass),
                    "inner_shift": repr(sample.inner_shift),
                    "residual": "" if sample.residual is None else repr(sample.residual),
                    "admissible": "true" if sample.ok else "false",
                }
                row.update(extra)
                writer.writerow(row)


def _require_scalar_flat(g: RadialMetric) -> None:
    if g.harmonic_coefficients() is not None:
        return
    interior = slice(STENCIL_HALF_WIDTH, -STENCIL_HALF_WIDTH)
    worst = float(np.max(np.abs(g.scalar_curvature_profile[interior])))
    if worst > g.curvature_tolerance():
        raise PreconditionViolation(f"base metric is not scalar-flat (max |R| = {worst:.3e})")


def mdot0_formula(g: RadialMetric, c: Cutoff) -> tuple:
    """
    (1/(2 omega (n-1))) int phi |Ric|^2 dmu and the annulus lower bound over
    B_3a minus B_(a/2).

    Returns:
        (value, lower_bound)
    """
    factor = 1.0 / (2.0 * unit_sphere_area(g.n) * (g.n - 1.0))
    value, _ = ricci_norm_sq_integral(g, c.support, weight=lambda r: cutoff_eval(c, r))
    lower, _ = ricci_norm_sq_integral(g, c.plateau)
    return factor * value, factor * lower


def _central_derivative(values: Dict[int, float], step: float) -> Optional[float]:
    if not all(k in values for k in (-2, -1, 1, 2)):
        return None
    return (-values[2] + 8.0 * values[1] - 8.0 * values[-1] + values[-2]) / (12.0 * step)


def _mass_task(s: float, g: RadialMetric, c: Cutoff, base_mass: float) -> MassSample:
    return mass_at(g, c, s, base_mass=base_mass, keep_solution=True)


def build_flow_run(g: RadialMetric, a: float, points: Optional[int] = None) -> FlowRun:
    """FlowRun with the default symmetric s-grid (step S_STEP_FRACTION * s_crit)."""
    cutoff = Cutoff(a)
    run = FlowRun(base_metric=g, cutoff=cutoff)
    run.s_crit = admissibility_scale(g, cutoff)
    points = points or int(get_setting("S_GRID_POINTS"))
    if np.isfinite(run.s_crit):
        step = float(get_setting("S_STEP_FRACTION")) * run.s_crit
        half = (points - 1) // 2
        run.s_grid = [k * step for k in range(-half, half + 1)]
    else:
        run.s_grid = [0.0]
    return run


def mass_curve(run: FlowRun, workers: int = 1) -> FlowRun:
    """
    Fill the curve m(s) over the s-grid plus the two first-variation routes.

    Raises:
        PreconditionViolation: base metric not scalar-flat
    """
    g, c = run.base_metric, run.cutoff
    _require_scalar_flat(g)
    run.m0 = adm_mass(g).extrapolated_mass
    run.mdot0_formula, run.mdot0_lower_bound = mdot0_formula(g, c)
    if run.s_crit is None:
        run.s_crit = admissibility_scale(g, c)
    logger.info(f"Mass flow: m0 = {run.m0:.6e}, a = {c.a:g}, s_crit = {run.s_crit:.4g}")

    if not np.isfinite(run.s_crit):
        # Ric vanishes on the support: m(s) is constant
        run.samples = [MassSample(s=s, ok=True, mass=run.m0, flux_mass=run.m0, residual=0.0) for s in run.s_grid]
        run.mdot0_fd = run.mdot0_fd_total = 0.0
        run.mddot_max = 0.0
        run.admissible_range = [-float("inf"), float("inf")]
        return run

    task = partial(_mass_task, g=g, c=c, base_mass=run.m0)
    run.samples = parallel_map(task, run.s_grid, workers=workers, desc="s-grid")

    # derivative at 0 from a separate small stencil
    delta = float(get_setting("FD_STEP_FRACTION")) * run.s_crit
    stencil = {k: mass_at(g, c, k * delta, base_mass=run.m0) for k in (-2, -1, 1, 2)}
    outer = {k: sample.mass for k, sample in stencil.items() if sample.ok}
    total = {k: sample.mass + sample.inner_shift for k, sample in stencil.items() if sample.ok}
    run.mdot0_fd = _central_derivative(outer, delta)
    run.mdot0_fd_total = _central_derivative(total, delta)

    run.admissible_range = _admissible_range(run)
    run.mddot_max = _second_difference_max(run)
    logger.info(f"m'(0): formula {run.mdot0_formula:.6e}, finite difference {run.mdot0_fd_total}")
    return run


def _admissible_range(run: FlowRun) -> List[float]:
    ok = {round(sample.s / run.s_crit, 12): sample.ok for sample in run.samples}
    reach = 0.0
    for s in sorted(abs(value) for value in run.s_grid):
        key = round(s / run.s_crit, 12)
        if ok.get(key, False) and ok.get(-key, False):
            reach = s
        elif s > 0:
            break
    return [-reach, reach]


def _second_difference_max(run: FlowRun) -> Optional[float]:
    lo, hi = run.admissible_range
    points = sorted((sample.s, sample.mass) for sample in run.successful() if lo - 1e-12 <= sample.s <= hi + 1e-12)
    if len(points) < 3:
        return None
    s = np.array([p[0] for p in points])
    m = np.array([p[1] for p in points])
    step = s[1] - s[0]
    second = (m[2:] - 2.0 * m[1:-1] + m[:-2]) / step ** 2
    return float(np.max(np.abs(second)))


# ---------------------------------------------------------------------------
# Lemma-level checks
# ---------------------------------------------------------------------------

@dataclass
class OscillationReport:
    lhs: float
    rhs_flow: float
    rhs_mass: float
    ratio: float
    annulus_oscillation: float
    grad_fourth: float
    oscillation_constant: float
    grad_to_mdot: float


def oscillation_bound_check(U: ExteriorHarmonic, a: float, mdot0: float, m0: float,
                            radial_samples: int = 9, order: int = 12) -> OscillationReport:
    """
    sup_{|x|>a}|U-1| against (a^(4-n) m'(0))^(1/4) + a^(2-n)|m(0)|, with the
    intermediate annulus-oscillation and int |grad U|^4 <= C m'(0) steps.
    """
    if a <= 3.0 * U.R:
        raise DomainError(f"a must exceed 3R, got a = {a}, R = {U.R}")
    n = U.n
    lhs = sup_deviation(U, a)
    rhs_flow = (a ** (4 - n) * max(mdot0, 0.0)) ** 0.25
    rhs_mass = a ** (2 - n) * abs(m0)
    ratio = lhs / (rhs_flow + rhs_mass) if rhs_flow + rhs_mass > 0 else 0.0

    volume = unit_sphere_area(n) * ((2.0 * a) ** n - a ** n) / n
    total, _ = shell_integral(U.eval, n, a, 2.0 * a, panels=32)
    mean = total / volume
    unit = sphere_sample(n, 1.0, order)
    oscillation = max(float(np.max(np.abs(U.eval(rho * unit.directions) - mean)))
                      for rho in np.linspace(a, 2.0 * a, radial_samples))
    grad4 = grad_u_fourth_integral(U, a)
    scale = (a ** (4 - n) * grad4) ** 0.25
    return OscillationReport(
        lhs=lhs, rhs_flow=rhs_flow, rhs_mass=rhs_mass, ratio=ratio,
        annulus_oscillation=oscillation, grad_fourth=grad4,
        oscillation_constant=oscillation / scale if scale > 0 else 0.0,
        grad_to_mdot=grad4 / mdot0 if mdot0 > 0 else 0.0,
    )


@dataclass
class DeltaGammaVerdict:
    verdict: str
    gamma: float
    C0: Optional[float]
    s_star: Optional[float]
    m0: float
    m_star: Optional[float]
    mdot0: Optional[float]
    premise: bool
    conclusion: Optional[bool]
    taylor_ok: Optional[bool]


def delta_gamma_window(run: FlowRun, margin: float = 1.01) -> Tuple[float, float]:
    """
    (C0, gamma) placing s* = -gamma/C0 on the computed curve.

    C0 is raised from max|m''| until gamma = margin sqrt(2 C0 m0) gives
    |s*| within the admissible range; any C0 >= max|m''| is a valid bound.
    """
    if run.m0 is None:
        raise PreconditionViolation("run the mass curve first")
    reach = abs(run.admissible_range[0])
    if reach == 0.0:
        raise PreconditionViolation("no admissible s < 0 on the computed curve")
    C0 = max(run.mddot_max or 0.0, 2.0 * margin ** 2 * max(run.m0, 0.0) / reach ** 2)
    return C0, margin * np.sqrt(2.0 * C0 * max(run.m0, 0.0))


def delta_gamma_experiment(run: FlowRun, gamma: float, C0: Optional[float] = None) -> DeltaGammaVerdict:
    """
    With C0 >= max|m''| over the admissible range: m(0) < gamma^2/(2 C0) and
    m(-gamma/C0) >= 0 should force m'(0) < gamma.

    m(-gamma/C0) is solved directly when s* lies in the admissible range;
    beyond it, or when the solve fails, the verdict is "inconclusive".

    Raises:
        PreconditionViolation: mass curve not run, or C0 below max|m''|
    """
    if run.m0 is None:
        raise PreconditionViolation("run the mass curve first")
    mdot0 = run.mdot0_fd if run.mdot0_fd is not None else run.mdot0_formula
    if C0 is None:
        C0 = run.mddot_max
    elif run.mddot_max and C0 < run.mddot_max:
        raise PreconditionViolation(f"C0 = {C0:.4e} is below max|m''| = {run.mddot_max:.4e}")
    if not C0:
        verdict = "pass" if mdot0 < gamma else "fail"
        run.verdict = verdict
        return DeltaGammaVerdict(verdict, gamma, C0, None, run.m0, None, mdot0, True, mdot0 < gamma, None)

    s_star = -gamma / C0
    premise_mass = run.m0 < gamma ** 2 / (2.0 * C0)
    reach = abs(run.admissible_range[0]) if run.admissible_range else 0.0
    if abs(s_star) > reach * (1.0 + 1e-9):
        logger.info(f"delta-gamma: s* = {s_star:.4e} lies beyond the admissible range {reach:.4e}")
        run.verdict = "inconclusive"
        return DeltaGammaVerdict("inconclusive", gamma, C0, s_star, run.m0, None, mdot0,
                                 premise_mass, None, None)
    sample = mass_at(run.base_metric, run.cutoff, s_star, base_mass=run.m0)
    if not sample.ok:
        run.verdict = "inconclusive"
        return DeltaGammaVerdict("inconclusive", gamma, C0, s_star, run.m0, None, mdot0,
                                 premise_mass, None, None)
    m_star = sample.mass
    premise = premise_mass and m_star >= 0.0
    conclusion = mdot0 < gamma
    taylor_ok = run.m0 - m_star <= mdot0 * (gamma / C0) + gamma ** 2 / (2.0 * C0) + 1e-12 * max(1.0, abs(run.m0))
    if premise:
        verdict = "pass" if conclusion else "fail"
    else:
        verdict = "vacuous"
    run.verdict = verdict
    logger.info(f"delta-gamma: gamma = {gamma:.4e}, C0 = {C0:.4e}, m(s*) = {m_star:.4e}, verdict {verdict}")
    return DeltaGammaVerdict(verdict, gamma, C0, s_star, run.m0, m_star, mdot0, premise, conclusion, taylor_ok)


def weighted_estimate_echo(run: FlowRun, sigma: Optional[float] = None,
                           alpha: Optional[float] = None) -> Optional[float]:
    """
    max over the solved s of |v_s|_{2+alpha,sigma,a/4} / |L_s v_s|_{alpha,sigma-2,a/4}
    with v_s = u_s - 1 and L_s v_s = (n-2)/(4(n-1)) R_s.
    """
    g = run.base_metric
    n = g.n
    sigma = sigma if sigma is not None else (2.0 - n) / 2.0
    alpha = alpha if alpha is not None else float(get_setting("ALPHA"))
    rho = max(run.cutoff.a / 4.0, float(g.r[STENCIL_HALF_WIDTH + 1]))
    spec = WeightedNormSpec(sigma=sigma, alpha=alpha, k=2, rho=rho, n=n)
    source_params = spec.variant(-2.0, k=0)
    ratios = []
    for sample in run.successful():
        if sample.s == 0.0 or sample.u is None:
            continue
        source = weighted_norm(RadialFunction(g.r, sample.potential), source_params)
        if source == 0.0:
            continue
        ratios.append(weighted_norm(RadialFunction(g.r, sample.u - 1.0), spec) / source)
    return max(ratios) if ratios else None
