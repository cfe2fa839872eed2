"""
Metric families for sweeps.

* schwarzschild: U = 1 + (m/2) r^(2-n), two ended, chart r >= 1.
* bump: filled center, U = 1 + Q F(r) with r^(n-1) F' = -(n-2) S(r) and S a
  C^4 step across the shell; Delta U <= 0, so R_g >= 0, and U is the
  exterior monopole 1 + Q r^(2-n) beyond the shell.
* composite: the bump shell around a Schwarzschild core, two ended.

S is the regularized incomplete beta function I_t(5, 5), so S' vanishes to
fourth order at both shell radii and the sampled R_g has no kinks there.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.integrate import quad
from scipy.special import beta, betainc

from ..geometry.grid import log_grid
from ..geometry.harmonic import ExteriorHarmonic
from ..geometry.metric import RadialMetric
from ..schemas.models import FamilyKind, FamilySpec, GridSpec, Scenario
from ..utils.config_utils import get_setting

logger = logging.getLogger(__name__)


@dataclass
class FamilyMember:
    """One metric of a family with its closed-form data."""
    label: str
    kind: FamilyKind
    metric: RadialMetric = field(repr=False)
    U: ExteriorHarmonic
    mass: float


# ---------------------------------------------------------------------------
# Shell profile
# ---------------------------------------------------------------------------

_STEP_ORDER = 5


def shell_step(r, r1: float, r2: float, order: int = 0) -> np.ndarray:
    """S(r) rising from 0 at r1 to 1 at r2 (order 1 gives S')."""
    width = r2 - r1
    t = np.clip((np.asarray(r, dtype=float) - r1) / width, 0.0, 1.0)
    if order == 0:
        return betainc(_STEP_ORDER, _STEP_ORDER, t)
    if order == 1:
        return (t * (1.0 - t)) ** (_STEP_ORDER - 1) / (beta(_STEP_ORDER, _STEP_ORDER) * width)
    raise ValueError(f"order must be 0 or 1, got {order}")


def shell_potential(n: int, r, r1: float, r2: float) -> np.ndarray:
    """
    F with r^(n-1) F'(r) = -(n-2) S(r) and F = r^(2-n) for r >= r2.

    Constant on r <= r1.
    """
    r = np.asarray(r, dtype=float)
    out = r ** (2.0 - n)
    integrand = lambda t: (n - 2.0) * float(shell_step(t, r1, r2)) * t ** (1.0 - n)

    def from_outer(lower: float) -> float:
        tail, _ = quad(integrand, lower, r2, epsabs=1e-14, epsrel=1e-13, limit=200)
        return r2 ** (2.0 - n) + tail

    out[r <= r1] = from_outer(r1)
    for index in np.flatnonzero((r > r1) & (r < r2)):
        out[index] = from_outer(r[index])
    return out


def shell_scalar_curvature(n: int, r, charge: float, r1: float, r2: float,
                           core_mass: float = 0.0) -> np.ndarray:
    """
    Closed-form R_g of the bump/composite metric:
    R = 4(n-1) Q S'(r) r^(1-n) U^(-(n+2)/(n-2)).
    """
    r = np.asarray(r, dtype=float)
    U = 1.0 + 0.5 * core_mass * r ** (2.0 - n) + charge * shell_potential(n, r, r1, r2)
    density = charge * shell_step(r, r1, r2, order=1) * r ** (1.0 - n)
    return 4.0 * (n - 1.0) * density * U ** (-(n + 2.0) / (n - 2.0))


# ---------------------------------------------------------------------------
# Members
# ---------------------------------------------------------------------------

def schwarzschild(n: int, mass: float, grid: GridSpec) -> FamilyMember:
    """Spatial Schwarzschild slice on r >= 1."""
    g = RadialMetric.schwarzschild_isotropic(n, mass, r_min=1.0, points_per_decade=grid.points_per_decade,
                                             outer_decades=grid.outer_decades)
    return FamilyMember(label=f"schwarzschild_m{mass:g}", kind=FamilyKind.SCHWARZSCHILD, metric=g,
                        U=ExteriorHarmonic.monopole(n, mass), mass=mass)


def _shell_metric(n: int, charge: float, family: FamilySpec, grid: GridSpec,
                  core_mass: float, r_min: float, inner: str) -> RadialMetric:
    r = log_grid(r_min, 10.0 ** grid.outer_decades, grid.points_per_decade)
    U = (1.0 + 0.5 * core_mass * r ** (2.0 - n)
         + charge * shell_potential(n, r, family.shell_inner, family.shell_outer))
    return RadialMetric.from_conformal_factor(n, r, U, p=float(n - 2), R_flat=family.shell_outer, inner=inner)


def bump(n: int, charge: float, family: FamilySpec, grid: GridSpec) -> FamilyMember:
    """Filled-center metric with a non-negative scalar-curvature shell of charge Q (mass 2Q)."""
    r_min = float(get_setting("FILLED_CENTER_RADIUS"))
    g = _shell_metric(n, charge, family, grid, 0.0, r_min, "regular")
    U = ExteriorHarmonic(n=n, R=family.shell_outer, monopole_coeff=charge)
    return FamilyMember(label=f"bump_q{charge:g}", kind=FamilyKind.BUMP, metric=g, U=U,
                        mass=2.0 * charge)


def composite(n: int, charge: float, family: FamilySpec, grid: GridSpec) -> FamilyMember:
    """The shell around a Schwarzschild core of mass ``family.core_mass``; two ends."""
    core = family.core_mass
    inner = "second_end" if core > 0 else "regular"
    r_min = family.shell_inner / 4.0 if core > 0 else float(get_setting("FILLED_CENTER_RADIUS"))
    g = _shell_metric(n, charge, family, grid, core, r_min, inner)
    U = ExteriorHarmonic(n=n, R=family.shell_outer, monopole_coeff=0.5 * core + charge)
    return FamilyMember(label=f"composite_q{charge:g}", kind=FamilyKind.COMPOSITE, metric=g, U=U,
                        mass=core + 2.0 * charge)


def family_members(scenario: Scenario, grid: Optional[GridSpec] = None) -> List[FamilyMember]:
    """
    Build every member a scenario names.

    Args:
        scenario: Validated scenario
        grid: Grid override (e.g. from --grid-points)

    Returns:
        Members in the order the scenario lists them
    """
    grid = grid or scenario.grid
    family = scenario.family
    n = scenario.n
    if family.kind == FamilyKind.SCHWARZSCHILD:
        members = [schwarzschild(n, m, grid) for m in family.masses]
    elif family.kind == FamilyKind.BUMP:
        members = [bump(n, q, family, grid) for q in family.amplitudes]
    else:
        members = [composite(n, q, family, grid) for q in family.amplitudes]
    logger.info(f"Built {len(members)} {family.kind.value} members (n = {n})")
    return members
