"""
ADM mass by flux integrals and limit extrapolation.
"""
import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import OptimizeWarning, curve_fit

from .errors import DomainError, FitFailure, MarginError
from .harmonic import ExteriorHarmonic, mass_from_expansion
from .metric import ConformallyFlatMetric, Metric, RadialConformalFactor, RadialMetric
from .quadrature import sphere_sample, unit_sphere_area
from ..schemas.models import MassReportRecord
from ..utils.config_utils import get_setting
from .grid import STENCIL_HALF_WIDTH, radial_derivatives

logger = logging.getLogger(__name__)


@dataclass
class MassReport:
    """Flux samples and their extrapolated limit."""
    radii: List[float]
    flux_values: List[float]
    extrapolated_mass: float
    convergence_order: float
    fit_method: str
    fit_residual: float
    expansion_mass: Optional[float] = None
    discrepancy: Optional[float] = field(default=None)

    def __post_init__(self):
        if np.any(np.diff(self.radii) <= 0):
            raise ValueError("radii must be strictly increasing")
        if self.expansion_mass is not None:
            self.discrepancy = abs(self.extrapolated_mass - self.expansion_mass)

    def to_record(self) -> MassReportRecord:
        return MassReportRecord(
            radii=list(self.radii), flux_values=list(self.flux_values),
            extrapolated_mass=self.extrapolated_mass, expansion_mass=self.expansion_mass,
            discrepancy=self.discrepancy, convergence_order=self.convergence_order,
            fit_method=self.fit_method, fit_residual=self.fit_residual,
        )

    def csv_row(self) -> Dict[str, object]:
        """Flat row: summary columns followed by rho_k / flux_k pairs."""
        row: Dict[str, object] = {
            "extrapolated_mass": repr(self.extrapolated_mass),
            "expansion_mass": "" if self.expansion_mass is None else repr(self.expansion_mass),
            "discrepancy": "" if self.discrepancy is None else repr(self.discrepancy),
            "convergence_order": repr(self.convergence_order),
            "fit_method": self.fit_method,
        }
        for k, (rho, flux) in enumerate(zip(self.radii, self.flux_values)):
            row[f"rho_{k}"] = repr(rho)
            row[f"flux_{k}"] = repr(flux)
        return row


# ---------------------------------------------------------------------------
# Flux integrals
# ---------------------------------------------------------------------------

def _radial_flux_profile(g: RadialMetric) -> np.ndarray:
    """rho^(n-1) ((A - B)/rho - B') / 2 at every node (exact angular reduction)."""
    dB, _ = radial_derivatives(g.r, g.B)
    return 0.5 * g.r ** (g.n - 1) * ((g.A - g.B) / g.r - dB)


def adm_flux(g: Metric, rho: float, order: Optional[int] = None) -> float:
    """
    Flux integral (1/(2(n-1) omega)) int_{S_rho} (g_ij,i - g_ii,j) nu_j dmu.

    Args:
        g: Conformally flat or radial metric
        rho: Sphere radius
        order: Gauss order of the sphere rule (conformally flat metrics)

    Returns:
        Flux value at rho
    """
    if isinstance(g, RadialMetric):
        return g._interpolate(_radial_flux_profile(g), rho)
    if rho < g.R * (1 - 1e-12):
        raise DomainError(f"rho = {rho:g} lies inside B_R (R = {g.R:g})")
    n = g.n
    sample = sphere_sample(n, rho, order or int(get_setting("SPHERE_ORDER")))
    points = sample.points
    U = g.factor.eval(points)
    # g = psi delta: (g_ij,i - g_ii,j) nu_j = (1 - n) d_nu psi
    dpsi = (4.0 / (n - 2.0)) * U[:, None] ** ((6.0 - n) / (n - 2.0)) * g.factor.gradient(points)
    normal_derivative = np.sum(dpsi * sample.directions, axis=1)
    return -sample.integrate(normal_derivative) / (2.0 * unit_sphere_area(n))


def default_radii(rho_max: float, count: Optional[int] = None) -> np.ndarray:
    """rho_k = rho_max 2^(-k/2), returned in increasing order."""
    count = count or int(get_setting("MASS_RADII"))
    return np.sort(rho_max * 2.0 ** (-0.5 * np.arange(count)))


def extrapolate_limit(radii, values, tolerance: Optional[float] = None) -> Tuple[float, float, float, str]:
    """
    Limit of values(rho) as rho -> infinity.

    Fits m + c rho^(-beta) by nonlinear least squares; falls back to a linear
    fit in (1, rho^-1, rho^-2) (beta reported as 1) when the nonlinear fit is
    ill-conditioned or misses the tolerance.

    Returns:
        (limit, beta, max residual, method)
    """
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    tolerance = tolerance if tolerance is not None else float(get_setting("MASS_FIT_TOLERANCE"))
    scale = max(1.0, float(np.max(np.abs(values))))
    if np.ptp(values) <= 1e-14 * scale:
        return float(np.mean(values)), float("nan"), float(np.ptp(values)), "constant"

    t = radii / radii[-1]

    def model(t, m, c, beta):
        return m + c * t ** (-beta)

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", OptimizeWarning)
            guess = (values[-1], values[0] - values[-1], 1.0)
            params, cov = curve_fit(model, t, values, p0=guess, maxfev=20000)
        residual = float(np.max(np.abs(model(t, *params) - values)))
        if np.all(np.isfinite(cov)) and 0.0 < params[2] < 10.0 and residual <= tolerance * scale:
            return float(params[0]), float(params[2]), residual, "power_fit"
        logger.debug(f"Power fit rejected (beta={params[2]:.3g}, residual={residual:.2e})")
    except (RuntimeError, OptimizeWarning, ValueError) as e:
        logger.debug(f"Power fit failed: {e}")

    design = np.column_stack([np.ones_like(t), 1.0 / t, 1.0 / t ** 2])
    coeffs, *_ = np.linalg.lstsq(design, values, rcond=None)
    residual = float(np.max(np.abs(design @ coeffs - values)))
    if residual > tolerance * scale:
        raise FitFailure(
            f"Mass extrapolation residual {residual:.3e} above tolerance",
            {"radii": radii.tolist(), "values": values.tolist(), "residual": residual},
        )
    return float(coeffs[0]), 1.0, residual, "richardson"


def _expansion_mass(g: Metric) -> Optional[float]:
    if isinstance(g, ConformallyFlatMetric):
        if isinstance(g.factor, ExteriorHarmonic):
            return mass_from_expansion(g.factor)
        return None
    edge = -1 - STENCIL_HALF_WIDTH
    if g.R_flat is None or not g.is_conformally_flat_at(edge):
        return None
    U = g.harmonic_factor()[edge]
    return float(2.0 * (U - 1.0) * g.r[edge] ** (g.n - 2))


def adm_mass(g: Metric, radii=None, rho_max: Optional[float] = None) -> MassReport:
    """
    ADM mass with extrapolation of the flux integral.

    Args:
        g: Metric (conformally flat or radial)
        radii: Evaluation radii; default ``default_radii(rho_max)``
        rho_max: Largest radius; defaults to MASS_RHO_MAX_CONFORMAL * R for
            harmonic factors and the last stencil-safe node otherwise

    Returns:
        MassReport
    """
    if radii is None:
        if rho_max is None:
            if isinstance(g, RadialMetric):
                rho_max = float(g.r[-1 - STENCIL_HALF_WIDTH])
            elif isinstance(g.factor, RadialConformalFactor):
                rho_max = float(g.factor.r[-1])
            else:
                rho_max = float(get_setting("MASS_RHO_MAX_CONFORMAL")) * g.R
        radii = default_radii(rho_max)
    radii = np.asarray(radii, dtype=float)

    if isinstance(g, RadialMetric):
        lo, hi = g.r[STENCIL_HALF_WIDTH], g.r[-1 - STENCIL_HALF_WIDTH]
        if radii[0] < lo * (1 - 1e-12) or radii[-1] > hi * (1 + 1e-12):
            raise MarginError(f"mass radii [{radii[0]:g}, {radii[-1]:g}] leave the stencil-safe range")
        spline = CubicSpline(np.log(g.r), _radial_flux_profile(g))
        flux = spline(np.log(radii))
    else:
        flux = np.array([adm_flux(g, rho) for rho in radii])

    mass, beta, residual, method = extrapolate_limit(radii, flux)
    report = MassReport(
        radii=radii.tolist(), flux_values=flux.tolist(), extrapolated_mass=mass,
        convergence_order=beta, fit_method=method, fit_residual=residual,
        expansion_mass=_expansion_mass(g),
    )
    logger.debug(f"Mass fit converged: m = {mass:.12g} ({method}, beta = {beta:.3g})")
    return report


# ---------------------------------------------------------------------------
# Mass differences
# ---------------------------------------------------------------------------

def monopole_shift(n: int, r_edge: float, u_edge: float, U_edge: float = 1.0) -> float:
    """
    Mass change 2 U (u - 1) r^(n-2) read at the outer edge.

    Exact when U u - 1 is a pure monopole beyond the edge, which the matched
    Robin condition of the solver enforces.
    """
    return float(2.0 * U_edge * (u_edge - 1.0) * r_edge ** (n - 2))


def mass_difference_flux(r: np.ndarray, u: np.ndarray, U: ExteriorHarmonic,
                         cross_check: bool = True) -> float:
    """
    m(U u) - m(U) = -2/(omega (n-2)) lim int_{S_rho} u du/dr dmu.

    Args:
        r: Log-uniform radii (r[0] >= U.R)
        u: Radial samples of u, u -> 1
        U: Harmonic factor of the end
        cross_check: Also compute adm_mass of the composed metric and log the gap

    Returns:
        Mass difference
    """
    n = U.n
    r = np.asarray(r, dtype=float)
    u = np.asarray(u, dtype=float)
    du, _ = radial_derivatives(r, u)
    profile = -2.0 / (n - 2.0) * r ** (n - 1) * u * du
    rho_max = r[-1 - STENCIL_HALF_WIDTH]
    radii = default_radii(rho_max)
    values = CubicSpline(np.log(r), profile)(np.log(radii))
    difference, _, _, _ = extrapolate_limit(radii, values)

    if cross_check and not U.higher_coeffs and not U.point_sources:
        axis = np.zeros((r.size, n))
        axis[:, 0] = r
        composed = RadialMetric.from_conformal_factor(n, r, U.eval(axis) * u, p=float(n - 2))
        other = adm_mass(composed).extrapolated_mass - mass_from_expansion(U)
        if abs(other - difference) > 1e-6 * max(1.0, abs(difference)):
            logger.warning(f"Mass difference routes disagree: flux {difference:.10g}, composed {other:.10g}")
    return difference


def rescale_metric(g: Metric, lam: float) -> Metric:
    """
    Pull back under y = lam x and multiply by lam^2; the mass scales by lam^(n-2).
    """
    if lam <= 0:
        raise ValueError(f"scale must be positive, got {lam}")
    if isinstance(g, RadialMetric):
        return RadialMetric(n=g.n, r=g.r * lam, A=g.A, B=g.B, p=g.p,
                            R_flat=None if g.R_flat is None else g.R_flat * lam, inner=g.inner)
    U = g.factor
    if isinstance(U, RadialConformalFactor):
        return ConformallyFlatMetric(RadialConformalFactor(n=U.n, r=U.r * lam, values=U.values))
    n = U.n
    scaled = ExteriorHarmonic(
        n=n, R=U.R * lam, monopole_coeff=U.monopole_coeff * lam ** (n - 2),
        higher_coeffs=tuple((l, idx, c * lam ** (n - 2 + l)) for l, idx, c in U.higher_coeffs),
        point_sources=tuple((tuple(np.asarray(p) * lam), s * lam ** (n - 2)) for p, s in U.point_sources),
        check_positivity=False,
    )
    return ConformallyFlatMetric(scaled)
