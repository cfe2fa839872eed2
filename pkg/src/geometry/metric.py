"""
Conformally flat and spherically symmetric metrics.

Sign convention: Delta = div grad, so Delta |x|^2 = 2n in flat space. The
conformal Laplacian is L_g u = Delta_g u - (n-2)/(4(n-1)) R_g u throughout;
the constant 4(n-1)/(n-2) that sometimes appears in front of R_g in the
definition of L_g is the coefficient of the scalar curvature transformation
law, not of the operator.
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

from .errors import AdmissionError, DomainError, MarginError
from .harmonic import ExteriorHarmonic
from .quadrature import sphere_sample, unit_sphere_area
from ..schemas.models import RadialMetricHeader
from ..utils.config_utils import get_setting
from .grid import STENCIL_HALF_WIDTH, log_grid, log_step, radial_derivatives

logger = logging.getLogger(__name__)


def conformal_coefficient(n: int) -> float:
    """(n-2) / (4(n-1)), the coefficient of R_g in the conformal Laplacian."""
    return (n - 2.0) / (4.0 * (n - 1.0))


# ---------------------------------------------------------------------------
# Conformal factors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialConformalFactor:
    """
    A positive radial conformal factor sampled on a log grid.

    Exposes eval / gradient / hessian / laplacian like ExteriorHarmonic so that
    ConformallyFlatMetric can use either.
    """
    n: int
    r: np.ndarray
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        log_step(self.r)
        if np.any(np.asarray(self.values) <= 0):
            raise AdmissionError("positivity", "conformal factor must be positive")

    @property
    def R(self) -> float:
        return float(self.r[0])

    @cached_property
    def _spline(self) -> CubicSpline:
        return CubicSpline(np.log(self.r), self.values)

    def profile(self, radius: np.ndarray, order: int = 0) -> np.ndarray:
        """u, u' or u'' at the given radii."""
        radius = np.asarray(radius, dtype=float)
        if np.any(radius < self.r[0] * (1 - 1e-12)) or np.any(radius > self.r[-1] * (1 + 1e-12)):
            raise DomainError(f"radius outside the sampled range [{self.r[0]:g}, {self.r[-1]:g}]")
        x = np.log(radius)
        if order == 0:
            return self._spline(x)
        ux = self._spline(x, 1)
        if order == 1:
            return ux / radius
        return (self._spline(x, 2) - ux) / radius ** 2

    def _split(self, x) -> Tuple[np.ndarray, np.ndarray, bool]:
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        return pts, np.linalg.norm(pts, axis=1), single

    def eval(self, x) -> np.ndarray:
        pts, radius, single = self._split(x)
        out = self.profile(radius)
        return float(out[0]) if single else out

    __call__ = eval

    def gradient(self, x) -> np.ndarray:
        pts, radius, single = self._split(x)
        out = (self.profile(radius, 1) / radius)[:, None] * pts
        return out[0] if single else out

    def hessian(self, x) -> np.ndarray:
        pts, radius, single = self._split(x)
        d1 = self.profile(radius, 1)[:, None, None]
        d2 = self.profile(radius, 2)[:, None, None]
        unit = pts / radius[:, None]
        radial = unit[:, :, None] * unit[:, None, :]
        out = d2 * radial + (d1 / radius[:, None, None]) * (np.eye(self.n)[None] - radial)
        return out[0] if single else out

    def laplacian(self, x) -> np.ndarray:
        return np.trace(self.hessian(x), axis1=-2, axis2=-1)


ConformalFactor = Union[ExteriorHarmonic, RadialConformalFactor]


def conformal_ricci(n: int, U: np.ndarray, grad: np.ndarray, hess: np.ndarray) -> np.ndarray:
    """
    Ricci tensor (covariant, Cartesian components) of U^(4/(n-2)) delta.

    With g = e^(2f) delta and f = 2/(n-2) log U:
        Ric = -(n-2)(Hess f - df df) - (Delta f + (n-2)|df|^2) delta

    Args:
        n: Dimension
        U: Values, shape (m,)
        grad: Gradients, shape (m, n)
        hess: Hessians, shape (m, n, n)

    Returns:
        Ricci components, shape (m, n, n)
    """
    k = 2.0 / (n - 2.0)
    U = np.asarray(U, dtype=float)[:, None]
    df = k * grad / U
    ddf = k * (hess / U[:, :, None] - grad[:, :, None] * grad[:, None, :] / (U ** 2)[:, :, None])
    dfdf = df[:, :, None] * df[:, None, :]
    lap_f = np.trace(ddf, axis1=1, axis2=2)
    norm_sq = np.sum(df ** 2, axis=1)
    trace_part = (lap_f + (n - 2.0) * norm_sq)[:, None, None] * np.eye(n)[None]
    ric = -(n - 2.0) * (ddf - dfdf) - trace_part
    return 0.5 * (ric + np.swapaxes(ric, 1, 2))


# ---------------------------------------------------------------------------
# ConformallyFlatMetric
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConformallyFlatMetric:
    """g_ij = U^(4/(n-2)) delta_ij on the exterior chart |x| >= R."""
    factor: ConformalFactor

    @property
    def n(self) -> int:
        return self.factor.n

    @property
    def R(self) -> float:
        return self.factor.R

    @property
    def exponent(self) -> float:
        return 4.0 / (self.n - 2.0)

    def metric_tensor(self, x) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        psi = self.factor.eval(pts) ** self.exponent
        return psi[:, None, None] * np.eye(self.n)[None]

    def scalar_curvature(self, x) -> np.ndarray:
        """R = -(4(n-1)/(n-2)) U^(-(n+2)/(n-2)) Delta U."""
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        n = self.n
        U = self.factor.eval(pts)
        lap = self.factor.laplacian(pts)
        return -(4.0 * (n - 1.0) / (n - 2.0)) * U ** (-(n + 2.0) / (n - 2.0)) * lap

    def ricci(self, x) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        return conformal_ricci(self.n, self.factor.eval(pts), self.factor.gradient(pts), self.factor.hessian(pts))

    def ricci_norm_sq(self, x) -> np.ndarray:
        """|Ric|_g^2 = U^(-8/(n-2)) sum_ij Ric_ij^2."""
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        ric = self.ricci(pts)
        return self.factor.eval(pts) ** (-2.0 * self.exponent) * np.sum(ric ** 2, axis=(1, 2))

    def ricci_trace(self, x) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        return self.factor.eval(pts) ** (-self.exponent) * np.trace(self.ricci(pts), axis1=1, axis2=2)

    def volume_density(self, x) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        return self.factor.eval(pts) ** (2.0 * self.n / (self.n - 2.0))

    def is_radial(self) -> bool:
        if isinstance(self.factor, RadialConformalFactor):
            return True
        return not self.factor.higher_coeffs and not self.factor.point_sources

    def to_radial(self, r_min: Optional[float] = None, r_max: Optional[float] = None,
                  points_per_decade: int = 64, outer_decades: float = 4.0,
                  inner: str = "regular") -> "RadialMetric":
        """Sample a radial conformal factor onto a RadialMetric (A = B = U^(4/(n-2)))."""
        if not self.is_radial():
            raise AdmissionError("radial", "only radial conformal factors convert to RadialMetric")
        r_min = r_min or self.R
        r_max = r_max or self.R * 10.0 ** outer_decades
        r = log_grid(r_min, r_max, points_per_decade)
        axis = np.zeros((r.size, self.n))
        axis[:, 0] = r
        psi = self.factor.eval(axis) ** self.exponent
        return RadialMetric(n=self.n, r=r, A=psi, B=psi.copy(), p=float(self.n - 2),
                            R_flat=self.R, inner=inner)


# ---------------------------------------------------------------------------
# RadialMetric
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialMetric:
    """
    g = A(r) dr^2 + B(r) r^2 (round metric) on a log-uniform grid.

    ``R_flat`` marks where the end becomes harmonically flat (A = B = U^(4/(n-2))
    with U harmonic); ``inner`` records whether the grid starts at a filled
    center ("regular") or at a second, inverted end ("second_end").
    """
    n: int
    r: np.ndarray
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    p: float = 1.0
    R_flat: Optional[float] = None
    inner: str = "regular"

    def __post_init__(self):
        for name in ("r", "A", "B"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.n < 3:
            raise AdmissionError("dimension", f"n must be at least 3, got {self.n}")
        if not (self.r.shape == self.A.shape == self.B.shape):
            raise AdmissionError("shape", "r, A and B must have equal length")
        log_step(self.r)
        if np.any(self.A <= 0) or np.any(self.B <= 0):
            raise AdmissionError("riemannian", "A and B must be positive everywhere")
        if self.inner not in ("regular", "second_end"):
            raise AdmissionError("inner", f"unknown inner model {self.inner!r}")

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_conformal_factor(cls, n: int, r: np.ndarray, U: np.ndarray, **kwargs) -> "RadialMetric":
        psi = np.asarray(U, dtype=float) ** (4.0 / (n - 2.0))
        return cls(n=n, r=r, A=psi, B=psi.copy(), **kwargs)

    @classmethod
    def schwarzschild_isotropic(cls, n: int, mass: float, r_min: float = 1.0,
                                points_per_decade: int = 64, outer_decades: float = 4.0) -> "RadialMetric":
        """Spatial Schwarzschild slice, U = 1 + (m/2) r^(2-n); two ended for m > 0."""
        r = log_grid(r_min, r_min * 10.0 ** outer_decades, points_per_decade)
        U = 1.0 + 0.5 * mass * r ** (2.0 - n)
        return cls.from_conformal_factor(n, r, U, p=float(n - 2), R_flat=r_min,
                                         inner="second_end" if mass > 0 else "regular")

    @classmethod
    def schwarzschild_areal(cls, n: int, mass: float, r_min: float, r_max: float,
                            points_per_decade: int = 64) -> "RadialMetric":
        """A = (1 - 2m r^(2-n))^-1, B = 1 (areal radius coordinates)."""
        r = log_grid(r_min, r_max, points_per_decade)
        lapse = 1.0 - 2.0 * mass * r ** (2.0 - n)
        if np.any(lapse <= 0):
            raise AdmissionError("riemannian", "grid reaches the horizon 2m r^(2-n) >= 1")
        return cls(n=n, r=r, A=1.0 / lapse, B=np.ones_like(r), p=float(n - 2))

    # -- derived profiles -------------------------------------------------

    @cached_property
    def h(self) -> float:
        return log_step(self.r)

    @cached_property
    def _derivatives(self) -> Dict[str, np.ndarray]:
        dA, ddA = radial_derivatives(self.r, self.A)
        dB, ddB = radial_derivatives(self.r, self.B)
        return {"dA": dA, "ddA": ddA, "dB": dB, "ddB": ddB}

    @cached_property
    def _warp(self) -> Dict[str, np.ndarray]:
        r, A, B = self.r, self.A, self.B
        d = self._derivatives
        sqrtB = np.sqrt(B)
        C = r * sqrtB
        dC = sqrtB + 0.5 * r * d["dB"] / sqrtB
        ddC = d["dB"] / sqrtB - 0.25 * r * d["dB"] ** 2 / B ** 1.5 + 0.5 * r * d["ddB"] / sqrtB
        C_dot = dC / np.sqrt(A)
        C_ddot = ddC / A - dC * d["dA"] / (2.0 * A ** 2)
        return {"C": C, "C_dot": C_dot, "C_ddot": C_ddot}

    @cached_property
    def ricci_profile(self) -> Tuple[np.ndarray, np.ndarray]:
        """Orthonormal-frame Ricci eigenvalues (radial, tangential)."""
        n = self.n
        w = self._warp
        radial = -(n - 1.0) * w["C_ddot"] / w["C"]
        tangential = -w["C_ddot"] / w["C"] + (n - 2.0) * (1.0 - w["C_dot"] ** 2) / w["C"] ** 2
        return radial, tangential

    @cached_property
    def scalar_curvature_profile(self) -> np.ndarray:
        radial, tangential = self.ricci_profile
        return radial + (self.n - 1.0) * tangential

    @cached_property
    def ricci_norm_sq_profile(self) -> np.ndarray:
        radial, tangential = self.ricci_profile
        return radial ** 2 + (self.n - 1.0) * tangential ** 2

    @cached_property
    def volume_density(self) -> np.ndarray:
        """sqrt(det g) per unit dr and unit-sphere area: sqrt(A) B^((n-1)/2) r^(n-1)."""
        return np.sqrt(self.A) * self.B ** ((self.n - 1.0) / 2.0) * self.r ** (self.n - 1.0)

    def _interpolate(self, profile: np.ndarray, radius: float) -> float:
        lo, hi = self.r[STENCIL_HALF_WIDTH], self.r[-1 - STENCIL_HALF_WIDTH]
        if radius < lo * (1 - 1e-12) or radius > hi * (1 + 1e-12):
            raise MarginError(f"r = {radius:g} outside the stencil-safe range [{lo:g}, {hi:g}]")
        index = int(np.argmin(np.abs(self.r - radius)))
        if abs(self.r[index] - radius) <= 1e-12 * radius:
            return float(profile[index])
        return float(CubicSpline(np.log(self.r), profile)(np.log(radius)))

    def scalar_curvature(self, radius: float) -> float:
        return self._interpolate(self.scalar_curvature_profile, radius)

    def ricci(self, radius: float) -> Tuple[float, float]:
        radial, tangential = self.ricci_profile
        return self._interpolate(radial, radius), self._interpolate(tangential, radius)

    # -- operators --------------------------------------------------------

    def laplacian_apply(self, u: np.ndarray) -> np.ndarray:
        """Delta_g u for radial samples u, in divergence form."""
        n = self.n
        du, _ = radial_derivatives(self.r, u)
        flux = self.B ** ((n - 1.0) / 2.0) * self.r ** (n - 1.0) / np.sqrt(self.A) * du
        dflux, _ = radial_derivatives(self.r, flux)
        return dflux / self.volume_density

    def conformal_laplacian_apply(self, u: np.ndarray) -> np.ndarray:
        return self.laplacian_apply(u) - conformal_coefficient(self.n) * self.scalar_curvature_profile * u

    def conformal_rescale(self, w: np.ndarray) -> "RadialMetric":
        """w^(4/(n-2)) g."""
        psi = np.asarray(w, dtype=float) ** (4.0 / (self.n - 2.0))
        return RadialMetric(n=self.n, r=self.r, A=self.A * psi, B=self.B * psi,
                            p=self.p, R_flat=self.R_flat, inner=self.inner)

    def harmonic_factor(self) -> np.ndarray:
        """U = B^((n-2)/4), meaningful where A = B (harmonically flat region)."""
        return self.B ** ((self.n - 2.0) / 4.0)

    @cached_property
    def _refinement_gap(self) -> float:
        """max |R_h - R_2h| over the even interior nodes, R_2h sampled on every other node."""
        if (self.r.size + 1) // 2 < 2 * STENCIL_HALF_WIDTH + 3:
            return 0.0
        coarse = RadialMetric(n=self.n, r=self.r[::2], A=self.A[::2], B=self.B[::2],
                              p=self.p, R_flat=self.R_flat, inner=self.inner)
        keep = slice(STENCIL_HALF_WIDTH, coarse.r.size - STENCIL_HALF_WIDTH)
        fine = self.scalar_curvature_profile[::2]
        return float(np.max(np.abs(fine[keep] - coarse.scalar_curvature_profile[keep])))

    def curvature_tolerance(self) -> float:
        """
        Noise floor of the sampled curvature.

        The largest of SCALAR_CURVATURE_TOLERANCE, the roundoff of a second
        difference at the innermost node, and CURVATURE_REFINEMENT_SAFETY
        times the gap between R_g on this grid and on every other node. For
        a fourth-order stencil the gap is about 15 times the truncation error,
        so the floor follows the error where the profile is least smooth.
        """
        roundoff = 64.0 * np.finfo(float).eps * float(max(np.max(self.A), np.max(self.B))) / (self.h * self.r[0]) ** 2
        return max(float(get_setting("SCALAR_CURVATURE_TOLERANCE")), roundoff,
                   float(get_setting("CURVATURE_REFINEMENT_SAFETY")) * self._refinement_gap)

    def harmonic_coefficients(self, tol: float = 1e-12) -> Optional[Tuple[float, float]]:
        """
        (alpha, beta) when A = B and U = alpha + beta r^(2-n) on the whole grid.

        Such a metric is scalar-flat exactly, whatever its sampled curvature
        shows. Returns None otherwise.
        """
        if np.any(np.abs(self.A - self.B) > tol * self.B):
            return None
        U = self.harmonic_factor()
        basis = np.column_stack([np.ones_like(self.r), self.r ** (2.0 - self.n)])
        coeffs, *_ = np.linalg.lstsq(basis, U, rcond=None)
        if np.max(np.abs(basis @ coeffs - U)) > tol * np.max(U):
            return None
        return float(coeffs[0]), float(coeffs[1])

    def is_conformally_flat_at(self, index: int, tol: float = 1e-10) -> bool:
        return abs(self.A[index] - self.B[index]) <= tol * self.B[index]

    def decay_report(self, decades: float = 3.0) -> Dict[str, float]:
        """
        Empirical decay exponents over the outer ``decades`` of the grid:
        p_A, p_B (|A-1|, |B-1|), p_dB (|B'|, expected p+1) and q (|R_g|).
        Returns inf where the quantity vanishes identically.
        """
        window = (self.r >= self.r[-1] / 10.0 ** decades)
        window[:STENCIL_HALF_WIDTH] = False
        window[-STENCIL_HALF_WIDTH:] = False
        logr = np.log(self.r[window])

        def slope(values: np.ndarray) -> float:
            values = np.abs(values[window])
            if np.max(values) < 1e-300 or np.any(values == 0):
                return float("inf")
            return float(-np.polyfit(logr, np.log(values), 1)[0])

        return {
            "p_A": slope(self.A - 1.0),
            "p_B": slope(self.B - 1.0),
            "p_dB": slope(self._derivatives["dB"]),
            "q": slope(self.scalar_curvature_profile),
        }

    def header(self) -> RadialMetricHeader:
        return RadialMetricHeader(n=self.n, R_flat=self.R_flat, p=self.p, inner=self.inner)


Metric = Union[ConformallyFlatMetric, RadialMetric]


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def scalar_curvature(g: Metric, x_or_r) -> Union[float, np.ndarray]:
    """Scalar curvature at a Cartesian point (conformally flat) or radius (radial)."""
    if isinstance(g, RadialMetric):
        return g.scalar_curvature(float(x_or_r))
    values = g.scalar_curvature(x_or_r)
    return float(values[0]) if np.asarray(x_or_r).ndim == 1 else values


def ricci(g: Metric, x_or_r):
    """Covariant Ricci tensor (conformally flat) or (radial, tangential) eigenvalues (radial)."""
    if isinstance(g, RadialMetric):
        return g.ricci(float(x_or_r))
    values = g.ricci(x_or_r)
    return values[0] if np.asarray(x_or_r).ndim == 1 else values


def shell_integral(func: Callable[[np.ndarray], np.ndarray], n: int, r1: float, r2: float,
                   panels: int = 256, sphere_order: int = 16) -> Tuple[float, float]:
    """
    Integrate func(points) over the Euclidean shell r1 < |x| < r2.

    Composite Simpson in log r (fourth order) times a product sphere rule;
    the error estimate compares ``panels`` with ``panels/2``.

    Returns:
        (value, error estimate)
    """
    unit = sphere_sample(n, 1.0, sphere_order)

    def radial_profile(count: int) -> Tuple[np.ndarray, np.ndarray]:
        x = np.linspace(np.log(r1), np.log(r2), count + 1)
        radius = np.exp(x)
        shells = np.array([np.dot(unit.weights, func(rho * unit.directions)) for rho in radius])
        return x, shells * radius ** n

    x, values = radial_profile(panels)
    fine = simpson(values, x=x)
    coarse = simpson(values[::2], x=x[::2])
    return float(fine), float(abs(fine - coarse) / 15.0)


def ricci_norm_sq_integral(g: Metric, region: Tuple[float, float],
                           weight: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                           panels: int = 256) -> Tuple[float, float]:
    """
    Integral of weight(r) |Ric|_g^2 dmu_g over the annulus region.

    Returns:
        (value, refinement-based error estimate)
    """
    rho1, rho2 = region
    if rho2 <= rho1:
        raise DomainError("annulus must satisfy rho1 < rho2")
    weight = weight or (lambda radius: np.ones_like(radius))
    if isinstance(g, RadialMetric):
        if rho1 < g.r[0] * (1 - 1e-12) or rho2 > g.r[-1] * (1 + 1e-12):
            raise DomainError(f"annulus [{rho1:g}, {rho2:g}] leaves the grid")
        # integrand per unit log r, splined so the annulus ends need not be nodes
        x = np.log(g.r)
        integrand = (unit_sphere_area(g.n) * weight(g.r) * g.ricci_norm_sq_profile
                     * g.volume_density * g.r)
        bounds = (np.log(rho1), np.log(rho2))
        fine = CubicSpline(x, integrand).integrate(*bounds)
        coarse = CubicSpline(x[::2], integrand[::2]).integrate(*bounds)
        return float(fine), float(abs(fine - coarse) / 15.0)
    if rho1 < g.R * (1 - 1e-12):
        raise DomainError(f"annulus starts inside B_R (R = {g.R})")

    def integrand(points: np.ndarray) -> np.ndarray:
        radius = np.linalg.norm(points, axis=1)
        return weight(radius) * g.ricci_norm_sq(points) * g.volume_density(points)

    return shell_integral(integrand, g.n, rho1, rho2, panels=panels)


def grad_u_fourth_integral(U: ConformalFactor, a: float, panels: int = 256) -> float:
    """Euclidean integral of |grad U|^4 over B_3a minus B_(a/2)."""
    if a / 2.0 < U.R * (1 - 1e-12):
        raise DomainError(f"a/2 = {a / 2.0:g} lies inside B_R (R = {U.R:g})")
    value, error = shell_integral(lambda pts: np.sum(U.gradient(pts) ** 2, axis=1) ** 2,
                                  U.n, a / 2.0, 3.0 * a, panels=panels)
    logger.debug(f"grad U^4 integral {value:.6e} (error estimate {error:.1e})")
    return value


def metric_laplacian_fd(factor: ConformalFactor, func: Callable[[np.ndarray], np.ndarray],
                        x: np.ndarray, h: Optional[float] = None) -> float:
    """
    Delta_g func at x for g = U^(4/(n-2)) delta by central differences.

    Divergence form Delta_g f = U^(-2n/(n-2)) d_i(U^2 d_i f), second order,
    improved by one Richardson step (h and h/2).
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    h = h or 1e-2 * np.linalg.norm(x)

    def divergence(step: float) -> float:
        total = 0.0
        f0 = float(func(x[None, :])[0])
        for i in range(n):
            e = np.zeros(n)
            e[i] = step
            fp, fm = float(func((x + e)[None, :])[0]), float(func((x - e)[None, :])[0])
            up = float(factor.eval(x + 0.5 * e)) ** 2
            um = float(factor.eval(x - 0.5 * e)) ** 2
            total += (up * (fp - f0) - um * (f0 - fm)) / step ** 2
        return total

    fine, coarse = divergence(0.5 * h), divergence(h)
    return (4.0 * fine - coarse) / 3.0 * float(factor.eval(x)) ** (-2.0 * n / (n - 2.0))


def conformal_laplacian_apply(g: Metric, u, point) -> float:
    """
    L_g u = Delta_g u - (n-2)/(4(n-1)) R_g u at a point.

    For a RadialMetric ``u`` is sampled on the grid and ``point`` is a radius
    (stencil margin enforced); for a ConformallyFlatMetric ``u`` is a
    vectorized function of points and ``point`` a Cartesian point.
    """
    if isinstance(g, RadialMetric):
        values = g.conformal_laplacian_apply(np.asarray(u, dtype=float))
        return g._interpolate(values, float(point))
    point = np.asarray(point, dtype=float)
    lap = metric_laplacian_fd(g.factor, u, point)
    curvature = float(g.scalar_curvature(point[None, :])[0])
    return lap - conformal_coefficient(g.n) * curvature * float(u(point[None, :])[0])
