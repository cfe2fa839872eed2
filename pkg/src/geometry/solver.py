"""
Radial boundary-value solver for the conformal Laplace equation.

All solves share one conservative discretisation in x = log r:

    d/dx (w u_x) - V p u = V f,   w = B^((n-1)/2) r^(n-2) / sqrt(A),
                                  V = sqrt(A) B^((n-1)/2) r^n

which is Delta_g u - p u = f for g = A dr^2 + B r^2 dOmega^2. The outer
condition is matched to the harmonic monopole beyond the grid,
(U u)' = (2-n)(U u - 1)/r with U = B^((n-2)/4) at the edge, so that U u - 1
is an exact multiple of r^(2-n) past r_max.
"""
import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from .errors import DomainError, FitFailure, PreconditionViolation, SolverFailure
from .harmonic import ExteriorHarmonic
from .metric import RadialConformalFactor, RadialMetric, conformal_coefficient
from .mass import adm_mass
from ..schemas.models import FlattenRecord
from ..utils.config_utils import get_setting
from .grid import STENCIL_HALF_WIDTH, radial_derivatives

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConformalBVP:
    """
    Delta_g u - potential u = forcing on a radial metric, u -> far_value.

    ``potential`` defaults to (n-2)/(4(n-1)) R_g (the conformal Laplace
    equation); ``inner`` defaults to the metric's own inner model.
    """
    metric: RadialMetric
    potential: Optional[np.ndarray] = field(default=None, repr=False)
    forcing: Optional[np.ndarray] = field(default=None, repr=False)
    far_value: float = 1.0
    inner: Optional[str] = None

    @property
    def inner_condition(self) -> str:
        return self.inner or self.metric.inner

    def potential_values(self) -> np.ndarray:
        if self.potential is None:
            return conformal_coefficient(self.metric.n) * self.metric.scalar_curvature_profile
        return np.asarray(self.potential, dtype=float)

    def forcing_values(self) -> np.ndarray:
        if self.forcing is None:
            return np.zeros_like(self.metric.r)
        return np.asarray(self.forcing, dtype=float)


@dataclass
class BVPSolution:
    """Sampled solution with its solve diagnostics."""
    r: np.ndarray
    u: np.ndarray
    residual: float
    m_matrix: bool
    decay_exponent: Optional[float] = None

    @property
    def v(self) -> np.ndarray:
        return self.u - 1.0


@dataclass
class FlattenResult:
    """g_tilde = w^(4/(n-2)) g is scalar-flat; v = 1/w."""
    g: RadialMetric
    g_tilde: RadialMetric
    w: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    U_tilde: ExteriorHarmonic

    @property
    def U(self) -> np.ndarray:
        return self.g.harmonic_factor()

    def exterior_gap(self, a: float, seed: int = 0, count: int = 1024) -> np.ndarray:
        """
        U - U_tilde read from the sampled g and g_tilde at r = a and at
        ``count`` seeded log-uniform radii in (a, r_max/10].

        Raises:
            DomainError: a outside [R_flat, r_max/10)
        """
        r_far = float(self.g.r[-1]) / 10.0
        start = self.g.R_flat if self.g.R_flat is not None else float(self.g.r[0])
        if not (start <= a < r_far):
            raise DomainError(f"a = {a:g} outside the harmonically flat range [{start:g}, {r_far:g})")
        rng = np.random.default_rng(seed)
        radii = np.concatenate([[a], np.exp(rng.uniform(np.log(a), np.log(r_far), count))])
        U = RadialConformalFactor(self.g.n, self.g.r, self.U)
        U_tilde = RadialConformalFactor(self.g.n, self.g_tilde.r, self.g_tilde.harmonic_factor())
        return U.profile(radii) - U_tilde.profile(radii)

    def to_record(self) -> FlattenRecord:
        return FlattenRecord(
            mass_g=adm_mass(self.g).extrapolated_mass,
            mass_g_tilde=adm_mass(self.g_tilde).extrapolated_mass,
            v_min=float(np.min(self.v)),
            U_tilde=self.U_tilde.to_record(),
        )


# ---------------------------------------------------------------------------
# Discretisation
# ---------------------------------------------------------------------------

def _weights(g: RadialMetric) -> Tuple[np.ndarray, np.ndarray]:
    n = g.n
    spherical = g.B ** ((n - 1.0) / 2.0)
    w = spherical * g.r ** (n - 2.0) / np.sqrt(g.A)
    V = np.sqrt(g.A) * spherical * g.r ** n
    return w, V


def _log_ratio(g: RadialMetric, index: int) -> float:
    """x-derivative of log U, U = B^((n-2)/4), at a grid node."""
    dB, _ = radial_derivatives(g.r, g.B)
    return float((g.n - 2.0) / 4.0 * g.r[index] * dB[index] / g.B[index])


def assemble_operator(bvp: ConformalBVP) -> Tuple[sparse.csr_matrix, np.ndarray]:
    """
    Tridiagonal system for the BVP (finite-volume half cells at both ends).

    Returns:
        (matrix, right-hand side)
    """
    g = bvp.metric
    n = g.n
    h = g.h
    size = g.r.size
    w, V = _weights(g)
    p = bvp.potential_values()
    f = bvp.forcing_values()
    half = 0.5 * (w[:-1] + w[1:])

    lower = half / h ** 2
    upper = half / h ** 2
    diag = np.empty(size)
    diag[1:-1] = -(half[:-1] + half[1:]) / h ** 2 - V[1:-1] * p[1:-1]
    rhs = V * f

    # inner half cell [x0, x0 + h/2]
    upper[0] = 2.0 * half[0] / h ** 2
    diag[0] = -2.0 * half[0] / h ** 2 - V[0] * p[0]
    if bvp.inner_condition == "second_end":
        # u_x = -kappa (u - far_value) matched to the inverted end
        kappa = _log_ratio(g, 0)
        diag[0] += 2.0 * w[0] * kappa / h
        rhs[0] = rhs[0] + 2.0 * w[0] * kappa * bvp.far_value / h

    # outer half cell: u_x = -(n-2)(u - far_value)/U
    U_edge = float(g.harmonic_factor()[-1])
    lower[-1] = 2.0 * half[-1] / h ** 2
    robin = (n - 2.0) / U_edge
    diag[-1] = -2.0 * half[-1] / h ** 2 - 2.0 * w[-1] * robin / h - V[-1] * p[-1]
    rhs[-1] = rhs[-1] - 2.0 * w[-1] * robin * bvp.far_value / h

    matrix = sparse.diags([lower, diag, upper], [-1, 0, 1], format="csr")
    return matrix, rhs


def is_m_matrix(matrix: sparse.spmatrix) -> bool:
    """
    Whether -matrix (tridiagonal) is a nonsingular M-matrix.

    The sign pattern must be positive diagonal and non-positive off-diagonal
    entries; a Z-matrix is then a nonsingular M-matrix exactly when every
    pivot of Gaussian elimination without pivoting is positive.
    """
    M = -sparse.csr_matrix(matrix)
    diag = M.diagonal()
    off = M - sparse.diags(diag)
    if np.any(diag <= 0) or (off.nnz and off.data.max() > 0):
        return False
    lower, upper = M.diagonal(-1), M.diagonal(1)
    pivot = diag[0]
    for k in range(1, diag.size):
        pivot = diag[k] - lower[k - 1] * upper[k - 1] / pivot
        if pivot <= 1e-14 * diag[k]:
            return False
    return True


def _relative_residual(matrix: sparse.spmatrix, rhs: np.ndarray, u: np.ndarray) -> float:
    scale = np.asarray(abs(matrix) @ np.abs(u)).ravel() + np.abs(rhs) + 1e-300
    return float(np.max(np.abs(matrix @ u - rhs) / scale))


def _decay_exponent(r: np.ndarray, v: np.ndarray) -> Optional[float]:
    window = r >= r[-1] / 10.0
    values = np.abs(v[window])
    if np.max(values) < 1e-13 or np.any(values == 0):
        return None
    return float(-np.polyfit(np.log(r[window]), np.log(values), 1)[0])


def solve_radial_bvp(bvp: ConformalBVP, require_m_matrix: bool = False) -> BVPSolution:
    """
    Direct tridiagonal solve of the BVP.

    Args:
        bvp: Problem to solve
        require_m_matrix: Raise instead of warning when the discrete maximum
            principle does not hold

    Raises:
        SolverFailure: singular system, residual above SOLVER_RESIDUAL_TOLERANCE,
            or a required M-matrix property missing
    """
    g = bvp.metric
    matrix, rhs = assemble_operator(bvp)
    m_matrix = is_m_matrix(matrix)
    if not m_matrix:
        if require_m_matrix:
            raise SolverFailure("Assembled operator is not an M-matrix; no discrete maximum principle",
                                {"nodes": g.r.size, "potential_min": float(np.min(bvp.potential_values()))})
        logger.warning("Assembled operator is not an M-matrix (negative potential somewhere)")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", MatrixRankWarning)
            u = spsolve(matrix.tocsc(), rhs)
    except (MatrixRankWarning, RuntimeError) as e:
        raise SolverFailure(f"Singular conformal system: {e}", {"nodes": g.r.size}) from e
    if not np.all(np.isfinite(u)):
        raise SolverFailure("Non-finite solution", {"nodes": g.r.size})
    residual = _relative_residual(matrix, rhs, u)
    tolerance = float(get_setting("SOLVER_RESIDUAL_TOLERANCE"))
    if residual > tolerance:
        raise SolverFailure(f"Residual {residual:.3e} above tolerance {tolerance:.1e}",
                            {"residual": residual, "m_matrix": m_matrix})
    return BVPSolution(r=g.r, u=u, residual=residual, m_matrix=m_matrix,
                       decay_exponent=_decay_exponent(g.r, u - bvp.far_value))


def solve_conformal_factor(bvp: ConformalBVP) -> BVPSolution:
    """
    Solve L_g u = 0 with u -> 1.

    Raises:
        SolverFailure: singular system, residual too large, operator not an
            M-matrix, or u <= 0 somewhere
    """
    logger.debug(f"Solving conformal factor on {bvp.metric.r.size} nodes...")
    solution = solve_radial_bvp(bvp, require_m_matrix=True)
    if np.min(solution.u) <= 0:
        index = int(np.argmin(solution.u))
        raise SolverFailure(
            f"Conformal factor not positive (u = {solution.u[index]:.3e} at r = {solution.r[index]:.4g})",
            {"u_min": float(solution.u[index]), "r": float(solution.r[index]), "m_matrix": solution.m_matrix},
        )
    return solution


def solve_extrapolated(bvp: ConformalBVP) -> BVPSolution:
    """
    Conformal factor with one Richardson step, u_h + (u_h - u_2h)/3.

    u_2h is solved on every other node with the same potential and forcing;
    the correction is splined back to the full grid in log r. Grids that do
    not halve return the plain solve.
    """
    fine = solve_conformal_factor(bvp)
    g = bvp.metric
    if g.r.size % 2 == 0 or (g.r.size + 1) // 2 < 2 * STENCIL_HALF_WIDTH + 3:
        return fine
    half_metric = RadialMetric(n=g.n, r=g.r[::2], A=g.A[::2], B=g.B[::2], p=g.p, R_flat=g.R_flat, inner=g.inner)
    coarse = solve_conformal_factor(ConformalBVP(metric=half_metric, potential=bvp.potential_values()[::2],
                                                 forcing=bvp.forcing_values()[::2], far_value=bvp.far_value,
                                                 inner=bvp.inner))
    correction = CubicSpline(np.log(half_metric.r), (fine.u[::2] - coarse.u) / 3.0)(np.log(g.r))
    u = fine.u + correction
    if np.min(u) <= 0:
        raise SolverFailure("Extrapolated conformal factor not positive", {"u_min": float(np.min(u))})
    logger.debug(f"Richardson correction up to {np.max(np.abs(correction)):.3e}")
    return BVPSolution(r=g.r, u=u, residual=fine.residual, m_matrix=fine.m_matrix and coarse.m_matrix,
                       decay_exponent=_decay_exponent(g.r, u - bvp.far_value))


def shooting_solve(bvp: ConformalBVP, rtol: float = 1e-11, atol: float = 1e-13) -> np.ndarray:
    """
    Independent solve by shooting from the inner boundary with solve_ivp.

    The equation is linear, so two initial-value solves and one linear
    condition at the outer edge determine the solution.
    """
    g = bvp.metric
    n = g.n
    x = np.log(g.r)
    w, V = _weights(g)
    w_spline = CubicSpline(x, w)
    vp_spline = CubicSpline(x, V * bvp.potential_values())
    vf_spline = CubicSpline(x, V * bvp.forcing_values())
    kappa = _log_ratio(g, 0) if bvp.inner_condition == "second_end" else 0.0

    def rhs(t, y, forced):
        u, q = y
        source = vf_spline(t) if forced else 0.0
        return [q / w_spline(t), vp_spline(t) * u + source]

    def integrate(u0: float, ux0: float, forced: bool) -> np.ndarray:
        sol = solve_ivp(rhs, (x[0], x[-1]), [u0, w[0] * ux0], args=(forced,), t_eval=x,
                        method="DOP853", rtol=rtol, atol=atol)
        if not sol.success:
            raise SolverFailure(f"Shooting integration failed: {sol.message}")
        return sol.y

    # u(x0) = c + t, u_x(x0) = -kappa t with c = far_value for a second end
    base_value = bvp.far_value if bvp.inner_condition == "second_end" else 0.0
    particular = integrate(base_value, 0.0, True)
    homogeneous = integrate(1.0, -kappa, False)

    U_edge = float(g.harmonic_factor()[-1])
    robin = (n - 2.0) / U_edge

    def outer_mismatch(y: np.ndarray) -> Tuple[float, float]:
        u_end, ux_end = y[0, -1], y[1, -1] / w[-1]
        return ux_end + robin * u_end, u_end

    p_mis, _ = outer_mismatch(particular)
    h_mis, _ = outer_mismatch(homogeneous)
    t = (robin * bvp.far_value - p_mis) / h_mis
    return particular[0] + t * homogeneous[0]


# ---------------------------------------------------------------------------
# Multi-end bookkeeping
# ---------------------------------------------------------------------------

def _inner_monopole(g: RadialMetric) -> Tuple[float, float]:
    """(alpha, beta) with U = alpha + beta r^(2-n) near the inner node."""
    n = g.n
    U = g.harmonic_factor()
    dU, _ = radial_derivatives(g.r, U)
    r0 = g.r[0]
    beta = -dU[0] * r0 ** (n - 1) / (n - 2.0)
    return float(U[0] - beta * r0 ** (2 - n)), float(beta)


def inner_end_mass(g: RadialMetric) -> float:
    """Mass of the inverted inner end, 2 alpha beta."""
    alpha, beta = _inner_monopole(g)
    return 2.0 * alpha * beta


def inner_end_mass_shift(u: np.ndarray, g: RadialMetric) -> float:
    """Change of the inner-end mass under g -> u^(4/(n-2)) g: 2 beta U(r0)(u(r0) - 1)."""
    if g.inner != "second_end":
        return 0.0
    _, beta = _inner_monopole(g)
    return float(2.0 * beta * g.harmonic_factor()[0] * (u[0] - 1.0))


# ---------------------------------------------------------------------------
# Scalar flattening
# ---------------------------------------------------------------------------

def _fit_flattened_end(g: RadialMetric, product: np.ndarray, snap: bool = False) -> ExteriorHarmonic:
    """
    Monopole fit of U w - 1 over the outer two decades; the chart starts at R_flat.

    With ``snap`` a coefficient within HARMONIC_FIT_TOLERANCE of zero is the
    flat end.
    """
    n = g.n
    start = g.R_flat if g.R_flat is not None else g.r[-1] / 10.0
    window = g.r >= max(start, g.r[-1] / 100.0) * (1 - 1e-12)
    basis = g.r[window] ** (2.0 - n)
    target = product[window] - 1.0
    coeff = float(np.dot(basis, target) / np.dot(basis, basis))
    residual = float(np.max(np.abs(coeff * basis - target)))
    tolerance = float(get_setting("HARMONIC_FIT_TOLERANCE"))
    if residual > tolerance:
        raise FitFailure(f"Flattened harmonic fit residual {residual:.3e} above {tolerance:.1e}",
                         {"residual": residual, "coefficient": coeff})
    if snap and abs(coeff) <= tolerance:
        logger.debug(f"Flattened monopole {coeff:.3e} is within the fit tolerance; end is flat")
        coeff = 0.0
    return ExteriorHarmonic(n=n, R=float(start), monopole_coeff=coeff)


def _rebuild_flattened(g: RadialMetric, product: np.ndarray,
                       U_tilde: ExteriorHarmonic) -> Tuple[RadialMetric, np.ndarray]:
    """
    g_tilde = (1 + c r^(2-n))^(4/(n-2)) delta on g's grid, and w = U_tilde / U.

    For conformally flat g the solved U w is that radial harmonic up to
    discretisation error, which must stay below FLATTENED_FACTOR_TOLERANCE.
    """
    rebuilt = 1.0 + U_tilde.monopole_coeff * g.r ** (2.0 - g.n)
    gap = float(np.max(np.abs(product - rebuilt) / np.abs(rebuilt)))
    tolerance = float(get_setting("FLATTENED_FACTOR_TOLERANCE"))
    if gap > tolerance or np.min(rebuilt) <= 0:
        raise FitFailure(f"Solved U w departs from 1 + c r^(2-n) by {gap:.3e} (tolerance {tolerance:.1e})",
                         {"gap": gap, "coefficient": U_tilde.monopole_coeff})
    g_tilde = RadialMetric.from_conformal_factor(g.n, g.r, rebuilt, p=g.p, R_flat=float(g.r[0]), inner=g.inner)
    return g_tilde, rebuilt / g.harmonic_factor()


def scalar_flatten(g: RadialMetric) -> FlattenResult:
    """
    Conformally flatten a metric with R_g >= 0 to a scalar-flat one.

    A metric that is already a radial harmonic comes back unchanged (w = 1).
    Otherwise w solves L_g w = 0 with the Richardson-extrapolated solver. When
    g is conformally flat, U w is harmonic on the whole grid, so g_tilde is
    rebuilt from the fitted 1 + c r^(2-n) and is exactly scalar-flat.

    Raises:
        PreconditionViolation: R_g below minus the curvature noise floor
        SolverFailure: v < 1 somewhere
        FitFailure: the flattened end is not a monopole to HARMONIC_FIT_TOLERANCE,
            or the solved factor misses the rebuilt one by FLATTENED_FACTOR_TOLERANCE
    """
    U = g.harmonic_factor()
    if g.harmonic_coefficients() is not None:
        logger.debug("Metric is a radial harmonic; flattening leaves it unchanged")
        w = np.ones_like(g.r)
        return FlattenResult(g=g, g_tilde=g, w=w, v=w.copy(), U_tilde=_fit_flattened_end(g, U))
    curvature = g.scalar_curvature_profile
    tolerance = g.curvature_tolerance()
    interior = np.arange(STENCIL_HALF_WIDTH, g.r.size - STENCIL_HALF_WIDTH)
    if np.min(curvature[interior]) < -tolerance:
        index = int(interior[np.argmin(curvature[interior])])
        raise PreconditionViolation(
            f"scalar curvature {curvature[index]:.3e} < 0 at r = {g.r[index]:.4g} (floor {tolerance:.1e})"
        )
    if np.max(np.abs(curvature[interior])) <= tolerance:
        w = np.ones_like(g.r)
    else:
        potential = conformal_coefficient(g.n) * np.clip(curvature, 0.0, None)
        w = solve_extrapolated(ConformalBVP(metric=g, potential=potential)).u
    conformally_flat = bool(np.all(np.abs(g.A - g.B) <= 1e-12 * g.B))
    U_tilde = _fit_flattened_end(g, U * w, snap=conformally_flat)
    if conformally_flat:
        g_tilde, w = _rebuild_flattened(g, U * w, U_tilde)
    else:
        g_tilde = g.conformal_rescale(w)
    v = 1.0 / w
    if np.min(v) < 1.0 - 1e-12:
        raise SolverFailure(f"v drops below 1 (min {np.min(v):.3e})", {"v_min": float(np.min(v))})
    logger.info(f"Flattened metric: v_min = {np.min(v):.6f}, U_tilde monopole {U_tilde.monopole_coeff:.6e}")
    return FlattenResult(g=g, g_tilde=g_tilde, w=w, v=v, U_tilde=U_tilde)


def comparison_bound_constant(a: float, n: int, R: float = 1.0) -> float:
    """
    C with sup_{|x|>a} (U - U_tilde) <= C (m - m_tilde).

    With rho = (a + R)/2, the Poisson representation on S_rho and the
    spherical average of U - U_tilde give C = omega rho sup K / 2
    = (a + rho) / (2 (a - rho)^(n-1)).
    """
    if a <= R:
        raise ValueError(f"a must exceed R = {R}, got {a}")
    rho = 0.5 * (a + R)
    return (a + rho) / (2.0 * (a - rho) ** (n - 1))
