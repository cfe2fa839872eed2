"""
Weighted Schauder norms, the exterior barrier and injectivity estimates.

    |v|_{k+alpha,sigma,rho} = sum_{j<=k} sup_{r>rho} r^(j-sigma) |v^(j)|
                              + [r^(k+alpha-sigma) v^(k)]_alpha
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import AdmissionError, DomainError, MarginError
from .harmonic import ExteriorHarmonic
from .metric import RadialMetric, conformal_coefficient, metric_laplacian_fd
from .quadrature import dense_directions
from .solver import ConformalBVP, solve_radial_bvp
from .grid import STENCIL_HALF_WIDTH, log_step, radial_derivatives

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WeightedNormSpec:
    """Parameters of |.|_{k+alpha,sigma,rho}; ``holder`` False gives the plain C^k norm."""
    sigma: float
    alpha: float = 0.5
    k: int = 0
    rho: float = 2.0
    n: int = 3
    holder: bool = True

    def __post_init__(self):
        if not (2 - self.n < self.sigma < 0):
            raise AdmissionError("sigma", f"sigma must lie in (2-n, 0) = ({2 - self.n}, 0), got {self.sigma}")
        if not (0 < self.alpha < 1):
            raise AdmissionError("alpha", f"alpha must lie in (0, 1), got {self.alpha}")
        if self.k not in (0, 1, 2):
            raise AdmissionError("order", f"k must be 0, 1 or 2, got {self.k}")
        if self.rho <= 1:
            raise AdmissionError("rho", f"rho must exceed 1, got {self.rho}")

    def variant(self, weight_shift: float = 0.0, k: Optional[int] = None,
                holder: Optional[bool] = None) -> "NormParams":
        """Same norm family with sigma moved by ``weight_shift`` (e.g. -2 for sources)."""
        return NormParams(sigma=self.sigma + weight_shift, alpha=self.alpha,
                          k=self.k if k is None else k, rho=self.rho,
                          holder=self.holder if holder is None else holder)

    @property
    def params(self) -> "NormParams":
        return self.variant()


@dataclass(frozen=True)
class NormParams:
    """Unvalidated norm parameters (sigma may sit outside (2-n, 0), as for sigma - 2)."""
    sigma: float
    alpha: float
    k: int
    rho: float
    holder: bool


@dataclass(frozen=True)
class RadialFunction:
    """Samples of a radial function on a log grid, with optional exact derivatives."""
    r: np.ndarray
    values: np.ndarray = field(repr=False)
    derivatives: Tuple[np.ndarray, ...] = field(default=(), repr=False)

    def __post_init__(self):
        log_step(self.r)

    def derivative(self, order: int) -> np.ndarray:
        if order == 0:
            return np.asarray(self.values, dtype=float)
        if order <= len(self.derivatives):
            return np.asarray(self.derivatives[order - 1], dtype=float)
        if order > 2:
            raise MarginError(f"derivatives above order 2 are not sampled (asked {order})")
        return radial_derivatives(self.r, self.values)[order - 1]

    def scaled(self, factor: float) -> "RadialFunction":
        return RadialFunction(self.r, factor * self.values, tuple(factor * d for d in self.derivatives))


def _holder_estimate(r: np.ndarray, values: np.ndarray, exponent: float, alpha: float) -> float:
    """
    max r_i^exponent |w_j - w_i| / (r_j - r_i)^alpha over node pairs with
    0 < r_j - r_i <= r_i / 2 (a lower-bound estimator of the seminorm).
    """
    best = 0.0
    offset = 1
    while offset < r.size:
        ri, rj = r[:-offset], r[offset:]
        valid = rj - ri <= 0.5 * ri
        if not np.any(valid):
            break
        quotient = (ri[valid] ** exponent * np.abs(values[offset:][valid] - values[:-offset][valid])
                    / (rj[valid] - ri[valid]) ** alpha)
        best = max(best, float(np.max(quotient)))
        offset += 1
    return best


def weighted_norm_terms(v: RadialFunction, spec: Union[WeightedNormSpec, NormParams]) -> Dict[str, float]:
    """Individual sup terms ``sup_j`` and the Hölder estimate ``holder``."""
    spec = spec.params if isinstance(spec, WeightedNormSpec) else spec
    if v.r[0] > spec.rho * (1 + 1e-12):
        raise MarginError(f"samples start at r = {v.r[0]:g}, beyond rho = {spec.rho:g}")
    mask = v.r >= spec.rho * (1 - 1e-12)
    needs_stencil = spec.k > len(v.derivatives)
    if needs_stencil and np.count_nonzero(mask) < 2 * STENCIL_HALF_WIDTH + 2:
        raise MarginError(f"too few samples beyond rho = {spec.rho:g} for order {spec.k}")
    r = v.r[mask]
    terms: Dict[str, float] = {}
    for j in range(spec.k + 1):
        values = v.derivative(j)[mask]
        terms[f"sup_{j}"] = float(np.max(r ** (j - spec.sigma) * np.abs(values)))
    if spec.holder:
        terms["holder"] = _holder_estimate(r, v.derivative(spec.k)[mask],
                                           spec.k + spec.alpha - spec.sigma, spec.alpha)
    return terms


def weighted_norm(v: RadialFunction, spec: Union[WeightedNormSpec, NormParams]) -> float:
    """|v|_{k+alpha,sigma,rho} (or the C^k part alone when ``spec.holder`` is False)."""
    return float(sum(weighted_norm_terms(v, spec).values()))


# ---------------------------------------------------------------------------
# Barrier
# ---------------------------------------------------------------------------

def _barrier_points(U: ExteriorHarmonic, x) -> Tuple[np.ndarray, np.ndarray, bool]:
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    radius = np.linalg.norm(pts, axis=1)
    if np.any(radius < 2.0 * U.R * (1 - 1e-12)):
        raise DomainError(f"barrier is defined on |x| >= 2R, got |x| = {radius.min():.4g}")
    return pts, radius, single


def barrier_f_infinity(U: ExteriorHarmonic, sigma: float, x):
    """f_inf(x) = -|x|^sigma / U(x) on |x| >= 2R."""
    pts, radius, single = _barrier_points(U, x)
    values = -radius ** sigma / U.eval(pts)
    return float(values[0]) if single else values


def barrier_laplacian_closed_form(U: ExteriorHarmonic, sigma: float, x):
    """Delta_g f_inf = -sigma (n-2+sigma) |x|^(sigma-2) U^(-(n+2)/(n-2))."""
    pts, radius, single = _barrier_points(U, x)
    n = U.n
    values = -sigma * (n - 2.0 + sigma) * radius ** (sigma - 2.0) * U.eval(pts) ** (-(n + 2.0) / (n - 2.0))
    return float(values[0]) if single else values


def barrier_sample_points(n: int, count: int, r_min: float, r_max: float, seed: int = 0) -> np.ndarray:
    """Points with log-uniform radii in [r_min, r_max] along dense directions."""
    rng = np.random.default_rng(seed)
    radii = np.exp(rng.uniform(np.log(r_min), np.log(r_max), count))
    return radii[:, None] * dense_directions(n, count, seed)


@dataclass
class BarrierReport:
    closed_form: np.ndarray = field(repr=False)
    finite_difference: np.ndarray = field(repr=False)
    max_relative_gap: float
    min_value: float
    positive: bool
    C2: float


def barrier_subharmonicity_check(U: ExteriorHarmonic, sigma: float, sample_points) -> BarrierReport:
    """
    Compare the closed form of Delta_g f_inf with a divergence-form
    finite-difference evaluation and measure C2 in Delta_g f_inf > |x|^(sigma-2)/C2.
    """
    pts, radius, _ = _barrier_points(U, sample_points)
    closed = np.atleast_1d(barrier_laplacian_closed_form(U, sigma, pts))
    barrier = lambda points: np.atleast_1d(barrier_f_infinity(U, sigma, points))
    fd = np.array([metric_laplacian_fd(U, barrier, p) for p in pts])
    gap = np.abs(fd - closed) / np.abs(closed)
    positive = bool(np.all(closed > 0))
    c2 = float(np.max(radius ** (sigma - 2.0) / closed)) if positive else float("inf")
    logger.debug(f"Barrier check: max relative gap {gap.max():.2e}, C2 = {c2:.4g}")
    return BarrierReport(closed_form=closed, finite_difference=fd, max_relative_gap=float(gap.max()),
                         min_value=float(closed.min()), positive=positive, C2=c2)


# ---------------------------------------------------------------------------
# Injectivity estimates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """A decaying v together with Delta_g v and, optionally, L_g v."""
    __test__ = False

    label: str
    v: RadialFunction
    laplacian: RadialFunction
    conformal: Optional[RadialFunction] = None


def power_test_function(n: int, sigma: float, r: np.ndarray) -> TestFunction:
    """v = r^sigma on flat space, with exact derivatives and Delta v = sigma(sigma+n-2) r^(sigma-2)."""
    r = np.asarray(r, dtype=float)
    v = RadialFunction(r, r ** sigma, (sigma * r ** (sigma - 1), sigma * (sigma - 1) * r ** (sigma - 2)))
    c = sigma * (sigma + n - 2.0)
    lap = RadialFunction(r, c * r ** (sigma - 2), (c * (sigma - 2) * r ** (sigma - 3),))
    return TestFunction(label=f"power_{sigma:g}", v=v, laplacian=lap, conformal=lap)


def _forcing_window(r: np.ndarray, lo: float, hi: float) -> np.ndarray:
    t = np.clip((np.log(r) - np.log(lo)) / (np.log(hi) - np.log(lo)), 0.0, 1.0)
    return (16.0 * t ** 2 * (1.0 - t) ** 2) ** 3


def forced_test_family(g: RadialMetric, a: float, count: int = 4, seed: int = 0) -> List[TestFunction]:
    """
    Solutions of Delta_g v = f, v -> 0, for smooth compactly supported
    forcings f placed between a/4 and 2a with seeded amplitudes and widths.
    """
    rng = np.random.default_rng(seed)
    family: List[TestFunction] = []
    zeros = np.zeros_like(g.r)
    curvature_term = conformal_coefficient(g.n) * g.scalar_curvature_profile
    for index in range(count):
        lo = a / 4.0 * (1.0 + rng.uniform(0.0, 1.0))
        hi = lo * (1.5 + 2.0 * rng.uniform(0.0, 1.0))
        amplitude = rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 2.0) * a ** -2
        forcing = amplitude * _forcing_window(g.r, lo, hi)
        solution = solve_radial_bvp(ConformalBVP(metric=g, potential=zeros, forcing=forcing,
                                                 far_value=0.0))
        v = RadialFunction(g.r, solution.u)
        family.append(TestFunction(
            label=f"forced_{index}", v=v, laplacian=RadialFunction(g.r, forcing),
            conformal=RadialFunction(g.r, forcing - curvature_term * solution.u),
        ))
    return family


@dataclass
class InjectivityReport:
    """Empirical constants of |v| <= C |Delta v| (C^0) and |v|_{2+alpha} <= C |L v|_alpha."""
    c0_ratio: float
    schauder_ratio: Optional[float]
    per_member: List[Dict[str, float]]
    excluded: List[str]


def injectivity_ratio(test_family: Sequence[TestFunction], spec: WeightedNormSpec) -> InjectivityReport:
    """
    max over the family of |v|_{0,sigma,rho} / |Delta_g v|_{0,sigma-2,rho} and
    |v|_{2+alpha,sigma,rho} / |L_g v|_{alpha,sigma-2,rho}.
    """
    plain = spec.variant(k=0, holder=False)
    plain_source = spec.variant(-2.0, k=0, holder=False)
    schauder = spec.variant(k=2, holder=True)
    schauder_source = spec.variant(-2.0, k=0, holder=True)
    rows: List[Dict[str, float]] = []
    excluded: List[str] = []
    for member in test_family:
        denominator = weighted_norm(member.laplacian, plain_source)
        if denominator == 0.0:
            excluded.append(f"{member.label}: Delta_g v vanishes beyond rho")
            continue
        row = {"c0": weighted_norm(member.v, plain) / denominator}
        if member.conformal is not None:
            source = weighted_norm(member.conformal, schauder_source)
            if source > 0.0:
                row["schauder"] = weighted_norm(member.v, schauder) / source
        rows.append(row)
    for note in excluded:
        logger.info(f"Excluded from injectivity family: {note}")
    c0 = max((row["c0"] for row in rows), default=float("nan"))
    schauder_values = [row["schauder"] for row in rows if "schauder" in row]
    return InjectivityReport(c0_ratio=c0, schauder_ratio=max(schauder_values) if schauder_values else None,
                             per_member=rows, excluded=excluded)
