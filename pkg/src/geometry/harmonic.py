"""
Exterior harmonic functions on R^n minus a ball.

U(x) = 1 + c|x|^(2-n) + sum_l sum_k c_lk |x|^(2-n-2l) P_lk(x) + sum_j s_j |x-p_j|^(2-n)

where P_lk are homogeneous harmonic polynomials of degree l (the Kelvin
transform of P_lk is the decaying solid harmonic |x|^(2-n-l) Y_lk).
"""
import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, factorial
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from scipy.optimize import minimize_scalar

from .errors import AdmissionError, DomainError
from .quadrature import SphereSample, dense_directions, sphere_sample, unit_sphere_area
from ..schemas.models import HarmonicRecord, HigherTerm, PointSource
from ..utils.config_utils import get_setting

logger = logging.getLogger(__name__)

MAX_DEGREE = 4
_RADIUS_SLACK = 1e-12


# ---------------------------------------------------------------------------
# Harmonic polynomial basis
# ---------------------------------------------------------------------------

def harmonic_dimension(n: int, l: int) -> int:
    """Dimension of the space of degree-l homogeneous harmonic polynomials in R^n."""
    lower = comb(n + l - 3, l - 2) if l >= 2 else 0
    return comb(n + l - 1, l) - lower


def _harmonic_projection(poly: sp.Expr, symbols: Sequence[sp.Symbol], l: int) -> sp.Expr:
    n = len(symbols)
    r2 = sum(s ** 2 for s in symbols)
    result = sp.Integer(0)
    term = poly
    for k in range(l // 2 + 1):
        denominator = 2 ** k * factorial(k)
        for j in range(1, k + 1):
            denominator *= n + 2 * l - 2 - 2 * j
        result += sp.Rational((-1) ** k, denominator) * r2 ** k * term
        term = sum(sp.diff(term, s, 2) for s in symbols)
    return sp.expand(result)


@lru_cache(maxsize=None)
def harmonic_basis(n: int, l: int) -> Tuple[sp.Expr, ...]:
    """
    Linearly independent homogeneous harmonic polynomials of degree l.

    Built by harmonic projection of monomials in lexicographic order; a
    projection is kept when it raises the rank of the coefficient matrix.
    The position in the returned tuple is the order index.
    """
    if l < 1 or l > MAX_DEGREE:
        raise AdmissionError("degree", f"solid harmonics limited to 1 <= l <= {MAX_DEGREE}, got {l}")
    symbols = sp.symbols(f"x0:{n}", real=True)
    target = harmonic_dimension(n, l)
    basis: List[sp.Expr] = []
    rows: List[Dict[Tuple[int, ...], sp.Rational]] = []
    rank = 0
    for combo in itertools.combinations_with_replacement(range(n), l):
        monomial = sp.Mul(*[symbols[i] for i in combo])
        projected = _harmonic_projection(monomial, symbols, l)
        rows.append(sp.Poly(projected, *symbols).as_dict())
        keys = sorted({key for row in rows for key in row})
        matrix = sp.Matrix([[row.get(key, 0) for key in keys] for row in rows])
        new_rank = matrix.rank()
        if new_rank > rank:
            basis.append(projected)
            rank = new_rank
        else:
            rows.pop()
        if rank == target:
            break
    return tuple(basis)


@dataclass(frozen=True)
class _PolyEvaluator:
    value: Callable
    grad: Tuple[Callable, ...]
    hess: Tuple[Tuple[Callable, ...], ...]


@lru_cache(maxsize=None)
def _evaluator(n: int, l: int, idx: int) -> _PolyEvaluator:
    basis = harmonic_basis(n, l)
    if not 0 <= idx < len(basis):
        raise AdmissionError("order_index", f"degree {l} in n={n} has {len(basis)} harmonics, got index {idx}")
    symbols = sp.symbols(f"x0:{n}", real=True)
    poly = basis[idx]
    grad = [sp.diff(poly, s) for s in symbols]
    hess = [[sp.diff(g, s) for s in symbols] for g in grad]
    lam = lambda expr: sp.lambdify(symbols, expr, "numpy")
    return _PolyEvaluator(
        value=lam(poly),
        grad=tuple(lam(g) for g in grad),
        hess=tuple(tuple(lam(h) for h in row) for row in hess),
    )


def _call(fn: Callable, points: np.ndarray) -> np.ndarray:
    out = fn(*points.T)
    return np.broadcast_to(np.asarray(out, dtype=float), (points.shape[0],))


# ---------------------------------------------------------------------------
# ExteriorHarmonic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExteriorHarmonic:
    """
    Positive harmonic function on |x| >= R tending to 1 at infinity.

    Attributes:
        n: Dimension
        R: Inner radius of the exterior chart
        monopole_coeff: Coefficient c of |x|^(2-n); the mass is 2c
        higher_coeffs: (degree, order index, coefficient) triples
        point_sources: ((location), strength) pairs with |location| < R
    """
    n: int
    R: float = 1.0
    monopole_coeff: float = 0.0
    higher_coeffs: Tuple[Tuple[int, int, float], ...] = ()
    point_sources: Tuple[Tuple[Tuple[float, ...], float], ...] = ()
    check_positivity: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        if self.n < 3:
            raise AdmissionError("dimension", f"n must be at least 3, got {self.n}")
        if self.R <= 0:
            raise AdmissionError("inner_radius", f"R must be positive, got {self.R}")
        object.__setattr__(self, "higher_coeffs", tuple(
            (int(l), int(idx), float(c)) for l, idx, c in self.higher_coeffs
        ))
        object.__setattr__(self, "point_sources", tuple(
            (tuple(float(v) for v in p), float(s)) for p, s in self.point_sources
        ))
        for l, idx, _ in self.higher_coeffs:
            _evaluator(self.n, l, idx)
        for location, strength in self.point_sources:
            if len(location) != self.n:
                raise AdmissionError("point_source", f"source location must have {self.n} components")
            if strength < 0:
                raise AdmissionError("point_source", f"source strength must be >= 0, got {strength}")
            if np.linalg.norm(location) >= self.R:
                raise AdmissionError("point_source", f"source {location} must lie strictly inside B_R")
        if self.check_positivity:
            self._check_positivity()

    # -- constructors -----------------------------------------------------

    @classmethod
    def flat(cls, n: int, R: float = 1.0) -> "ExteriorHarmonic":
        return cls(n=n, R=R)

    @classmethod
    def monopole(cls, n: int, mass: float, R: float = 1.0) -> "ExteriorHarmonic":
        """Schwarzschild conformal factor 1 + (m/2)|x|^(2-n)."""
        return cls(n=n, R=R, monopole_coeff=0.5 * mass)

    def with_terms(self, higher: Sequence[Tuple[int, int, float]] = (),
                   sources: Sequence[Tuple[Sequence[float], float]] = ()) -> "ExteriorHarmonic":
        return ExteriorHarmonic(
            n=self.n, R=self.R, monopole_coeff=self.monopole_coeff,
            higher_coeffs=self.higher_coeffs + tuple(higher),
            point_sources=self.point_sources + tuple((tuple(p), s) for p, s in sources),
        )

    def _check_positivity(self) -> None:
        count = int(get_setting("POSITIVITY_DIRECTIONS"))
        margin = float(get_setting("POSITIVITY_MARGIN"))
        directions = dense_directions(self.n, count)
        for factor in get_setting("POSITIVITY_RADII"):
            values = self.eval(factor * self.R * directions)
            if np.min(values) <= margin:
                raise AdmissionError(
                    "positivity",
                    f"U drops to {np.min(values):.3e} on |x| = {factor * self.R:g}",
                )

    # -- evaluation -------------------------------------------------------

    def _points(self, x) -> Tuple[np.ndarray, bool]:
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if pts.shape[1] != self.n:
            raise DomainError(f"points must have {self.n} components, got {pts.shape[1]}")
        radii = np.linalg.norm(pts, axis=1)
        if np.any(radii < self.R * (1.0 - _RADIUS_SLACK)):
            raise DomainError(f"point inside B_R (|x| = {radii.min():.6g} < R = {self.R:g})")
        return pts, single

    def eval(self, x) -> np.ndarray:
        """U(x); exact for the stored representation."""
        pts, single = self._points(x)
        n = self.n
        r = np.linalg.norm(pts, axis=1)
        value = 1.0 + self.monopole_coeff * r ** (2 - n)
        for l, idx, c in self.higher_coeffs:
            ev = _evaluator(n, l, idx)
            value = value + c * r ** (2 - n - 2 * l) * _call(ev.value, pts)
        for location, strength in self.point_sources:
            d = np.linalg.norm(pts - np.asarray(location), axis=1)
            value = value + strength * d ** (2 - n)
        return float(value[0]) if single else value

    __call__ = eval

    def gradient(self, x) -> np.ndarray:
        """Analytic term-by-term gradient."""
        pts, single = self._points(x)
        n = self.n
        r = np.linalg.norm(pts, axis=1)[:, None]
        grad = self.monopole_coeff * (2 - n) * r ** (-n) * pts
        for l, idx, c in self.higher_coeffs:
            ev = _evaluator(n, l, idx)
            q = 2 - n - 2 * l
            poly = _call(ev.value, pts)[:, None]
            dpoly = np.column_stack([_call(g, pts) for g in ev.grad])
            grad = grad + c * (r ** q * dpoly + q * r ** (q - 2) * poly * pts)
        for location, strength in self.point_sources:
            y = pts - np.asarray(location)
            d = np.linalg.norm(y, axis=1)[:, None]
            grad = grad + strength * (2 - n) * d ** (-n) * y
        return grad[0] if single else grad

    def hessian(self, x) -> np.ndarray:
        """Analytic term-by-term Hessian, shape (m, n, n) or (n, n)."""
        pts, single = self._points(x)
        n = self.n
        eye = np.eye(n)[None, :, :]
        outer = lambda a, b: a[:, :, None] * b[:, None, :]

        def radial_power_hessian(y: np.ndarray, q: float) -> np.ndarray:
            # Hessian of |y|^q
            d = np.linalg.norm(y, axis=1)[:, None, None]
            return q * d ** (q - 2) * eye + q * (q - 2) * d ** (q - 4) * outer(y, y)

        hess = self.monopole_coeff * radial_power_hessian(pts, 2 - n)
        r = np.linalg.norm(pts, axis=1)
        for l, idx, c in self.higher_coeffs:
            ev = _evaluator(n, l, idx)
            q = 2 - n - 2 * l
            poly = _call(ev.value, pts)
            dpoly = np.column_stack([_call(g, pts) for g in ev.grad])
            hpoly = np.stack([np.column_stack([_call(h, pts) for h in row]) for row in ev.hess], axis=1)
            dradial = q * r[:, None] ** (q - 2) * pts
            term = (r[:, None, None] ** q * hpoly
                    + outer(dradial, dpoly) + outer(dpoly, dradial)
                    + poly[:, None, None] * radial_power_hessian(pts, q))
            hess = hess + c * term
        for location, strength in self.point_sources:
            hess = hess + strength * radial_power_hessian(pts - np.asarray(location), 2 - n)
        return hess[0] if single else hess

    def laplacian(self, x) -> np.ndarray:
        """Trace of the analytic Hessian (vanishes up to roundoff)."""
        return np.trace(self.hessian(x), axis1=-2, axis2=-1)

    # -- serialization ----------------------------------------------------

    def to_record(self) -> HarmonicRecord:
        return HarmonicRecord(
            n=self.n, R=self.R, monopole=self.monopole_coeff,
            higher=[HigherTerm(l=l, idx=idx, c=c) for l, idx, c in self.higher_coeffs],
            sources=[PointSource(p=list(p), strength=s) for p, s in self.point_sources],
        )

    @classmethod
    def from_record(cls, record: HarmonicRecord) -> "ExteriorHarmonic":
        return cls(
            n=record.n, R=record.R, monopole_coeff=record.monopole,
            higher_coeffs=tuple((t.l, t.idx, t.c) for t in record.higher),
            point_sources=tuple((tuple(s.p), s.strength) for s in record.sources),
        )


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def mass_from_expansion(U: ExteriorHarmonic) -> float:
    """Twice the total coefficient of |x|^(2-n)."""
    return 2.0 * (U.monopole_coeff + sum(s for _, s in U.point_sources))


def spherical_average_closed_form(U: ExteriorHarmonic, r: float) -> float:
    """1 + (m/2) r^(2-n): higher harmonics average to zero."""
    return 1.0 + 0.5 * mass_from_expansion(U) * r ** (2 - U.n)


def spherical_average(U: ExteriorHarmonic, r: float, order: Optional[int] = None) -> float:
    """
    Average of U over S_r by quadrature.

    Args:
        U: Exterior harmonic function
        r: Sphere radius (r >= R, sources strictly inside B_r)
        order: Gauss order of the sphere rule

    Returns:
        Quadrature value of the spherical average
    """
    if r < U.R * (1.0 - _RADIUS_SLACK):
        raise DomainError(f"r = {r} lies inside B_R (R = {U.R})")
    for location, _ in U.point_sources:
        if np.linalg.norm(location) >= r:
            raise DomainError(f"point source {location} is not strictly inside B_r")
    sample = sphere_sample(U.n, r, order or int(get_setting("SPHERE_ORDER")))
    average = sample.average(U.eval(sample.points))
    expected = spherical_average_closed_form(U, r)
    if abs(average - expected) > 1e-8 * max(1.0, abs(expected)):
        logger.debug(f"Spherical average {average:.12g} differs from closed form {expected:.12g} at r={r}")
    return average


def _tangent_basis(direction: np.ndarray) -> np.ndarray:
    n = direction.size
    q, _ = np.linalg.qr(np.column_stack([direction, np.eye(n)]))
    return q[:, 1:n].T


def sup_deviation(U: ExteriorHarmonic, a: float, order: Optional[int] = None,
                  dense_count: Optional[int] = None, seed: int = 0) -> float:
    """
    sup_{|x| > a} |U(x) - 1|.

    U - 1 is harmonic and vanishes at infinity, so the supremum sits on S_a.
    The sphere is sampled densely (``seed`` picks the dense set) and the best
    direction is polished by bounded one-dimensional maximisation along
    great circles.
    """
    if a < U.R * (1.0 - _RADIUS_SLACK):
        raise DomainError(f"a = {a} lies inside B_R (R = {U.R})")
    sample = sphere_sample(U.n, 1.0, order or int(get_setting("SPHERE_ORDER")))
    count = dense_count or int(get_setting("POSITIVITY_DIRECTIONS"))
    directions = np.vstack([sample.directions, dense_directions(U.n, count, seed)])
    deviation = np.abs(U.eval(a * directions) - 1.0)
    best = int(np.argmax(deviation))
    direction = directions[best]
    value = float(deviation[best])

    def deviation_along(tangent: np.ndarray, t: float) -> float:
        point = np.cos(t) * direction + np.sin(t) * tangent
        return -abs(float(U.eval(a * point / np.linalg.norm(point))) - 1.0)

    width = 4.0 / np.sqrt(directions.shape[0]) * np.pi
    for _ in range(int(get_setting("SUP_POLISH_STEPS"))):
        for tangent in _tangent_basis(direction):
            res = minimize_scalar(lambda t: deviation_along(tangent, t),
                                  bounds=(-width, width), method="bounded",
                                  options={"xatol": 1e-12})
            if -res.fun > value:
                value = float(-res.fun)
                direction = np.cos(res.x) * direction + np.sin(res.x) * tangent
                direction = direction / np.linalg.norm(direction)
        width *= 0.25
    return value


def exterior_poisson_kernel(x: np.ndarray, y: np.ndarray, r: float) -> np.ndarray:
    """
    Poisson kernel of R^n minus B_r with zero condition at infinity.

    K(x, y) = (|x|^2 - r^2) / (omega_{n-1} r |x - y|^n)
    """
    x = np.asarray(x, dtype=float)
    y = np.atleast_2d(np.asarray(y, dtype=float))
    n = y.shape[1]
    distance = np.linalg.norm(y - x, axis=1)
    return (np.dot(x, x) - r ** 2) / (unit_sphere_area(n) * r * distance ** n)


def _pole_aligned(sample: SphereSample, target: np.ndarray) -> np.ndarray:
    """Reflect the rule so its polar axis points at ``target``."""
    n = sample.n
    unit = target / np.linalg.norm(target)
    v = np.zeros(n)
    v[0] = 1.0
    v = v - unit
    if np.linalg.norm(v) < 1e-14:
        return sample.points
    reflection = np.eye(n) - 2.0 * np.outer(v, v) / np.dot(v, v)
    return sample.points @ reflection.T


def poisson_extend(boundary_values: Callable[[np.ndarray], np.ndarray], r: float,
                   x, order: Optional[int] = None) -> float:
    """
    Bounded harmonic extension of boundary data on S_r to the point x (|x| > r).

    Args:
        boundary_values: Vectorized function of points (m, n) on S_r
        r: Sphere radius
        x: Exterior point
        order: Gauss order of the sphere rule

    Returns:
        Integral of K(x, y) * boundary(y) over S_r
    """
    x = np.asarray(x, dtype=float)
    if np.linalg.norm(x) <= r:
        raise DomainError(f"|x| = {np.linalg.norm(x):.6g} must exceed r = {r}")
    sample = sphere_sample(x.size, r, order or 2 * int(get_setting("SPHERE_ORDER")))
    nodes = _pole_aligned(sample, x)
    kernel = exterior_poisson_kernel(x, nodes, r)
    values = np.asarray(boundary_values(nodes), dtype=float)
    return float(np.dot(sample.area_weights, kernel * values))


def harnack_constants(family: Sequence[ExteriorHarmonic], radius_factors: Sequence[float] = (2.0, 3.0, 5.0, 10.0, 30.0, 100.0),
                      order: int = 12) -> Dict[str, float]:
    """
    Empirical uniformity constants over a family normalised to R = 1.

    Returns:
        C1 (1/C1 < U < C1 on |x| >= 2R), C0 (|U-1||x|^(n-2)) and
        C_grad (|grad U||x|^(n-1)) maxima over the sample
    """
    c1, c0, cg = 1.0, 0.0, 0.0
    for U in family:
        for factor in radius_factors:
            sample = sphere_sample(U.n, factor * U.R, order)
            values = U.eval(sample.points)
            grads = np.linalg.norm(U.gradient(sample.points), axis=1)
            c1 = max(c1, float(np.max(values)), float(np.max(1.0 / values)))
            c0 = max(c0, float(np.max(np.abs(values - 1.0))) * sample.radius ** (U.n - 2))
            cg = max(cg, float(np.max(grads)) * sample.radius ** (U.n - 1))
    return {"C1": c1, "C0": c0, "C_grad": cg}
