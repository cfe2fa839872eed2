"""
Quadrature on coordinate spheres S_r in R^n.
"""
import numpy as np
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Tuple

from scipy.spatial.transform import Rotation
from scipy.special import gamma, roots_jacobi

from .errors import AdmissionError


def unit_sphere_area(n: int) -> float:
    """Area of the unit (n-1)-sphere in R^n."""
    return float(2.0 * np.pi ** (n / 2.0) / gamma(n / 2.0))


@dataclass(frozen=True)
class SphereSample:
    """
    Quadrature nodes on the sphere of a given radius.

    ``weights`` integrate over the *unit* sphere and sum to the unit sphere
    area; ``area_weights`` include the r^(n-1) area factor.
    """
    radius: float
    directions: np.ndarray
    weights: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.directions.shape[1]

    @property
    def points(self) -> np.ndarray:
        return self.radius * self.directions

    @property
    def area_weights(self) -> np.ndarray:
        return self.weights * self.radius ** (self.n - 1)

    def integrate(self, values: np.ndarray) -> float:
        """Integrate sampled values against the area element of S_r."""
        return float(np.dot(self.area_weights, values))

    def average(self, values: np.ndarray) -> float:
        """Spherical average of sampled values."""
        return float(np.dot(self.weights, values) / np.sum(self.weights))

    def apply(self, func: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Evaluate a vectorized function of points (m, n) on the nodes."""
        return np.asarray(func(self.points), dtype=float)


@lru_cache(maxsize=32)
def _unit_product_rule(n: int, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Product Gauss-Jacobi (polar angles) x trapezoid (azimuth) rule.

    Polar angle k (k = 1..n-2) carries the weight sin^(n-1-k); in t = cos(theta)
    this is the Jacobi weight (1-t^2)^((n-2-k)/2), so each factor is Gaussian.
    """
    factors = []
    for k in range(1, n - 1):
        exponent = (n - 2 - k) / 2.0
        t, w = roots_jacobi(order, exponent, exponent)
        factors.append((t, w))
    m_phi = 2 * order
    phi = 2.0 * np.pi * np.arange(m_phi) / m_phi
    w_phi = np.full(m_phi, 2.0 * np.pi / m_phi)

    grids = np.meshgrid(*[t for t, _ in factors], phi, indexing="ij")
    wgrids = np.meshgrid(*[w for _, w in factors], w_phi, indexing="ij")
    weights = np.prod(np.stack([g.ravel() for g in wgrids]), axis=0)

    cosines = [g.ravel() for g in grids[:-1]]
    azimuth = grids[-1].ravel()
    directions = np.empty((azimuth.size, n))
    running = np.ones_like(azimuth)
    for k, t in enumerate(cosines):
        directions[:, k] = running * t
        running = running * np.sqrt(np.clip(1.0 - t ** 2, 0.0, None))
    directions[:, n - 2] = running * np.cos(azimuth)
    directions[:, n - 1] = running * np.sin(azimuth)
    return directions, weights


def sphere_sample(n: int, radius: float = 1.0, order: int = 24) -> SphereSample:
    """
    Build a product-rule SphereSample.

    Args:
        n: Ambient dimension (>= 3)
        radius: Sphere radius
        order: Gauss nodes per polar angle (azimuth uses twice as many)

    Returns:
        SphereSample exact for spherical polynomials of degree < 2*order
    """
    if n < 3:
        raise AdmissionError("dimension", f"n must be at least 3, got {n}")
    if order < 2:
        raise AdmissionError("quadrature", f"order must be at least 2, got {order}")
    directions, weights = _unit_product_rule(n, order)
    return SphereSample(radius=float(radius), directions=directions, weights=weights)


def fibonacci_directions(count: int) -> np.ndarray:
    """Quasi-uniform unit vectors on S^2 from the Fibonacci lattice."""
    indices = np.arange(0, count, dtype=float) + 0.5
    polar = np.arccos(1.0 - 2.0 * indices / count)
    azimuth = 2.0 * np.pi * indices / ((1.0 + 5.0 ** 0.5) / 2.0)
    return np.column_stack((
        np.cos(azimuth) * np.sin(polar),
        np.sin(azimuth) * np.sin(polar),
        np.cos(polar),
    ))


def dense_directions(n: int, count: int, seed: int = 0) -> np.ndarray:
    """
    Dense direction set: Fibonacci lattice for n = 3 (turned by a seeded
    random rotation when seed is non-zero), normalised Gaussian samples from a
    seeded generator otherwise.
    """
    if n == 3:
        lattice = fibonacci_directions(count)
        return lattice if seed == 0 else Rotation.random(random_state=seed).apply(lattice)
    rng = np.random.default_rng(seed)
    samples = rng.standard_normal((count, n))
    return samples / np.linalg.norm(samples, axis=1, keepdims=True)
