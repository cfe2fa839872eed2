"""
Log-radial grids and fourth-order finite-difference stencils.
"""
import numpy as np
from typing import Tuple

from .errors import MarginError, AdmissionError

STENCIL_HALF_WIDTH = 2

_CENTRAL_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_CENTRAL_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
# one-sided rows for the first two nodes (offsets start at -node_index)
_EDGE_D1 = (
    np.array([-25.0, 48.0, -36.0, 16.0, -3.0, 0.0]) / 12.0,
    np.array([-3.0, -10.0, 18.0, -6.0, 1.0, 0.0]) / 12.0,
)
_EDGE_D2 = (
    np.array([45.0, -154.0, 214.0, -156.0, 61.0, -10.0]) / 12.0,
    np.array([10.0, -15.0, -4.0, 14.0, -6.0, 1.0]) / 12.0,
)


def log_grid(r_min: float, r_max: float, points_per_decade: int) -> np.ndarray:
    """
    Build a grid uniformly spaced in log r.

    Args:
        r_min: First radius (> 0)
        r_max: Last radius (> r_min)
        points_per_decade: Number of intervals per factor of ten

    Returns:
        Strictly increasing radii, both ends included
    """
    if not (0.0 < r_min < r_max):
        raise AdmissionError("grid", f"need 0 < r_min < r_max, got {r_min}, {r_max}")
    decades = np.log10(r_max / r_min)
    count = max(int(np.ceil(decades * points_per_decade)), 2 * STENCIL_HALF_WIDTH + 2) + 1
    return np.exp(np.linspace(np.log(r_min), np.log(r_max), count))


def log_step(r: np.ndarray) -> float:
    """Return the uniform log spacing of ``r``, rejecting non-uniform grids."""
    x = np.log(np.asarray(r, dtype=float))
    steps = np.diff(x)
    if steps.size == 0 or np.any(steps <= 0):
        raise AdmissionError("grid", "radii must be strictly increasing")
    h = float(np.mean(steps))
    if np.max(np.abs(steps - h)) > 1e-9 * max(h, 1.0):
        raise AdmissionError("grid", "radii must be uniformly spaced in log r")
    return h


def log_derivatives(values: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    First and second derivatives with respect to x = log r.

    Fourth-order central differences in the interior, fourth-order one-sided
    rows on the two outermost nodes at each end.

    Args:
        values: Samples on a uniform log grid
        h: Log spacing

    Returns:
        (df/dx, d2f/dx2)
    """
    f = np.asarray(values, dtype=float)
    size = f.size
    if size < 6:
        raise MarginError(f"need at least 6 samples for fourth-order stencils, got {size}")
    # constants map to exact zeros
    f = f - f[0]
    d1 = np.empty_like(f)
    d2 = np.empty_like(f)
    inner = slice(STENCIL_HALF_WIDTH, size - STENCIL_HALF_WIDTH)
    windows = np.lib.stride_tricks.sliding_window_view(f, 5)
    d1[inner] = windows @ _CENTRAL_D1
    d2[inner] = windows @ _CENTRAL_D2
    head = f[:6]
    tail = f[-6:][::-1]
    for node in range(STENCIL_HALF_WIDTH):
        d1[node] = _EDGE_D1[node] @ head
        d2[node] = _EDGE_D2[node] @ head
        d1[size - 1 - node] = -(_EDGE_D1[node] @ tail)
        d2[size - 1 - node] = _EDGE_D2[node] @ tail
    return d1 / h, d2 / h ** 2


def radial_derivatives(r: np.ndarray, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    First and second r-derivatives of samples on a log grid.

    Args:
        r: Log-uniform radii
        values: Samples f(r)

    Returns:
        (f', f'')
    """
    r = np.asarray(r, dtype=float)
    fx, fxx = log_derivatives(values, log_step(r))
    return fx / r, (fxx - fx) / r ** 2


def require_margin(index: int, size: int, width: int = STENCIL_HALF_WIDTH) -> None:
    """Raise MarginError when a central stencil at ``index`` would leave the grid."""
    if index < width or index > size - 1 - width:
        raise MarginError(
            f"node {index} lies within {width} nodes of the grid edge (size {size})"
        )
