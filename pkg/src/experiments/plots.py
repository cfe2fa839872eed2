"""
Static SVG plots of sweep results.
"""
import logging
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ..schemas.models import SweepRow  # noqa: E402

logger = logging.getLogger(__name__)

_SVG_METADATA = {"Date": None, "Creator": None}


def _save(fig, path: str, salt: str) -> str:
    with matplotlib.rc_context({"svg.hashsalt": salt, "svg.fonttype": "none"}):
        fig.savefig(path, format="svg", metadata=_SVG_METADATA, bbox_inches="tight")
    plt.close(fig)
    logger.debug(f"Wrote plot {path}")
    return path


def plot_deviation_vs_mass(rows: Sequence[SweepRow], path: str, salt: str,
                           fitted_power: Optional[float] = None) -> str:
    """Log-log scatter of sup_{|x|>a}|U-1| against m(0)."""
    points = [(row.mass, row.sup_deviation) for row in rows
              if row.mass and row.sup_deviation and row.mass > 0 and row.sup_deviation > 0]
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    if points:
        masses, deviations = zip(*points)
        ax.loglog(masses, deviations, "o-", color="#1f77b4", label="sup |U - 1|")
        if fitted_power is not None:
            anchor_m, anchor_d = masses[-1], deviations[-1]
            ax.loglog(masses, [anchor_d * (m / anchor_m) ** fitted_power for m in masses], "--",
                      color="#555555", label=f"slope {fitted_power:.3f}")
        ax.legend(loc="lower right", fontsize=8)
    ax.set_xlabel("m(0)")
    ax.set_ylabel("sup_{|x|>a} |U - 1|")
    ax.grid(True, which="both", ls=":", alpha=0.5)
    return _save(fig, path, salt)


def plot_mass_curves(curves: Dict[str, List[tuple]], path: str, salt: str) -> str:
    """m(s) per member (s, mass pairs)."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for label in sorted(curves):
        points = sorted(curves[label])
        if not points:
            continue
        s, m = zip(*points)
        ax.plot(s, m, "o-", ms=3, label=label)
    if curves:
        ax.legend(loc="best", fontsize=7)
    ax.set_xlabel("s")
    ax.set_ylabel("m(s)")
    ax.grid(True, ls=":", alpha=0.5)
    return _save(fig, path, salt)
