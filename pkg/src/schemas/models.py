"""
Pydantic models for records, scenarios and sweep rows.
"""
import hashlib
import json
from pydantic import BaseModel, Field, model_validator
from typing import Dict, Optional, List
from enum import Enum


class HigherTerm(BaseModel):
    """One decaying solid harmonic of an exterior harmonic function."""
    l: int = Field(..., ge=1, le=4, description="Degree of the harmonic")
    idx: int = Field(..., ge=0, description="Order index within the degree")
    c: float = Field(..., description="Coefficient")


class PointSource(BaseModel):
    """A positive point source inside the inner ball."""
    p: List[float] = Field(..., description="Location (strictly inside B_R)")
    strength: float = Field(..., ge=0.0, description="Strength multiplying |x-p|^(2-n)")


class HarmonicRecord(BaseModel):
    """Structured record of an ExteriorHarmonic."""
    n: int = Field(..., ge=3, description="Dimension")
    R: float = Field(..., gt=0.0, description="Inner radius")
    monopole: float = Field(default=0.0, description="Coefficient of |x|^(2-n)")
    higher: List[HigherTerm] = Field(default=[], description="Decaying solid harmonics")
    sources: List[PointSource] = Field(default=[], description="Point sources")


class RadialMetricHeader(BaseModel):
    """Header of a columnar (r, A, B) metric table."""
    n: int = Field(..., ge=3, description="Dimension")
    R_flat: Optional[float] = Field(default=None, description="Radius beyond which the end is harmonically flat")
    p: float = Field(..., description="Decay exponent of g - delta")
    inner: str = Field(default="regular", description="Inner boundary model: regular or second_end")


class MassReportRecord(BaseModel):
    """Structured record of a MassReport."""
    radii: List[float] = Field(..., description="Evaluation radii (increasing)")
    flux_values: List[float] = Field(..., description="Flux integral at each radius")
    extrapolated_mass: float = Field(..., description="Limit of the flux integral")
    expansion_mass: Optional[float] = Field(default=None, description="Mass read from the monopole coefficient")
    discrepancy: Optional[float] = Field(default=None, description="|extrapolated - expansion|")
    convergence_order: float = Field(..., description="Fitted decay exponent of the flux")
    fit_method: str = Field(..., description="Extrapolation scheme that produced the limit")
    fit_residual: float = Field(..., description="Maximum residual of the fit")


class FlowSummaryRecord(BaseModel):
    """Summary of a mass-flow experiment."""
    a: float = Field(..., description="Cutoff scale")
    m0: float = Field(..., description="m(0)")
    mdot0_formula: float = Field(..., description="First variation from the Ricci integral")
    mdot0_lower_bound: float = Field(..., description="Annulus lower bound of the Ricci integral")
    mdot0_fd: Optional[float] = Field(default=None, description="Finite-difference derivative of the outer-end mass")
    mdot0_fd_total: Optional[float] = Field(default=None, description="Finite-difference derivative summed over ends")
    mddot_max: Optional[float] = Field(default=None, description="Maximum |m''| over the s-grid")
    admissible_range: List[float] = Field(..., description="Symmetric s-interval where all solves succeeded")
    verdict: Optional[str] = Field(default=None, description="delta-gamma verdict")


class FlattenRecord(BaseModel):
    """Summary of a scalar-flattening."""
    mass_g: float = Field(..., description="ADM mass of g")
    mass_g_tilde: float = Field(..., description="ADM mass of the flattened metric")
    v_min: float = Field(..., description="Minimum of v = 1/w")
    U_tilde: HarmonicRecord = Field(..., description="Fitted harmonic factor of the flattened end")


class FamilyKind(str, Enum):
    """Available metric families."""
    SCHWARZSCHILD = "schwarzschild"
    BUMP = "bump"
    COMPOSITE = "composite"


class FamilySpec(BaseModel):
    """Parameters of a metric family."""
    kind: FamilyKind = Field(..., description="Family type")
    masses: List[float] = Field(default=[], description="Schwarzschild masses (schwarzschild family)")
    amplitudes: List[float] = Field(default=[], description="Shell charges Q for bump/composite members (mass contribution 2Q)")
    shell_inner: float = Field(default=0.3, gt=0.0, description="Inner radius of the scalar-curvature shell")
    shell_outer: float = Field(default=0.8, gt=0.0, description="Outer radius of the scalar-curvature shell")
    core_mass: float = Field(default=0.1, ge=0.0, description="Schwarzschild core mass for composite members")

    @model_validator(mode="after")
    def _check_shell(self):
        if self.shell_outer <= self.shell_inner:
            raise ValueError("shell_outer must exceed shell_inner")
        if any(m < 0 for m in self.masses) or any(q < 0 for q in self.amplitudes):
            raise ValueError("masses and amplitudes must be non-negative")
        return self


class GridSpec(BaseModel):
    """Solver grid parameters."""
    points_per_decade: int = Field(default=256, ge=16, le=2048, description="Metric grid density")
    outer_decades: float = Field(default=4.0, ge=2.0, le=8.0, description="Decades beyond the chart radius")


class SweepSpec(BaseModel):
    """Sweep targets."""
    epsilons: List[float] = Field(default=[0.1, 0.03, 0.01, 0.003], description="epsilon values for delta(epsilon)")
    run_flow: bool = Field(default=True, description="Run the mass flow per member")
    s_grid_points: int = Field(default=9, ge=5, le=41, description="Points of the symmetric s-grid")


class Scenario(BaseModel):
    """A reproducible experiment definition."""
    name: str = Field(..., min_length=1, description="Scenario name")
    n: int = Field(default=3, ge=3, le=7, description="Dimension")
    family: FamilySpec = Field(..., description="Metric family")
    a: float = Field(default=5.0, gt=3.0, description="Cutoff scale")
    grid: GridSpec = Field(default_factory=GridSpec, description="Grid parameters")
    sweep: SweepSpec = Field(default_factory=SweepSpec, description="Sweep targets")
    seed: int = Field(default=0, ge=0, description="Seed for any sampled directions")
    output_dir: Optional[str] = Field(default=None, description="Output directory")

    def scenario_hash(self) -> str:
        """sha256 of the canonical JSON form (output_dir excluded)."""
        payload = self.model_dump(mode="json", exclude={"output_dir"})
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


class SweepRow(BaseModel):
    """One family member of a sweep."""
    member: str = Field(..., description="Member label")
    mass: Optional[float] = Field(default=None, description="m(0)")
    a: float = Field(..., description="Cutoff scale")
    sup_deviation: Optional[float] = Field(default=None, description="sup_{|x|>a}|U-1|")
    mass_flattened: Optional[float] = Field(default=None, description="m of the scalar-flattened metric")
    sup_flattened_gap: Optional[float] = Field(default=None, description="sup_{|x|>a}(U - U_tilde), sampled")
    mdot0: Optional[float] = Field(default=None, description="First variation (Ricci integral)")
    mdot0_fd: Optional[float] = Field(default=None, description="First variation (finite differences, outer end)")
    mdot0_fd_total: Optional[float] = Field(default=None, description="First variation (finite differences, all ends)")
    oscillation_ratio: Optional[float] = Field(default=None, description="LHS / RHS of the oscillation bound")
    flow_verdict: Optional[str] = Field(default=None, description="delta-gamma verdict")
    status: str = Field(default="ok", description="ok or the failure reason")
    scenario_hash: str = Field(..., description="Scenario hash")
    version: str = Field(..., description="Package version")


class DeltaThreshold(BaseModel):
    """Empirical delta(epsilon) read off a sweep."""
    epsilon: float = Field(..., gt=0.0, description="Target sup|U-1|")
    delta: Optional[float] = Field(default=None, description="Largest tabulated mass meeting epsilon, if any")


class SweepSummaryRecord(BaseModel):
    """Summary record written next to the sweep table."""
    name: str = Field(..., description="Scenario name")
    scenario_hash: str = Field(..., description="Scenario hash")
    version: str = Field(..., description="Package version")
    n: int = Field(..., description="Dimension")
    a: float = Field(..., description="Cutoff scale")
    family: FamilyKind = Field(..., description="Family type")
    members: int = Field(..., ge=0, description="Number of family members")
    failures: int = Field(..., ge=0, description="Members whose pipeline failed")
    fitted_power: Optional[float] = Field(default=None, description="Log-log slope of sup|U-1| against mass")
    thresholds: List[DeltaThreshold] = Field(default=[], description="delta(epsilon) per epsilon")
    monotone: Dict[str, bool] = Field(default={}, description="Monotonicity flag per column")
