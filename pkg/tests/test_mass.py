"""
Tests for ADM mass computation.
"""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.geometry.errors import FitFailure, MarginError
from src.geometry.grid import log_grid
from src.geometry.harmonic import ExteriorHarmonic
from src.geometry.mass import (
    MassReport,
    adm_flux,
    adm_mass,
    default_radii,
    extrapolate_limit,
    mass_difference_flux,
    monopole_shift,
    rescale_metric,
)
from src.geometry.metric import ConformallyFlatMetric, RadialMetric
from src.geometry.solver import ConformalBVP, solve_radial_bvp


@pytest.mark.parametrize("m", [0.01, 0.1, 1.0])
def test_conformal_mass_matches_expansion(m):
    """Test flux extrapolation against 2 x monopole coefficient."""
    report = adm_mass(ConformallyFlatMetric(ExteriorHarmonic.monopole(3, m)))
    assert report.expansion_mass == m
    assert report.discrepancy <= 1e-6


def test_four_dimensional_mass():
    """Test U = 1 + 0.3 |x|^-2 in n = 4 has mass 0.6."""
    report = adm_mass(ConformallyFlatMetric(ExteriorHarmonic.monopole(4, 0.6)))
    assert_allclose(report.extrapolated_mass, 0.6, atol=1e-6)


def test_flux_at_finite_radius():
    """Test the monopole flux m U(rho)^3 at a finite sphere."""
    g = ConformallyFlatMetric(ExteriorHarmonic.monopole(3, 1.0))
    assert_allclose(adm_flux(g, 4.0), 1.125 ** 3, rtol=1e-10)


def test_radial_schwarzschild_mass(schwarzschild_metric):
    """Test the radial flux route on an isotropic slice."""
    report = adm_mass(schwarzschild_metric)
    assert_allclose(report.extrapolated_mass, 1.0, rtol=1e-5)
    assert_allclose(report.expansion_mass, 1.0, rtol=1e-8)


def test_areal_schwarzschild_mass():
    """Test the mass in areal coordinates where A differs from B."""
    g = RadialMetric.schwarzschild_areal(3, 0.5, r_min=4.0, r_max=1e5, points_per_decade=128)
    report = adm_mass(g)
    assert_allclose(report.extrapolated_mass, 0.5, rtol=1e-5)
    assert report.expansion_mass is None


def test_mass_scales_under_rescaling():
    """Test m(lambda^2 phi^* g) = lambda^(n-2) m(g)."""
    g = ConformallyFlatMetric(ExteriorHarmonic.monopole(3, 0.3).with_terms([(1, 1, 0.02)]))
    scaled = rescale_metric(g, 2.0)
    assert_allclose(adm_mass(scaled).extrapolated_mass, 0.6, rtol=1e-6)
    radial = rescale_metric(RadialMetric.schwarzschild_isotropic(3, 0.4, points_per_decade=128), 3.0)
    assert_allclose(adm_mass(radial).extrapolated_mass, 1.2, rtol=1e-5)
    with pytest.raises(ValueError):
        rescale_metric(g, 0.0)


def test_extrapolate_power_law():
    """Test the limit of 2 + 3 rho^-1."""
    radii = default_radii(1000.0)
    values = 2.0 + 3.0 / radii
    limit, beta, residual, method = extrapolate_limit(radii, values)
    assert_allclose(limit, 2.0, rtol=1e-8)
    assert method in ("power_fit", "richardson")
    assert_allclose(beta, 1.0, rtol=1e-4)


def test_extrapolate_constant():
    """Test that constant samples short-circuit the fit."""
    limit, beta, residual, method = extrapolate_limit([1.0, 2.0, 4.0], [0.7, 0.7, 0.7])
    assert limit == pytest.approx(0.7)
    assert method == "constant"
    assert np.isnan(beta)


def test_extrapolate_noise_fails():
    """Test FitFailure on data no decay model can follow."""
    radii = np.arange(1.0, 9.0)
    values = np.array([0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0])
    with pytest.raises(FitFailure) as info:
        extrapolate_limit(radii, values)
    assert "residual" in info.value.diagnostics


def test_default_radii():
    """Test rho_k = rho_max 2^(-k/2) in increasing order."""
    radii = default_radii(64.0, 4)
    assert_allclose(radii, [64.0 / 2 ** 1.5, 32.0, 64.0 / 2 ** 0.5, 64.0])


def test_monopole_shift():
    """Test 2 U (u - 1) r^(n-2)."""
    assert_allclose(monopole_shift(3, 10.0, 1.01), 0.2)
    assert_allclose(monopole_shift(4, 2.0, 0.99, U_edge=2.0), -0.16)


def test_mass_difference_flux():
    """Test m(U u) - m(U) = 2k for u = 1 + k/r."""
    r = log_grid(1.0, 1e4, 128)
    k = 0.05
    difference = mass_difference_flux(r, 1.0 + k / r, ExteriorHarmonic.monopole(3, 0.2))
    assert_allclose(difference, 2.0 * k, rtol=1e-6)


def test_mass_difference_routes_agree(schwarzschild_metric):
    """Test the u du/dr flux against the mass of U u for a solver-produced u."""
    g = schwarzschild_metric
    forcing = -0.05 * np.exp(-20.0 * np.log(g.r / 3.0) ** 2)
    u = solve_radial_bvp(ConformalBVP(metric=g, potential=np.zeros_like(g.r), forcing=forcing)).u
    assert np.max(np.abs(u - 1.0)) > 1e-3
    flux = mass_difference_flux(g.r, u, ExteriorHarmonic.monopole(3, 1.0), cross_check=False)
    composed = RadialMetric.from_conformal_factor(3, g.r, g.harmonic_factor() * u, p=1.0)
    background = adm_mass(g).extrapolated_mass
    assert_allclose(flux, adm_mass(composed).extrapolated_mass - background, rtol=1e-5, atol=1e-7)


def test_report_rejects_unsorted_radii():
    """Test MassReport validation."""
    with pytest.raises(ValueError):
        MassReport(radii=[2.0, 1.0], flux_values=[1.0, 1.0], extrapolated_mass=1.0,
                   convergence_order=1.0, fit_method="constant", fit_residual=0.0)


def test_report_record(schwarzschild_metric):
    """Test the record and csv row of a report."""
    report = adm_mass(schwarzschild_metric)
    record = report.to_record()
    assert record.extrapolated_mass == report.extrapolated_mass
    row = report.csv_row()
    assert row["fit_method"] == report.fit_method
    assert float(row["rho_0"]) == report.radii[0]


def test_radii_outside_grid(schwarzschild_metric):
    """Test MarginError when radii leave the stencil-safe range."""
    with pytest.raises(MarginError):
        adm_mass(schwarzschild_metric, radii=[0.5, 2.0])
