"""
Tests for the Ricci deformation and the mass flow.
"""
import csv

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.geometry.deformation import (
    Cutoff,
    admissibility_scale,
    build_flow_run,
    cutoff_derivative,
    cutoff_eval,
    deform,
    delta_gamma_experiment,
    delta_gamma_window,
    mass_at,
    mass_curve,
    mdot0_formula,
    oscillation_bound_check,
    weighted_estimate_echo,
)
from src.geometry.errors import AdmissionError, DomainError, InadmissibleDeformation, PreconditionViolation
from src.geometry.harmonic import ExteriorHarmonic
from src.geometry.metric import RadialMetric
from src.utils.config_utils import get_setting


@pytest.fixture(scope="module")
def unit_mass_run():
    g = RadialMetric.schwarzschild_isotropic(3, 1.0, points_per_decade=int(get_setting("FLOW_POINTS_PER_DECADE")))
    return mass_curve(build_flow_run(g, 4.0))


def test_cutoff_values():
    """Test phi = 0 inside a/3, 1 on [a/2, 3a] and 0 beyond 4a."""
    c = Cutoff(6.0)
    r = np.array([1.0, 2.0, 3.0, 10.0, 18.0, 24.0, 30.0])
    assert_allclose(cutoff_eval(c, r), [0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0], atol=1e-15)
    values = cutoff_eval(c, np.linspace(0.0, 30.0, 301))
    assert np.all((values >= 0.0) & (values <= 1.0))


def test_cutoff_derivatives():
    """Test the analytic derivatives against central differences."""
    c = Cutoff(6.0)
    step = 1e-5
    for r in (2.5, 20.0):
        fd = (cutoff_eval(c, r + step) - cutoff_eval(c, r - step)) / (2 * step)
        assert_allclose(cutoff_derivative(c, r), fd, rtol=1e-7)
        fd2 = (cutoff_derivative(c, r + step) - cutoff_derivative(c, r - step)) / (2 * step)
        assert_allclose(cutoff_derivative(c, r, order=2), fd2, rtol=1e-6)


def test_cutoff_scale_rejected():
    """Test that a <= 3 is rejected."""
    with pytest.raises(AdmissionError) as info:
        Cutoff(3.0)
    assert info.value.invariant == "cutoff_scale"
    with pytest.raises(DomainError):
        cutoff_eval(Cutoff(5.0), -1.0)


def test_deform_identity_and_admissibility(schwarzschild_metric):
    """Test g_0 = g and loss of positivity past s_crit."""
    c = Cutoff(5.0)
    assert deform(schwarzschild_metric, 0.0, c) is schwarzschild_metric
    s_crit = admissibility_scale(schwarzschild_metric, c)
    assert np.isfinite(s_crit) and s_crit > 0
    with pytest.raises(InadmissibleDeformation) as info:
        deform(schwarzschild_metric, 1.5 * s_crit, c)
    assert info.value.s == 1.5 * s_crit
    deformed = deform(schwarzschild_metric, 0.5 * s_crit, c)
    assert deformed.R_flat == 20.0
    assert np.array_equal(deformed.A[schwarzschild_metric.r < 5.0 / 3.0],
                          schwarzschild_metric.A[schwarzschild_metric.r < 5.0 / 3.0])


def test_mass_at(schwarzschild_metric):
    """Test m(0) = m and a failed sample past s_crit."""
    c = Cutoff(5.0)
    sample = mass_at(schwarzschild_metric, c, 0.0, base_mass=1.0)
    assert sample.ok
    assert_allclose(sample.mass, 1.0, atol=1e-4)
    s_crit = admissibility_scale(schwarzschild_metric, c)
    failed = mass_at(schwarzschild_metric, c, 1.5 * s_crit, base_mass=1.0)
    assert not failed.ok
    assert failed.reason


def test_mdot0_formula(schwarzschild_metric, flat_metric):
    """Test the first variation is positive, bounded below by the annulus, and zero when flat."""
    value, lower = mdot0_formula(schwarzschild_metric, Cutoff(5.0))
    assert value > 0.0
    assert 0.0 < lower <= value
    assert mdot0_formula(flat_metric, Cutoff(5.0)) == (0.0, 0.0)


def test_flat_flow_is_constant(flat_metric):
    """Test that the flow of flat space is stationary."""
    run = mass_curve(build_flow_run(flat_metric, 5.0))
    assert run.s_grid == [0.0]
    assert run.mdot0_fd == 0.0
    assert run.m0 == 0.0
    assert run.mddot_max == 0.0


def test_flow_requires_scalar_flat(bump_member):
    """Test PreconditionViolation for a base with R_g != 0."""
    with pytest.raises(PreconditionViolation):
        mass_curve(build_flow_run(bump_member.metric, 5.0))


def test_delta_gamma_requires_curve(schwarzschild_metric):
    """Test that the experiment needs a filled mass curve."""
    with pytest.raises(PreconditionViolation):
        delta_gamma_experiment(build_flow_run(schwarzschild_metric, 5.0), 0.1)


def test_oscillation_bound():
    """Test sup|U - 1| against the mass and flow terms for a monopole."""
    U = ExteriorHarmonic.monopole(3, 0.1)
    report = oscillation_bound_check(U, 5.0, mdot0=1e-4, m0=0.1)
    assert_allclose(report.lhs, 0.01, rtol=1e-10)
    assert report.ratio < 0.5
    assert report.grad_fourth > 0.0
    with pytest.raises(DomainError):
        oscillation_bound_check(U, 2.0, mdot0=1e-4, m0=0.1)


@pytest.mark.slow
def test_first_variation(unit_mass_run):
    """Test the finite-difference m'(0) against the Ricci integral."""
    run = unit_mass_run
    assert_allclose(run.mdot0_fd_total, run.mdot0_formula, rtol=1e-3)
    assert run.admissible_range[1] > 0.0
    assert run.mddot_max is not None


@pytest.mark.slow
def test_flow_csv(unit_mass_run, tmp_path):
    """Test the per-s rows of a mass curve."""
    path = tmp_path / "flow.csv"
    unit_mass_run.write_csv(str(path), extra={"label": "m1"})
    with open(path) as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == len(unit_mass_run.s_grid)
    assert [float(row["s"]) for row in rows] == sorted(unit_mass_run.s_grid)
    assert all(row["label"] == "m1" for row in rows)
    assert unit_mass_run.summary().a == 4.0


@pytest.mark.slow
def test_weighted_estimate_echo(unit_mass_run):
    """Test a finite positive weighted-norm ratio over the solved samples."""
    ratio = weighted_estimate_echo(unit_mass_run)
    assert ratio is not None and 0.0 < ratio < np.inf


@pytest.mark.slow
def test_delta_gamma_small_mass():
    """Test a passing verdict just above the threshold gamma."""
    g = RadialMetric.schwarzschild_isotropic(3, 1e-3, points_per_decade=int(get_setting("FLOW_POINTS_PER_DECADE")))
    run = mass_curve(build_flow_run(g, float(get_setting("DEFAULT_A"))))
    C0, gamma = delta_gamma_window(run)
    assert C0 >= run.mddot_max
    assert -gamma / C0 >= run.admissible_range[0] * (1.0 + 1e-9)
    result = delta_gamma_experiment(run, gamma, C0)
    assert result.verdict == "pass"
    assert result.m_star is not None and result.m_star >= 0.0
    assert run.verdict == "pass"


@pytest.mark.slow
def test_delta_gamma_beyond_range(unit_mass_run):
    """Test an s* past the admissible range is inconclusive without a solve."""
    run = unit_mass_run
    gamma = 2.0 * abs(run.admissible_range[0]) * run.mddot_max
    result = delta_gamma_experiment(run, gamma, run.mddot_max)
    assert result.verdict == "inconclusive"
    assert result.m_star is None
    assert result.s_star < run.admissible_range[0]


@pytest.mark.slow
def test_delta_gamma_bound_below_curvature(unit_mass_run):
    """Test that a C0 under max|m''| is refused."""
    run = unit_mass_run
    with pytest.raises(PreconditionViolation):
        delta_gamma_experiment(run, 0.1, 0.5 * run.mddot_max)
    with pytest.raises(PreconditionViolation):
        delta_gamma_window(build_flow_run(run.base_metric, run.cutoff.a))
