"""
Tests for the radial conformal solver and scalar flattening.
"""
import os

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.experiments.families import bump, composite, family_members, shell_scalar_curvature
from src.experiments.runner import load_scenario
from src.geometry.errors import DomainError, PreconditionViolation, SolverFailure
from src.geometry.grid import STENCIL_HALF_WIDTH
from src.geometry.solver import (
    ConformalBVP,
    assemble_operator,
    comparison_bound_constant,
    inner_end_mass,
    inner_end_mass_shift,
    is_m_matrix,
    scalar_flatten,
    shooting_solve,
    solve_conformal_factor,
    solve_extrapolated,
)
from src.schemas.models import FamilyKind, FamilySpec, GridSpec

SCENARIO_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), "scenarios")


def test_flat_background(flat_metric):
    """Test u = 1 on flat space."""
    solution = solve_conformal_factor(ConformalBVP(metric=flat_metric))
    assert_allclose(solution.u, 1.0, atol=1e-10)
    assert solution.m_matrix


def test_schwarzschild_needs_no_correction(schwarzschild_metric):
    """Test u ~ 1 on a scalar-flat two-ended slice."""
    solution = solve_conformal_factor(ConformalBVP(metric=schwarzschild_metric))
    assert_allclose(solution.u, 1.0, atol=1e-6)


def test_maximum_principle(bump_member):
    """Test the M-matrix property and u <= 1 for R_g >= 0."""
    solution = solve_conformal_factor(ConformalBVP(metric=bump_member.metric))
    assert solution.m_matrix
    assert np.max(solution.u) <= 1.0 + 1e-12
    assert np.min(solution.u) > 0.0
    assert solution.residual <= 1e-10
    assert_allclose(solution.decay_exponent, 1.0, atol=5e-2)


def test_negative_potential_breaks_m_matrix(flat_metric):
    """Test that a negative potential is detected."""
    matrix, _ = assemble_operator(ConformalBVP(metric=flat_metric, potential=-np.ones_like(flat_metric.r)))
    assert not is_m_matrix(matrix)


def test_raw_bump_potential_is_m_matrix(bump_member):
    """Test the unclipped bump potential keeps the discrete maximum principle."""
    matrix, _ = assemble_operator(ConformalBVP(metric=bump_member.metric))
    assert is_m_matrix(matrix)


def test_lost_maximum_principle_raises(flat_metric):
    """Test SolverFailure when the operator is not an M-matrix."""
    bvp = ConformalBVP(metric=flat_metric, potential=-np.ones_like(flat_metric.r))
    with pytest.raises(SolverFailure):
        solve_conformal_factor(bvp)


def test_shooting_agrees(bump_family):
    """Test the direct solve against the shooting solve at 128 points per decade."""
    member = bump(3, 0.2, bump_family, GridSpec(points_per_decade=128))
    bvp = ConformalBVP(metric=member.metric)
    assert_allclose(solve_conformal_factor(bvp).u, shooting_solve(bvp), atol=1e-4)


@pytest.mark.slow
def test_shooting_convergence(bump_family):
    """Test second-order agreement with shooting under grid doubling."""
    errors = []
    for density in (64, 128):
        member = bump(3, 0.2, bump_family, GridSpec(points_per_decade=density))
        bvp = ConformalBVP(metric=member.metric)
        errors.append(np.max(np.abs(solve_conformal_factor(bvp).u - shooting_solve(bvp))))
    assert errors[0] / errors[1] >= 3.5



def test_extrapolated_solve_is_closer(bump_family):
    """Test the Richardson step cuts the error against shooting at 64 points per decade."""
    member = bump(3, 0.2, bump_family, GridSpec(points_per_decade=64))
    bvp = ConformalBVP(metric=member.metric)
    reference = shooting_solve(bvp)
    plain = np.max(np.abs(solve_conformal_factor(bvp).u - reference))
    extrapolated = np.max(np.abs(solve_extrapolated(bvp).u - reference))
    assert extrapolated < 0.25 * plain


def test_flatten_scalar_flat_is_identity(schwarzschild_metric):
    """Test w = 1 and the monopole m/2 on Schwarzschild."""
    result = scalar_flatten(schwarzschild_metric)
    assert np.array_equal(result.w, np.ones_like(schwarzschild_metric.r))
    assert np.array_equal(result.v, np.ones_like(schwarzschild_metric.r))
    assert result.g_tilde is schwarzschild_metric
    assert_allclose(result.U_tilde.monopole_coeff, 0.5, rtol=1e-12)


def test_flatten_bump(bump_member):
    """Test a filled-center bump flattens to flat space with v = U."""
    result = scalar_flatten(bump_member.metric)
    assert result.U_tilde.monopole_coeff == 0.0
    assert np.all(result.g_tilde.A == 1.0) and np.all(result.g_tilde.B == 1.0)
    assert_allclose(result.v, bump_member.metric.harmonic_factor(), rtol=1e-12)
    assert np.all(result.v[1:-1] > 1.0)


def test_flattened_composite_is_schwarzschild():
    """Test g_tilde of a composite member is 1 + c r^(2-n) with c below the monopole of g."""
    member = composite(3, 0.1, FamilySpec(kind=FamilyKind.COMPOSITE), GridSpec())
    result = scalar_flatten(member.metric)
    alpha, beta = result.g_tilde.harmonic_coefficients()
    assert_allclose(alpha, 1.0, rtol=1e-12)
    assert_allclose(beta, result.U_tilde.monopole_coeff, rtol=1e-10)
    assert 0.0 < beta < member.U.monopole_coeff
    assert result.g_tilde.inner == "second_end"
    assert np.min(result.v) >= 1.0 - 1e-12
    assert_allclose(result.w * member.metric.harmonic_factor(), result.g_tilde.harmonic_factor(), rtol=1e-12)


@pytest.mark.parametrize("name", ["bump.yaml", "composite.yaml"])
def test_shipped_members_flatten(name):
    """Test every shipped shell member meets R >= 0 on its grid and flattens."""
    scenario = load_scenario(os.path.join(SCENARIO_DIR, name))
    family = scenario.family
    core = family.core_mass if family.kind == FamilyKind.COMPOSITE else 0.0
    interior = slice(STENCIL_HALF_WIDTH, -STENCIL_HALF_WIDTH)
    for member in family_members(scenario):
        g = member.metric
        charge = member.U.monopole_coeff - 0.5 * core
        closed = shell_scalar_curvature(g.n, g.r, charge, family.shell_inner, family.shell_outer, core)
        assert_allclose(g.scalar_curvature_profile[interior], closed[interior], atol=1e-3 * np.max(closed))
        assert np.min(g.scalar_curvature_profile[interior]) >= -g.curvature_tolerance()
        result = scalar_flatten(g)
        assert np.min(result.v) >= 1.0 - 1e-12
        assert result.U_tilde.monopole_coeff < member.U.monopole_coeff


def test_exterior_gap(bump_member):
    """Test U - U_tilde sampled beyond a is the shell monopole Q/r, seeded."""
    result = scalar_flatten(bump_member.metric)
    gap = result.exterior_gap(5.0, seed=3, count=64)
    assert gap.shape == (65,)
    assert_allclose(gap[0], 0.2 / 5.0, rtol=1e-8)
    assert np.min(gap) > 0.0
    assert np.max(gap) <= gap[0] * (1.0 + 1e-9)
    assert np.array_equal(gap, result.exterior_gap(5.0, seed=3, count=64))
    assert not np.array_equal(gap, result.exterior_gap(5.0, seed=4, count=64))
    with pytest.raises(DomainError):
        result.exterior_gap(0.5)


def test_flatten_record(bump_member):
    """Test the flatten record masses."""
    record = scalar_flatten(bump_member.metric).to_record()
    assert record.v_min >= 1.0 - 1e-12
    assert record.mass_g_tilde < record.mass_g


def test_flatten_rejects_negative_curvature(bump_family):
    """Test PreconditionViolation for a shell of negative charge."""
    member = bump(3, -0.05, bump_family, GridSpec(points_per_decade=64))
    with pytest.raises(PreconditionViolation):
        scalar_flatten(member.metric)


def test_comparison_constant():
    """Test C(3, 3) = 5/2 and its decrease in a."""
    assert_allclose(comparison_bound_constant(3.0, 3), 2.5)
    values = [comparison_bound_constant(a, 3) for a in (3.0, 5.0, 10.0)]
    assert values[0] > values[1] > values[2]
    with pytest.raises(ValueError):
        comparison_bound_constant(1.0, 3)


def test_inner_end_mass(schwarzschild_metric, bump_member):
    """Test the inverted end of Schwarzschild carries mass m."""
    assert_allclose(inner_end_mass(schwarzschild_metric), 1.0, rtol=1e-6)
    u = np.full(bump_member.metric.r.size, 0.9)
    assert inner_end_mass_shift(u, bump_member.metric) == 0.0
