"""
Tests for curvature of conformally flat and radial metrics.
"""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.experiments.families import shell_scalar_curvature
from src.geometry.errors import AdmissionError, DomainError
from src.geometry.grid import STENCIL_HALF_WIDTH, log_grid
from src.geometry.harmonic import ExteriorHarmonic
from src.geometry.metric import (
    ConformallyFlatMetric,
    RadialConformalFactor,
    RadialMetric,
    conformal_coefficient,
    grad_u_fourth_integral,
    ricci_norm_sq_integral,
)

INTERIOR = slice(STENCIL_HALF_WIDTH, -STENCIL_HALF_WIDTH)


def christoffel_ricci(metric_tensor, x, h=1e-4, H=1e-3):
    """Ricci tensor from finite-difference Christoffel symbols of g_ij(x)."""
    n = x.size
    eye = np.eye(n)

    def g(point):
        return metric_tensor(point)[0]

    def christoffel(point):
        dg = np.array([(g(point + h * eye[k]) - g(point - h * eye[k])) / (2 * h) for k in range(n)])
        inverse = np.linalg.inv(g(point))
        # gamma[k, i, j] = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)
        lowered = 0.5 * (np.einsum("ijl->ijl", dg) + np.einsum("jil->ijl", dg) - np.einsum("lij->ijl", dg))
        return np.einsum("kl,ijl->kij", inverse, lowered)

    gamma = christoffel(x)
    dgamma = np.array([(christoffel(x + H * eye[m]) - christoffel(x - H * eye[m])) / (2 * H) for m in range(n)])
    # Ric_ij = d_k G^k_ij - d_j G^k_ik + G^k_kl G^l_ij - G^k_jl G^l_ik
    term1 = np.einsum("kkij->ij", dgamma)
    term2 = np.einsum("jkik->ij", dgamma)
    term3 = np.einsum("kkl,lij->ij", gamma, gamma)
    term4 = np.einsum("kjl,lik->ij", gamma, gamma)
    return term1 - term2 + term3 - term4


def test_conformal_coefficient():
    """Test (n-2)/(4(n-1))."""
    assert conformal_coefficient(3) == 0.125
    assert_allclose(conformal_coefficient(5), 3.0 / 16.0)


def test_ricci_against_christoffel_oracle(dipole_harmonic):
    """Test the closed-form Ricci tensor of U^4 delta against finite-difference Christoffels."""
    g = ConformallyFlatMetric(dipole_harmonic)
    x = np.array([1.1, -0.6, 0.9])
    assert_allclose(g.ricci(x)[0], christoffel_ricci(g.metric_tensor, x), atol=2e-5)


def test_harmonic_factor_is_scalar_flat(dipole_harmonic, rng):
    """Test R = 0 for a harmonic conformal factor."""
    g = ConformallyFlatMetric(dipole_harmonic)
    points = rng.normal(size=(1000, 3))
    points *= (1.0 + 30.0 * rng.random(1000))[:, None] / np.linalg.norm(points, axis=1)[:, None]
    assert np.max(np.abs(g.scalar_curvature(points))) < 1e-10
    assert_allclose(g.ricci_trace(points), g.scalar_curvature(points), atol=1e-10)


def test_nonharmonic_factor_curvature():
    """Test R = -8 U^-5 Delta U for U = 1 + c r^2 sampled radially (n = 3)."""
    r = log_grid(1.0, 10.0, 256)
    factor = RadialConformalFactor(n=3, r=r, values=1.0 + 0.01 * r ** 2)
    x = np.array([[2.0, 1.0, 2.0]])
    expected = -8.0 * (1.0 + 0.01 * 9.0) ** -5 * 0.06
    assert_allclose(ConformallyFlatMetric(factor).scalar_curvature(x), [expected], rtol=1e-4)


def test_schwarzschild_ricci_profile(schwarzschild_metric):
    """Test Ricci eigenvalues -2m/rho^3 and m/rho^3 in the areal radius rho = r U^2."""
    g = schwarzschild_metric
    radial, tangential = g.ricci_profile
    rho = g.r * (1.0 + 0.5 / g.r) ** 2
    # relative error grows like r in the far field where Ric cancels to O(r^-3)
    near = np.zeros(g.r.size, dtype=bool)
    near[INTERIOR] = True
    near &= g.r <= 100.0
    assert_allclose(radial[near], -2.0 / rho[near] ** 3, rtol=1e-5)
    assert_allclose(tangential[near], 1.0 / rho[near] ** 3, rtol=1e-5)
    assert np.max(np.abs(g.scalar_curvature_profile[INTERIOR])) <= g.curvature_tolerance()


def test_radial_matches_conformal_route():
    """Test a radial sampling of a conformally flat metric against the closed form."""
    g = ConformallyFlatMetric(ExteriorHarmonic.monopole(3, 0.6))
    radial = g.to_radial(points_per_decade=256)
    point = np.array([3.0, 0.0, 0.0])
    rad, tan = radial.ricci(3.0)
    ric = g.ricci(point)[0] * g.factor.eval(point) ** -4
    assert_allclose([rad, tan], [ric[0, 0], ric[1, 1]], rtol=1e-5)


def test_shell_curvature_closed_form(bump_member, bump_family):
    """Test the sampled curvature of a bump metric against the closed form."""
    g = bump_member.metric
    exact = shell_scalar_curvature(3, g.r, 0.2, bump_family.shell_inner, bump_family.shell_outer)
    assert np.min(exact) >= 0.0
    gap = np.max(np.abs(g.scalar_curvature_profile[INTERIOR] - exact[INTERIOR]))
    assert gap <= 1e-3 * np.max(exact)


def test_curvature_noise_floor(schwarzschild_metric):
    """Test that the noise floor never drops below the configured tolerance."""
    assert schwarzschild_metric.curvature_tolerance() >= 1e-12
    flat = RadialMetric.schwarzschild_isotropic(3, 0.0)
    assert flat.curvature_tolerance() < 1e-10



def test_curvature_floor_tracks_truncation(bump_member, bump_family):
    """Test the refinement floor covers the sampled error of a bump and stays far below its curvature."""
    g = bump_member.metric
    exact = shell_scalar_curvature(3, g.r, 0.2, bump_family.shell_inner, bump_family.shell_outer)
    error = np.max(np.abs(g.scalar_curvature_profile[INTERIOR] - exact[INTERIOR]))
    floor = g.curvature_tolerance()
    assert error <= floor <= 1e-3 * np.max(exact)
    assert np.min(g.scalar_curvature_profile[INTERIOR]) >= -floor


def test_harmonic_coefficients(schwarzschild_metric, bump_member):
    """Test radial harmonics are recognised and other metrics are not."""
    alpha, beta = schwarzschild_metric.harmonic_coefficients()
    assert_allclose([alpha, beta], [1.0, 0.5], rtol=1e-10)
    assert bump_member.metric.harmonic_coefficients() is None
    areal = RadialMetric.schwarzschild_areal(3, 1.0, r_min=4.0, r_max=4e3)
    assert areal.harmonic_coefficients() is None


def test_conformal_covariance(bump_member):
    """Test R of w^4 g against -8 w^-5 L_g w on a bump background."""
    g = bump_member.metric
    n = g.n
    x = np.log(g.r)
    w = 1.0 + 0.2 / (1.0 + x ** 2)
    lhs = g.conformal_rescale(w).scalar_curvature_profile
    rhs = -(4.0 * (n - 1.0) / (n - 2.0)) * w ** (-(n + 2.0) / (n - 2.0)) * g.conformal_laplacian_apply(w)
    assert_allclose(lhs[INTERIOR], rhs[INTERIOR], atol=1e-5 * np.max(np.abs(lhs[INTERIOR])))


def test_rejects_non_riemannian():
    """Test AdmissionError naming the riemannian invariant."""
    r = log_grid(1.0, 100.0, 16)
    A = np.ones_like(r)
    A[3] = -1.0
    with pytest.raises(AdmissionError) as info:
        RadialMetric(n=3, r=r, A=A, B=np.ones_like(r))
    assert info.value.invariant == "riemannian"


def test_rejects_non_uniform_grid():
    """Test that grids must be uniform in log r."""
    r = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0])
    with pytest.raises(AdmissionError) as info:
        RadialMetric(n=3, r=r, A=np.ones(7), B=np.ones(7))
    assert info.value.invariant == "grid"


def test_areal_schwarzschild_is_scalar_flat():
    """Test R ~ 0 in areal coordinates (A != B)."""
    g = RadialMetric.schwarzschild_areal(3, 1.0, r_min=4.0, r_max=4e3, points_per_decade=256)
    assert np.max(np.abs(g.scalar_curvature_profile[INTERIOR])) <= g.curvature_tolerance()


def test_areal_horizon_rejected():
    """Test that a grid reaching the horizon is rejected."""
    with pytest.raises(AdmissionError):
        RadialMetric.schwarzschild_areal(3, 1.0, r_min=1.5, r_max=10.0)


def test_ricci_integral_routes_agree():
    """Test the radial and Cartesian routes for the Ricci-squared integral."""
    U = ExteriorHarmonic.monopole(3, 1.0)
    radial = ConformallyFlatMetric(U).to_radial(points_per_decade=256)
    value, _ = ricci_norm_sq_integral(radial, (2.0, 10.0))
    reference, _ = ricci_norm_sq_integral(ConformallyFlatMetric(U), (2.0, 10.0))
    assert_allclose(value, reference, rtol=1e-6)


def test_ricci_integral_rejects_bad_annulus(schwarzschild_metric):
    """Test DomainError for an empty or off-grid annulus."""
    with pytest.raises(DomainError):
        ricci_norm_sq_integral(schwarzschild_metric, (5.0, 2.0))
    with pytest.raises(DomainError):
        ricci_norm_sq_integral(schwarzschild_metric, (0.5, 2.0))


def test_grad_fourth_closed_form():
    """Test int |grad U|^4 = (pi/20)(1.5^-5 - 9^-5) for m = 1, a = 3."""
    value = grad_u_fourth_integral(ExteriorHarmonic.monopole(3, 1.0), 3.0)
    assert_allclose(value, np.pi / 20.0 * (1.5 ** -5 - 9.0 ** -5), rtol=1e-6)


def test_decay_report(schwarzschild_metric):
    """Test decay exponents p = n - 2 and |B'| ~ r^-(p+1)."""
    report = schwarzschild_metric.decay_report()
    assert_allclose(report["p_B"], 1.0, atol=5e-2)
    assert_allclose(report["p_dB"], 2.0, atol=5e-2)
