"""
Initialization file for geometry package.
"""
from .errors import (
    DomainError,
    MarginError,
    AdmissionError,
    InadmissibleDeformation,
    PreconditionViolation,
    SolverFailure,
    FitFailure
)
from .quadrature import SphereSample, sphere_sample, fibonacci_directions, unit_sphere_area
from .harmonic import (
    ExteriorHarmonic,
    harmonic_basis,
    mass_from_expansion,
    spherical_average,
    sup_deviation,
    exterior_poisson_kernel,
    poisson_extend,
    harnack_constants
)
from .metric import (
    ConformallyFlatMetric,
    RadialConformalFactor,
    RadialMetric,
    conformal_ricci,
    scalar_curvature,
    ricci,
    ricci_norm_sq_integral,
    conformal_laplacian_apply,
    grad_u_fourth_integral,
    metric_laplacian_fd
)
from .mass import MassReport, adm_flux, adm_mass, extrapolate_limit, mass_difference_flux, monopole_shift, rescale_metric
from .solver import (
    ConformalBVP,
    FlattenResult,
    assemble_operator,
    is_m_matrix,
    solve_radial_bvp,
    solve_conformal_factor,
    solve_extrapolated,
    shooting_solve,
    scalar_flatten,
    comparison_bound_constant,
    inner_end_mass_shift
)
from .norms import (
    WeightedNormSpec,
    RadialFunction,
    weighted_norm,
    weighted_norm_terms,
    barrier_f_infinity,
    barrier_subharmonicity_check,
    TestFunction,
    forced_test_family,
    injectivity_ratio
)
from .deformation import (
    Cutoff,
    FlowRun,
    cutoff_eval,
    cutoff_derivative,
    deform,
    admissibility_scale,
    mass_at,
    build_flow_run,
    mass_curve,
    mdot0_formula,
    oscillation_bound_check,
    delta_gamma_experiment,
    delta_gamma_window,
    weighted_estimate_echo
)

__all__ = [
    'DomainError', 'MarginError', 'AdmissionError', 'InadmissibleDeformation',
    'PreconditionViolation', 'SolverFailure', 'FitFailure',
    'SphereSample', 'sphere_sample', 'fibonacci_directions', 'unit_sphere_area',
    'ExteriorHarmonic', 'harmonic_basis', 'mass_from_expansion', 'spherical_average',
    'sup_deviation', 'exterior_poisson_kernel', 'poisson_extend', 'harnack_constants',
    'ConformallyFlatMetric', 'RadialConformalFactor', 'RadialMetric', 'conformal_ricci',
    'scalar_curvature', 'ricci', 'ricci_norm_sq_integral', 'conformal_laplacian_apply',
    'grad_u_fourth_integral', 'metric_laplacian_fd',
    'MassReport', 'adm_flux', 'adm_mass', 'extrapolate_limit', 'mass_difference_flux',
    'monopole_shift', 'rescale_metric',
    'ConformalBVP', 'FlattenResult', 'assemble_operator', 'is_m_matrix', 'solve_radial_bvp',
    'solve_conformal_factor', 'solve_extrapolated', 'shooting_solve', 'scalar_flatten',
    'comparison_bound_constant',
    'inner_end_mass_shift',
    'WeightedNormSpec', 'RadialFunction', 'weighted_norm', 'weighted_norm_terms',
    'barrier_f_infinity', 'barrier_subharmonicity_check', 'TestFunction', 'forced_test_family',
    'injectivity_ratio',
    'Cutoff', 'FlowRun', 'cutoff_eval', 'cutoff_derivative', 'deform', 'admissibility_scale',
    'mass_at', 'build_flow_run', 'mass_curve', 'mdot0_formula', 'oscillation_bound_check',
    'delta_gamma_experiment', 'delta_gamma_window', 'weighted_estimate_echo'
]
