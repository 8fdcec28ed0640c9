"""Numerical laboratory for a conformal curvature functional on
triangulated spheres: energy evaluation, constrained minimization, the
mean-field equation, Green-function and bubble analysis, inequality
property suites, and a normalized curvature flow, with a CLI harness.
"""

__version__ = "0.1.0"

from .energy import (
    EIGHT_PI,
    EnergyBreakdown,
    conformal_curvature,
    liouville_energy,
    log_volume,
    onofri_deficit,
    perturbed_functional,
    perturbed_gradient,
)
from .errors import (
    ConvergenceError,
    DataError,
    LabError,
    MeshQualityError,
    NumericError,
    ParameterError,
    ResolutionError,
)
from .flow import FlowTrace, flow_step, run_flow
from .green import (
    BubbleReport,
    GreenResult,
    bubble_checks,
    bubble_dirichlet_closed_form,
    bubble_mass_closed_form,
    bubble_profile,
    extract_A,
    lower_bound_predictor,
    rescale_diagnostic,
    solve_green,
)
from .inequalities import (
    InequalityReport,
    brezis_merle_check,
    check_global_mt,
    check_local_mt,
    onofri_suite,
    poincare_constant,
    sample_seed,
    disk_floor_gap,
)
from .mesh import (
    FOUR_PI,
    DiscreteOperators,
    TriangulatedSphere,
    assemble_operators,
    build_icosphere,
    dirichlet_energy,
    geodesic_distances,
    integrate,
    mobius_dilation_factor,
    random_band_field,
    read_field_csv,
    read_off_mesh,
    sample_field,
    set_conformal_background,
    write_field_csv,
    write_off_mesh,
)
from .solver import (
    DiskMinimum,
    MinimizerResult,
    SolverConfig,
    disk_min_dirichlet,
    mass_norm,
    minimize_perturbed,
    project_constraint,
    solve_mean_field,
)

__all__ = [
    "EIGHT_PI",
    "FOUR_PI",
    "BubbleReport",
    "ConvergenceError",
    "DataError",
    "DiscreteOperators",
    "DiskMinimum",
    "EnergyBreakdown",
    "FlowTrace",
    "GreenResult",
    "InequalityReport",
    "LabError",
    "MeshQualityError",
    "MinimizerResult",
    "NumericError",
    "ParameterError",
    "ResolutionError",
    "SolverConfig",
    "TriangulatedSphere",
    "assemble_operators",
    "brezis_merle_check",
    "bubble_checks",
    "bubble_dirichlet_closed_form",
    "bubble_mass_closed_form",
    "bubble_profile",
    "build_icosphere",
    "check_global_mt",
    "check_local_mt",
    "conformal_curvature",
    "dirichlet_energy",
    "disk_min_dirichlet",
    "extract_A",
    "flow_step",
    "geodesic_distances",
    "integrate",
    "liouville_energy",
    "log_volume",
    "lower_bound_predictor",
    "mass_norm",
    "minimize_perturbed",
    "mobius_dilation_factor",
    "onofri_deficit",
    "onofri_suite",
    "perturbed_functional",
    "perturbed_gradient",
    "poincare_constant",
    "project_constraint",
    "random_band_field",
    "read_field_csv",
    "read_off_mesh",
    "rescale_diagnostic",
    "run_flow",
    "sample_field",
    "sample_seed",
    "set_conformal_background",
    "solve_green",
    "solve_mean_field",
    "disk_floor_gap",
    "write_field_csv",
    "write_off_mesh",
]
