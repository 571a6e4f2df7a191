"""Stellar Modes - Admissible gaseous-star equilibria and their oscillation spectra."""

# Configuration and errors
from stellar_modes.config import ModeRequest, RunConfig, Tolerances
from stellar_modes.errors import (
    ConfigError,
    DomainError,
    EosError,
    FormulationMismatch,
    GModeAssumptionViolated,
    GravityCouplingTooStrong,
    IllConditioned,
    IntegratorError,
    InversionError,
    LambdaTooLarge,
    MuTooLarge,
    NoFiniteRadius,
    NoRootInWindow,
    NuNotRational,
    ResolventNearPole,
    StellarModesError,
    SurfaceFitError,
    TransformError,
)

# Equilibrium
from stellar_modes.equilibrium import (
    EntropyLaw,
    EosSpec,
    EquilibriumStar,
    GridSpec,
    boundary_coefficients,
    build_equilibrium,
    check_admissible,
    eos_u_and_inverse,
    lane_emden_radius,
    rescale_tau,
)

# Background profiles
from stellar_modes.profiles import (
    background_profiles,
    gough_factors,
    lambda0_default,
    lamb_frequency_sq,
    mean_density,
    mu0_default,
    pmode_factors,
    scale_height_inv,
)

# Gravity
from stellar_modes.gravity import (
    HlOperator,
    apply_Hl,
    apply_Hl_dot,
    check_condition_G,
    coupling_coefficients,
    hl_of_one,
    solve_delta_phi,
)

# Sturm-Liouville solver
from stellar_modes.sl_solver import (
    LiouvilleProblem,
    liouville_transform,
    prufer_refine,
    sl_eigenfunction,
    sl_eigenvalues,
)

# Radial modes
from stellar_modes.radial import (
    radial_dense_oracle,
    radial_liouville,
    radial_q00,
    radial_spectrum,
    rayleigh_lower_bound,
)

# Nonradial modes
from stellar_modes.nonradial import (
    check_B_conditions,
    cowling_shift_report,
    fixed_point_eigenvalues,
    gmode_problem,
    kernel_probe,
    operator_residual,
    pmode_problem,
    quadratic_form,
    reconstruct_mode,
    reduced_coeffs,
)

# Four-dimensional system
from stellar_modes.ode4 import (
    assemble_A,
    eigen_determinant,
    frobenius_center,
    frobenius_surface,
    scan_eigenvalues,
    solve_inhomogeneous,
    weak_resolvent_residual,
)

# Results: validation, cache, database
from stellar_modes.validation import run_invariant_suite
from stellar_modes.cache import ResultCache
from stellar_modes.database import (
    create_database,
    export_results_to_db,
    get_database_url,
    get_db_connection,
    import_modes,
    import_stars,
    load_from_db,
)

__all__ = [
    # Configuration and errors
    "ModeRequest",
    "RunConfig",
    "Tolerances",
    "ConfigError",
    "DomainError",
    "EosError",
    "FormulationMismatch",
    "GModeAssumptionViolated",
    "GravityCouplingTooStrong",
    "IllConditioned",
    "IntegratorError",
    "InversionError",
    "LambdaTooLarge",
    "MuTooLarge",
    "NoFiniteRadius",
    "NoRootInWindow",
    "NuNotRational",
    "ResolventNearPole",
    "StellarModesError",
    "SurfaceFitError",
    "TransformError",
    # Equilibrium
    "EntropyLaw",
    "EosSpec",
    "EquilibriumStar",
    "GridSpec",
    "boundary_coefficients",
    "build_equilibrium",
    "check_admissible",
    "eos_u_and_inverse",
    "lane_emden_radius",
    "rescale_tau",
    # Background profiles
    "background_profiles",
    "gough_factors",
    "lambda0_default",
    "lamb_frequency_sq",
    "mean_density",
    "mu0_default",
    "pmode_factors",
    "scale_height_inv",
    # Gravity
    "HlOperator",
    "apply_Hl",
    "apply_Hl_dot",
    "check_condition_G",
    "coupling_coefficients",
    "hl_of_one",
    "solve_delta_phi",
    # Sturm-Liouville solver
    "LiouvilleProblem",
    "liouville_transform",
    "prufer_refine",
    "sl_eigenfunction",
    "sl_eigenvalues",
    # Radial modes
    "radial_dense_oracle",
    "radial_liouville",
    "radial_q00",
    "radial_spectrum",
    "rayleigh_lower_bound",
    # Nonradial modes
    "check_B_conditions",
    "cowling_shift_report",
    "fixed_point_eigenvalues",
    "gmode_problem",
    "kernel_probe",
    "operator_residual",
    "pmode_problem",
    "quadratic_form",
    "reconstruct_mode",
    "reduced_coeffs",
    # Four-dimensional system
    "assemble_A",
    "eigen_determinant",
    "frobenius_center",
    "frobenius_surface",
    "scan_eigenvalues",
    "solve_inhomogeneous",
    "weak_resolvent_residual",
    # Results
    "run_invariant_suite",
    "ResultCache",
    "create_database",
    "export_results_to_db",
    "get_database_url",
    "get_db_connection",
    "import_modes",
    "import_stars",
    "load_from_db",
]
