"""Numerical machinery for 1-d stochastic heat/Burgers equations driven by
stochastic measures: measure sampling, heat-semigroup operators, the
stochastic convolution with its regularity diagnostics, a cutoff Picard
solver, and the averaging-principle experiment."""

from .averaging import (
    AveragingScenario,
    ConvergenceTable,
    averaging_experiment,
    compute_r1_r2,
    g_sigma_sup,
    gronwall_series,
    sigma_bar,
)
from .besov import BesovEstimate, besov_norm, holder_fit, verify_dyadic_bound
from .coeffs import (
    CoefficientSet,
    PhiSpec,
    SigmaSpec,
    build_u0,
    burgers_coefficients,
    custom_coefficients,
    heat_coefficients,
)
from .convolution import (
    RegularityReport,
    ThetaEngine,
    envelope,
    envelope_profile,
    q_kernel,
    regularity_report,
    theta,
    theta_all,
)
from .errors import (
    AlignmentError,
    AveragingError,
    ConfigError,
    ConvergenceError,
    CoefficientError,
    DegenerateInputError,
    GridError,
    MeasureError,
    SmpdeError,
)
from .grid import (
    Field,
    GridSpec,
    SpaceTimeField,
    l1_norm,
    l2_distance,
    l2_norm,
    l4_norm,
    sup_norm,
)
from .heat import apply_semigroup, j1, j1_all, j2, j2_all, kernel, kernel_dx
from .measures import (
    MeasureSample,
    dyadic_energy,
    integrate_cellwise,
    measure_of,
    sample_alpha_stable,
    sample_deterministic_lebesgue,
    sample_fbm,
    sample_weighted_wiener,
    sample_wiener,
    tail_weight,
    unit_blocks,
)
from .seeding import seed_split
from .solver import (
    CutoffSelection,
    SolveReport,
    SolverConfig,
    apply_A,
    picard_solve,
    project_pi_n,
    select_N,
    weighted_distance,
    weighted_norm,
)

__version__ = "0.1.0"
