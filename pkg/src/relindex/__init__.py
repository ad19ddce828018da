"""Relative index of symmetric operators across a spectral gap, with model applications."""

from .errors import (
    ConfigError,
    ConvexityError,
    EigenError,
    InadmissibleError,
    ModelError,
    PreconditionError,
    RelIndexError,
    ResolutionError,
    ShiftError,
    ShiftSearchError,
)
from .symmetric import eig_sym, inertia_below, is_definite, kernel_dim, symmetrize
from .index import (
    GappedOperator,
    IndexPair,
    Perturbation,
    check_admissible,
    choose_shift,
    crossing_sum,
    dual_operator,
    duality_identity_check,
    gap_hygiene,
    index_pair,
    index_via_crossings,
    morse_index,
    nullity,
    shift_candidates,
)
from .flow import Crossing, FlowResult, OperatorPath, spectral_flow, spectral_flow_affine, spectral_flow_tracked, verify_sf_index
from .models import (
    Grid1D,
    MatrixFunction,
    dirac1d_operator,
    example_L,
    hamiltonian_operator,
    multiplication_operator,
    potential_well_V,
    radial_first_eigenvalue,
    rayleigh_witness,
)
from .dual import (
    DualProblem,
    DualState,
    Nonlinearity,
    build_problem,
    dual_functional,
    legendre_grad,
    minimize_dual,
    quadratic_nonlinearity,
    saturating_nonlinearity,
    shift_epsilon,
    twisting_report,
)
from .config import ExperimentConfig, dump_config, parse_config
from .experiments import Report, emit_plot_data, run_experiment

__version__ = "0.1.0"
