"""R-optimal approximate designs for multi-response regression on discrete grids."""

from .config import ConfigError, ProblemConfig, load_config, parse_config
from .driver import solve_problem
from .equivalence import EquivalenceReport, export_d_surface, verify_optimality, verify_published
from .information import (
    InfoContext,
    SingularInformationError,
    build_context,
    grad_phi1,
    info_matrix,
    phi,
    phi1,
    sensitivities,
)
from .interior import SolveReport, SolverOptions, solve
from .model import (
    CovarianceSpec,
    DesignMeasure,
    DesignSpace,
    FactorSpec,
    ModelError,
    ModelSpec,
    ResponseBasis,
    build_grid,
    correlation_from_covariance,
    z_matrix,
)
from .multiplicative import MultOptions, solve_multiplicative
from .reporting import ExactDesign, load_report, round_design, write_report
from .symmetry import (
    OrbitReduction,
    SymmetryError,
    Transform,
    detect_Q,
    reduce_by_reflections,
    reduced_context,
)

__version__ = "0.1.0"
