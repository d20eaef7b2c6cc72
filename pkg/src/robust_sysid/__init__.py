"""Robust identification of linear systems under sparse adversarial disturbances."""
from .lti import (
    AttackModel,
    IndexSet,
    SystemMatrices,
    Trajectory,
    col_group_norm,
    project_columns,
    read_trajectory_csv,
    sample_attack_disturbances,
    simulate,
    submatrix,
    write_trajectory_csv,
)
from .estimator import (
    EstimationResult,
    SolverConfig,
    block_soft_threshold,
    solve_lasso,
    solve_least_squares,
)

from .lp import InfNormSolution, min_inf_norm_solve
from .certifier import (
    CertificateReport,
    certify_via_xi,
    check_singular_value_nsp,
    nsp_verdict,
    xi_1,
    xi_s,
)
from .bounds import (
    concentration_quantities,
    error_bound,
    estimation_error_bound,
    gramian_envelope,
    gramian_sandwich_check,
    monte_carlo_sigma_check,
)
from .errors import EnumerationCapError, LPError, NotDecomposableError, RankDeficientError

__version__ = "0.1.0"
