"""Model problems, error norms, energies and convergence studies."""

from .cases import (
    CASES,
    MU0,
    case_from_file,
    case_test1,
    case_test2,
    case_test3,
    check_current_compatibility,
    coax_energies,
    get_case,
)
from .exactness import (
    CONSISTENCY_TOL,
    PROJECTION_TOL,
    SAMPLE_MESHES,
    consistency_errors,
    local_form_consistency,
    projection_errors,
    projection_exactness,
    sample_meshes,
)
from .convergence import (
    RATE_WINDOW,
    CaseResult,
    ConvergenceReport,
    convergence_row,
    fit_rate,
    run_convergence,
    solve_case,
)
from .norms import EnergyBreakdown, cell_averages, curl_error, energies, error_L2

__all__ = [
    "CASES",
    "MU0",
    "case_test1",
    "case_test2",
    "case_test3",
    "case_from_file",
    "check_current_compatibility",
    "coax_energies",
    "get_case",
    "CaseResult",
    "ConvergenceReport",
    "RATE_WINDOW",
    "convergence_row",
    "fit_rate",
    "run_convergence",
    "solve_case",
    "EnergyBreakdown",
    "cell_averages",
    "curl_error",
    "energies",
    "error_L2",
    "SAMPLE_MESHES",
    "PROJECTION_TOL",
    "CONSISTENCY_TOL",
    "sample_meshes",
    "projection_errors",
    "consistency_errors",
    "projection_exactness",
    "local_form_consistency",
]
