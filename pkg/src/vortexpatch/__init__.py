"""Critical points and free boundaries of a p-Laplacian patch energy.

The package finds nontrivial critical points of the smoothed energy

    (1/p) int |grad u|^p + int G((u - 1)/alpha) - (lam/q) int (u - 1)_+^q

on rectangles with zero boundary data, continues them as the smoothing
width alpha shrinks, and verifies the sharp-interface jump relation
|grad u+|^p - |grad u-|^p = p/(p-1) along the extracted 1-level set.
A high-accuracy 1D slab shooting solver serves as independent ground
truth, and a config-driven CLI wraps the pieces into reproducible runs.
"""

from .domain import (
    Grid2D,
    ScalarField,
    cell_average,
    field_from_values,
    gradient_field,
    load_field,
    make_grid,
    random_field,
    save_field,
)
from .energy import (
    ProblemParams,
    SolveReport,
    band_area,
    hessian_diag,
    hessian_matrix,
    hessian_vector,
    p_dirichlet_energy,
    p_dirichlet_matrix,
    patch_area,
    sharp_energy,
    smooth_energy,
    smooth_gradient,
)
from .freeboundary import (
    FreeBoundaryReport,
    LevelSet,
    PharmonicResidual,
    enclosed_area,
    extract_level_set,
    jump_residual_stats,
    one_sided_gradient,
    pharmonic_residual,
    save_freeboundary_csv,
)
from .oracle import (
    OracleComparison,
    SlabSolution,
    compare_to_oracle,
    save_slab_csv,
    shoot_slab,
)
from .smoothing import SmootherSpec, G_eval, check_normalization, g_eval, g_prime_eval
from .solver import (
    ContinuationError,
    ContinuationReport,
    ContinuationSchedule,
    ContinuationStep,
    SolverError,
    continue_alpha,
    first_eigenvalue,
    minimize_smooth,
    morse_index,
    mountain_pass,
    newton_refine,
    scale_to_negative_energy,
    solve_poisson_p,
)

__version__ = "0.1.0"

__all__ = [
    "Grid2D", "ScalarField", "cell_average", "field_from_values",
    "gradient_field", "load_field", "make_grid", "random_field", "save_field",
    "ProblemParams", "SolveReport", "band_area", "hessian_diag",
    "hessian_matrix", "hessian_vector", "p_dirichlet_energy",
    "p_dirichlet_matrix", "patch_area", "sharp_energy", "smooth_energy",
    "smooth_gradient",
    "FreeBoundaryReport", "LevelSet", "PharmonicResidual", "enclosed_area",
    "extract_level_set", "jump_residual_stats", "one_sided_gradient",
    "pharmonic_residual", "save_freeboundary_csv",
    "OracleComparison", "SlabSolution", "compare_to_oracle", "save_slab_csv",
    "shoot_slab",
    "SmootherSpec", "G_eval", "check_normalization", "g_eval", "g_prime_eval",
    "ContinuationError", "ContinuationReport", "ContinuationSchedule",
    "ContinuationStep", "SolverError", "continue_alpha", "first_eigenvalue",
    "minimize_smooth", "morse_index", "mountain_pass", "newton_refine",
    "scale_to_negative_energy", "solve_poisson_p",
    "__version__",
]
