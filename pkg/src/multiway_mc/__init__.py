"""Multi-way Markov random-walk Monte Carlo solver for x = Hx + b."""

from .sparse import (
    SparseMatrix, ProblemInstance, MatrixFormatError, PowerIterationError,
    matvec, abs_matrix, infinity_norm, spectral_radius_nonneg,
    spectral_radius, load_matrix_market, diagonal_precondition,
    sprand_like, rescale_to_radius,
)
from .transitions import (
    TransitionHypermatrix, InitialDistribution, BuildOutcome,
    build_hypermatrix, build_until_contractive, h_tilde_norm,
    initial_distribution_from, dump_hypermatrix, load_hypermatrix,
)
from .walk import (
    WalkSpec, WalkOutcome, EstimateReport, default_max_steps,
    run_walks, sample_walk, estimate_functional, empirical_variance_of_Z,
)
from .variance import (
    HatOperators, VarianceReport, SpeedupResult, VarianceDiverged,
    build_hat_operators, apply_h_tilde, apply_G, solve_x,
    closed_form_variance, speedup_vs_standard, divergence_demo,
)
from .experiments import (
    RatioRow, SpeedupRow, synthesize_H, random_problem,
    run_ratio_experiment, run_speedup_experiment, solvability_by_m,
)

__version__ = "0.1.0"
