"""Multiway fusion of uncertain pairwise affinities into consistent associations."""
from .core import (
    AffinityError,
    AffinityMatrix,
    AssignmentMatrix,
    DimensionError,
    PenaltyPair,
    SolverConfig,
    ViewPartition,
    build_penalties,
    combine_affinities,
    frobenius_form,
    gradient,
    objective,
    phi_dist,
    phi_orth,
    validate_affinity,
)
from .projection import project_row_simplex, project_simplex
from .solver import (
    Clustering,
    NotConverged,
    SolveReport,
    extract_clusters,
    init_penalty_weight,
    initialize,
    is_feasible,
    perturb_penalties,
    pgd_inner,
    solve,
)

__version__ = "0.1.0"
