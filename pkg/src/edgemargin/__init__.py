"""Robustness of weighted directed consensus to a single perturbed edge weight."""
from ._accel import USE_NUMBA
from .errors import EdgeMarginError
from .factorization import Factorization, factorize, reduced_matrix, signed_path
from .graph import (
    BranchingDecomposition,
    Digraph,
    build_incidence,
    digraph,
    edge_laplacian,
    find_in_branching,
    graph_laplacian,
    reachability,
    structure_report,
)
from .robustness import (
    PerturbationBound,
    analyze,
    bound_for_edge,
    build_uncertain_system,
    cycle_bound,
    dag_bound,
    eval_transfer,
    gain_margin,
    rank_edges,
    sherman_morrison_inverse,
)

__version__ = "0.1.0"
