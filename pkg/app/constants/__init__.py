"""
Constants package for the merge tree toolkit.

This package contains all application constants organized by domain.
"""

from .defaults import (
    # Iterative algorithms
    AUCTION_EPS_FACTOR,
    AUCTION_EPS_FINAL_RATIO,
    AUCTION_MAX_BIDS,
    AUCTION_EPS_START_RATIO,
    BARYCENTER_MAX_ITERATIONS,
    BARYCENTER_STOP_RATIO,
    # Metric parameters
    DEFAULT_EPS1,
    DEFAULT_EPS2,
    DEFAULT_EPS3,
    DEFAULT_NORMALIZE,
    # Assignment
    FORBIDDEN_COST,
    KMEANS_MAX_ITERATIONS,
    # Trees
    NODE_LEAF,
    NODE_ROOT,
    NODE_SADDLE,
    PERSISTENCE_EPSILON,
    SOLVER_AUCTION,
    SOLVER_EXACT,
    SOLVERS,
    STABILITY_FIT_LIMIT,
    STABILITY_TOLERANCE,
    SWAP_FIELD_SIMPLIFY_THRESHOLD,
    SYNTH_SIMPLIFY_THRESHOLD,
    TIE_TOLERANCE,
    TREE_JOIN,
    TREE_KINDS,
    TREE_SPLIT,
    WEIGHT_TOLERANCE,
)

__all__ = [
    "DEFAULT_EPS1",
    "DEFAULT_EPS2",
    "DEFAULT_EPS3",
    "DEFAULT_NORMALIZE",
    "FORBIDDEN_COST",
    "AUCTION_EPS_START_RATIO",
    "AUCTION_EPS_FACTOR",
    "AUCTION_EPS_FINAL_RATIO",
    "AUCTION_MAX_BIDS",
    "SOLVER_EXACT",
    "SOLVER_AUCTION",
    "SOLVERS",
    "TIE_TOLERANCE",
    "TREE_JOIN",
    "TREE_SPLIT",
    "TREE_KINDS",
    "NODE_LEAF",
    "NODE_SADDLE",
    "NODE_ROOT",
    "BARYCENTER_STOP_RATIO",
    "BARYCENTER_MAX_ITERATIONS",
    "KMEANS_MAX_ITERATIONS",
    "PERSISTENCE_EPSILON",
    "WEIGHT_TOLERANCE",
    "SYNTH_SIMPLIFY_THRESHOLD",
    "SWAP_FIELD_SIMPLIFY_THRESHOLD",
    "STABILITY_TOLERANCE",
    "STABILITY_FIT_LIMIT",
]
