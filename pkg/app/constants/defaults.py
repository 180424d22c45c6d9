"""
Numeric constants shared across the toolkit.

Tolerances, sentinels and conventions are centralized here so the solvers,
the iterative algorithms and the tests agree on the same values.
"""

# ===== METRIC PARAMETERS =====
DEFAULT_EPS1 = 0.05
DEFAULT_EPS2 = 0.95
DEFAULT_EPS3 = 0.9
DEFAULT_NORMALIZE = True

# ===== ASSIGNMENT =====
# Cost used for forbidden entries of augmented matrices (never selected when
# a feasible assignment exists).
FORBIDDEN_COST = 1e30

# Reduced costs below this fraction of the largest cost count as ties between optima.
TIE_TOLERANCE = 1e-10

# Auction epsilon schedule, relative to the largest finite cost.
AUCTION_EPS_START_RATIO = 0.25
AUCTION_EPS_FACTOR = 4.0
AUCTION_EPS_FINAL_RATIO = 1e-6
AUCTION_MAX_BIDS = 5_000_000

SOLVER_EXACT = "exact"
SOLVER_AUCTION = "auction"
SOLVERS = (SOLVER_EXACT, SOLVER_AUCTION)

# ===== TREES =====
TREE_JOIN = "join"
TREE_SPLIT = "split"
TREE_KINDS = (TREE_JOIN, TREE_SPLIT)

NODE_LEAF = "leaf"
NODE_SADDLE = "saddle"
NODE_ROOT = "root"

# ===== ITERATIVE ALGORITHMS =====
BARYCENTER_STOP_RATIO = 0.01
BARYCENTER_MAX_ITERATIONS = 500
KMEANS_MAX_ITERATIONS = 100
PERSISTENCE_EPSILON = 1e-12
WEIGHT_TOLERANCE = 1e-12

# ===== SYNTHETIC DATA AND STABILITY =====
# Simplification that clears the noise of synthetic ensembles (noise up to 2%).
SYNTH_SIMPLIFY_THRESHOLD = 0.05
# Simplification for noisy copies of the saddle swap field (noise up to 10%).
SWAP_FIELD_SIMPLIFY_THRESHOLD = 0.25
# A stability curve leaves its linear regime once the relative deviation from
# the line fitted on the small amplitudes exceeds this.
STABILITY_TOLERANCE = 0.1
STABILITY_FIT_LIMIT = 0.1
