"""
Balanced assignment solvers and augmentation of partial assignment problems.

A partial assignment between |A| and |B| items, where each item may instead be
sent to the diagonal, is turned into a balanced (|A|+|B|) square problem:

    [ real costs   | deletions  ]
    [ insertions   | 0          ]

Off-diagonal entries of the deletion and insertion blocks are forbidden.
"""

import logging
from collections import deque
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from app.common.exceptions import InvalidParameter, NonConvergence
from app.constants import (
    AUCTION_EPS_FACTOR,
    AUCTION_EPS_FINAL_RATIO,
    AUCTION_EPS_START_RATIO,
    AUCTION_MAX_BIDS,
    FORBIDDEN_COST,
    SOLVER_AUCTION,
    SOLVER_EXACT,
    TIE_TOLERANCE,
)

logger = logging.getLogger(__name__)

TAG_REAL = "real"
TAG_DELETE = "delete"
TAG_INSERT = "insert"
TAG_DIAGONAL = "diagonal"


@dataclass(frozen=True)
class CostMatrix:
    costs: np.ndarray
    rows_real: int
    cols_real: int

    @property
    def size(self) -> int:
        return int(self.costs.shape[0])

    def tag(self, row: int, col: int) -> str:
        """Provenance of an entry: real<->real, real<->diagonal or diagonal<->diagonal."""
        real_row, real_col = row < self.rows_real, col < self.cols_real
        if real_row and real_col:
            return TAG_REAL
        if real_row:
            return TAG_DELETE
        if real_col:
            return TAG_INSERT
        return TAG_DIAGONAL


@dataclass(frozen=True)
class AssignmentResult:
    permutation: tuple[int, ...]
    cost: float

    def pairs(self) -> list[tuple[int, int]]:
        return list(enumerate(self.permutation))


def augment(real_costs: np.ndarray | Sequence, a_diag: Sequence[float], b_diag: Sequence[float]) -> CostMatrix:
    """
    Balance a partial assignment problem with diagonal projections.

    Args:
        real_costs: |A| x |B| matching costs.
        a_diag: Cost of sending each item of A to the diagonal.
        b_diag: Cost of bringing each item of B from the diagonal.

    Returns:
        The (|A|+|B|) square augmented matrix.
    """
    a_costs = np.asarray(a_diag, dtype=float).ravel()
    b_costs = np.asarray(b_diag, dtype=float).ravel()
    m, n = a_costs.size, b_costs.size
    real = np.asarray(real_costs, dtype=float).reshape(m, n)

    for name, block in (("real", real), ("deletion", a_costs), ("insertion", b_costs)):
        if block.size and (not np.all(np.isfinite(block)) or block.min() < 0):
            raise InvalidParameter(f"{name.capitalize()} costs must be finite and non-negative")

    size = m + n
    costs = np.zeros((size, size))
    costs[:m, :n] = real
    costs[:m, n:] = FORBIDDEN_COST
    costs[m:, :n] = FORBIDDEN_COST
    costs[np.arange(m), n + np.arange(m)] = a_costs
    costs[m + np.arange(n), np.arange(n)] = b_costs
    return CostMatrix(costs=costs, rows_real=m, cols_real=n)


def _as_array(costs: CostMatrix | np.ndarray) -> np.ndarray:
    matrix = costs.costs if isinstance(costs, CostMatrix) else np.asarray(costs, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InvalidParameter(f"Assignment needs a square matrix, got shape {matrix.shape}")
    return matrix


def _total(matrix: np.ndarray, permutation: tuple[int, ...]) -> float:
    # Row order summation keeps results identical across call sites.
    total = 0.0
    for row, col in enumerate(permutation):
        total += float(matrix[row, col])
    return total


def _column_potentials(matrix: np.ndarray, columns: np.ndarray) -> np.ndarray:
    """Dual column potentials certifying the optimal assignment `columns` (Bellman-Ford)."""
    size = columns.size
    offsets = matrix - matrix[np.arange(size), columns][:, None]
    potentials = np.zeros(size)
    for _ in range(size):
        relaxed = np.minimum(potentials, (potentials[columns][:, None] + offsets).min(axis=0))
        if np.array_equal(relaxed, potentials):
            break
        potentials = relaxed
    return potentials


def _lexicographic_optimum(matrix: np.ndarray, permutation: tuple[int, ...]) -> tuple[int, ...]:
    """
    Lexicographically smallest optimal permutation.

    Optimal assignments are exactly the perfect matchings on the entries of
    zero reduced cost. Rows are fixed in order; each takes the smallest tight
    column it can reach through an alternating path over the rows after it.
    """
    size = len(permutation)
    columns = np.asarray(permutation)
    potentials = _column_potentials(matrix, columns)
    row_potentials = matrix[np.arange(size), columns] - potentials[columns]
    finite = matrix[np.isfinite(matrix)]
    tolerance = TIE_TOLERANCE * max(1.0, float(np.abs(finite).max()))
    tight = matrix - row_potentials[:, None] - potentials[None, :] <= tolerance

    assigned = list(permutation)
    owner = [0] * size
    for row, col in enumerate(assigned):
        owner[col] = row

    for row in range(size):
        current = assigned[row]
        candidates = [int(c) for c in np.flatnonzero(tight[row, :current]) if owner[c] > row]
        if not candidates:
            continue

        # Rows after `row` that can pass their column on until `current` is freed.
        moves: dict[int, int] = {}
        free = np.zeros(size, dtype=bool)
        free[row + 1 :] = True
        targets = deque([current])
        while targets:
            target = targets.popleft()
            for mover in np.flatnonzero(tight[:, target] & free):
                free[mover] = False
                moves[int(mover)] = target
                targets.append(assigned[mover])

        choice = next((c for c in candidates if owner[c] in moves), None)
        if choice is None:
            continue
        mover = owner[choice]
        while True:
            target = moves[mover]
            displaced = owner[target]
            assigned[mover], owner[target] = target, mover
            if target == current:
                break
            mover = displaced
        assigned[row], owner[choice] = choice, row
    return tuple(assigned)


def solve_exact(costs: CostMatrix | np.ndarray) -> AssignmentResult:
    """
    Globally optimal assignment.

    scipy's shortest augmenting path LSAP finds one optimum; among all optima
    the lexicographically smallest permutation is returned.
    """
    matrix = _as_array(costs)
    if matrix.shape[0] == 0:
        return AssignmentResult(permutation=(), cost=0.0)

    solvable = np.where(matrix >= FORBIDDEN_COST, np.inf, matrix)
    rows, cols = linear_sum_assignment(solvable)
    permutation = tuple(int(c) for _, c in sorted(zip(rows, cols, strict=True)))
    if len(permutation) > 1:
        permutation = _lexicographic_optimum(solvable, permutation)
    return AssignmentResult(permutation=permutation, cost=_total(matrix, permutation))


def default_epsilon_schedule(scale: float) -> list[float]:
    """Epsilon scaling from scale/4 down by a factor 4 to 1e-6 * scale."""
    final = AUCTION_EPS_FINAL_RATIO * scale
    schedule = [AUCTION_EPS_START_RATIO * scale]
    while schedule[-1] / AUCTION_EPS_FACTOR > final:
        schedule.append(schedule[-1] / AUCTION_EPS_FACTOR)
    schedule.append(final)
    return schedule


def solve_auction(
    costs: CostMatrix | np.ndarray,
    epsilon_schedule: Sequence[float] | None = None,
    max_bids: int = AUCTION_MAX_BIDS,
) -> AssignmentResult:
    """
    Forward Gauss-Seidel auction with epsilon scaling.

    Rows bid for columns in ascending row order; prices carry over between
    scaling phases. The final cost lies within n * eps_final of the optimum.

    Raises:
        NonConvergence: More than `max_bids` bids were placed.
    """
    matrix = _as_array(costs)
    n = matrix.shape[0]
    if n == 0:
        return AssignmentResult(permutation=(), cost=0.0)

    allowed = matrix < FORBIDDEN_COST
    finite = matrix[allowed]
    scale = float(finite.max()) if finite.size and finite.max() > 0 else 1.0
    schedule = list(epsilon_schedule) if epsilon_schedule is not None else default_epsilon_schedule(scale)
    if not schedule or min(schedule) <= 0:
        raise InvalidParameter("Auction epsilon schedule must be a non-empty list of positive values")

    benefit = np.where(allowed, -matrix, -np.inf)
    prices = np.zeros(n)
    assigned = np.full(n, -1)
    bids = 0

    for eps in schedule:
        owner = np.full(n, -1)
        assigned[:] = -1
        unassigned = deque(range(n))
        while unassigned:
            row = unassigned.popleft()
            values = benefit[row] - prices
            best = int(np.argmax(values))
            best_value = values[best]
            if not np.isfinite(best_value):
                raise NonConvergence(f"Row {row} has no admissible column")
            values[best] = -np.inf
            second_value = values.max()
            if not np.isfinite(second_value):
                second_value = best_value - scale

            prices[best] += best_value - second_value + eps
            if owner[best] >= 0:
                assigned[owner[best]] = -1
                unassigned.append(int(owner[best]))
            owner[best] = row
            assigned[row] = best

            bids += 1
            if bids > max_bids:
                raise NonConvergence(f"Auction exceeded {max_bids} bids on a {n}x{n} problem")

    permutation = tuple(int(c) for c in assigned)
    logger.debug(f"Auction solved {n}x{n} problem with {bids} bids over {len(schedule)} phase(s)")
    return AssignmentResult(permutation=permutation, cost=_total(matrix, permutation))


def solve(costs: CostMatrix | np.ndarray, solver: str) -> AssignmentResult:
    """Dispatch by solver name."""
    if solver == SOLVER_EXACT:
        return solve_exact(costs)
    if solver == SOLVER_AUCTION:
        return solve_auction(costs)
    raise InvalidParameter(f"Unknown assignment solver '{solver}'")
