"""
Wasserstein distances between persistence diagrams and between BDTs.

The BDT distance is the optimal rooted, depth-preserving partial isomorphism:

    T2(b, c) = gamma2(b, c) + F2(children(b), children(c))
    F2       = augmented assignment between the two child forests
    E2(b)    = gamma2(b, diagonal) + sum of E2 over the children of b

where every term is squared and the square root is taken only at the end.
Only branch pairs of equal depth are ever compared.
"""

import logging
import threading
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from app.common.exceptions import InvalidParameter
from app.constants import SOLVER_EXACT
from app.topology.assignment import augment, solve, solve_exact
from app.topology.preprocess import MetricParams, PreparedBdt, prepare
from app.topology.tree import Bdt, Branch, Diagram

logger = logging.getLogger(__name__)

PointSet = Diagram | Sequence[tuple[float, float]] | np.ndarray


# ===== EDIT COSTS =====


def match_cost2(b: Branch, c: Branch) -> float:
    """Squared L2 distance between two branches in the birth/death plane."""
    return (b.birth - c.birth) ** 2 + (b.death - c.death) ** 2


def delete_cost2(b: Branch) -> float:
    """Squared distance from a branch to its diagonal projection."""
    return 0.5 * (b.death - b.birth) ** 2


# ===== PERSISTENCE DIAGRAMS =====


@dataclass(frozen=True)
class DiagramMatching:
    matched: tuple[tuple[int, int], ...]
    deleted: tuple[int, ...]
    inserted: tuple[int, ...]


def diagram_points(diagram: PointSet) -> np.ndarray:
    if isinstance(diagram, Diagram):
        return diagram.points()
    return np.asarray(diagram, dtype=float).reshape(-1, 2)


def diagram_distance(d_i: PointSet, d_j: PointSet, q: float = 2.0) -> tuple[float, DiagramMatching]:
    """
    Wasserstein distance W^D_q between two persistence diagrams.

    Points may be matched to each other or to their diagonal projection
    ((x + y) / 2, (x + y) / 2); the ground distance is the L_q norm.

    Args:
        d_i: First diagram (Diagram or (birth, death) points).
        d_j: Second diagram.
        q: Exponent, at least 1.

    Returns:
        The distance and the optimal pointwise matching.
    """
    if q < 1:
        raise InvalidParameter(f"Wasserstein exponent must be >= 1, got {q}")

    p_i, p_j = diagram_points(d_i), diagram_points(d_j)
    m, n = len(p_i), len(p_j)
    real = (np.abs(p_i[:, None, :] - p_j[None, :, :]) ** q).sum(axis=2)
    to_diag_i = 2.0 * (np.abs(p_i[:, 1] - p_i[:, 0]) / 2.0) ** q
    to_diag_j = 2.0 * (np.abs(p_j[:, 1] - p_j[:, 0]) / 2.0) ** q

    result = solve_exact(augment(real, to_diag_i, to_diag_j))
    matched = tuple((r, c) for r, c in result.pairs() if r < m and c < n)
    deleted = tuple(r for r, c in result.pairs() if r < m and c >= n)
    inserted = tuple(c for r, c in result.pairs() if r >= m and c < n)
    return result.cost ** (1.0 / q), DiagramMatching(matched=matched, deleted=deleted, inserted=inserted)


# ===== TREE MATCHINGS =====


@dataclass(frozen=True)
class TreeMatching:
    """
    Rooted partial isomorphism between two BDTs.

    Branch ids refer to the BDTs given to the distance. Destroyed branches of
    the first tree and created branches of the second come as whole subtrees.
    """

    distance: float
    matched: tuple[tuple[int, int], ...]
    destroyed: tuple[int, ...] = ()
    created: tuple[int, ...] = ()
    metric: str = "W^N_2"

    def forward(self) -> dict[int, int]:
        return dict(self.matched)

    def backward(self) -> dict[int, int]:
        return {j: i for i, j in self.matched}


@dataclass
class DistanceTables:
    """
    Squared subtree (T2) and forest (F2) distances between two BDTs.

    Rows and columns follow `rows` and `cols` (branch ids); cells of pairs at
    different depths stay at +inf.
    """

    rows: tuple[int, ...]
    cols: tuple[int, ...]
    tree2: np.ndarray
    forest2: np.ndarray
    empty2_i: dict[int, float]
    empty2_j: dict[int, float]
    forest_matches: dict[tuple[int, int], tuple[tuple[int, int], ...]] = field(default_factory=dict)

    def tree_distance(self, b_i: int, b_j: int) -> float:
        return float(np.sqrt(self.tree2[self.rows.index(b_i), self.cols.index(b_j)]))


def subtree_empty_distances(bdt: Bdt) -> dict[int, float]:
    """Squared cost of destroying the subtree of every branch."""
    order = list(bdt.preorder())
    squared: dict[int, float] = {}
    for branch_id in reversed(order):
        total = delete_cost2(bdt.branch(branch_id))
        for child in sorted(bdt.children(branch_id)):
            total += squared[child]
        squared[branch_id] = total
    return squared


def subtree_empty_distance(bdt: Bdt, branch_id: int) -> float:
    """Distance between the subtree rooted at `branch_id` and the empty tree."""
    if branch_id not in bdt:
        raise InvalidParameter(f"Branch {branch_id} is not in the BDT")
    return float(np.sqrt(subtree_empty_distances(bdt)[branch_id]))


class _TableFiller:
    """Fills the distance tables of two coordinate BDTs cell by cell."""

    def __init__(self, bdt_i: Bdt, bdt_j: Bdt, solver: str) -> None:
        self.bdt_i, self.bdt_j, self.solver = bdt_i, bdt_j, solver
        self.depth_i, self.depth_j = bdt_i.depths(), bdt_j.depths()
        rows = tuple(sorted(b.id for b in bdt_i.branches))
        cols = tuple(sorted(b.id for b in bdt_j.branches))
        self.row_of = {b: k for k, b in enumerate(rows)}
        self.col_of = {b: k for k, b in enumerate(cols)}
        self.children_i = {b: sorted(bdt_i.children(b)) for b in rows}
        self.children_j = {b: sorted(bdt_j.children(b)) for b in cols}
        self.tables = DistanceTables(
            rows=rows,
            cols=cols,
            tree2=np.full((len(rows), len(cols)), np.inf),
            forest2=np.full((len(rows), len(cols)), np.inf),
            empty2_i=subtree_empty_distances(bdt_i),
            empty2_j=subtree_empty_distances(bdt_j),
        )

    def pairs(self) -> list[tuple[int, int]]:
        """Equal-depth pairs, deepest first, then by branch ids."""
        by_depth_j: dict[int, list[int]] = {}
        for b, depth in self.depth_j.items():
            by_depth_j.setdefault(depth, []).append(b)
        pairs = [
            (b_i, b_j)
            for b_i, depth in self.depth_i.items()
            for b_j in by_depth_j.get(depth, ())
        ]
        return sorted(pairs, key=lambda p: (-self.depth_i[p[0]], p[0], p[1]))

    def fill(self, b_i: int, b_j: int) -> None:
        tables = self.tables
        kids_i, kids_j = self.children_i[b_i], self.children_j[b_j]
        matches: tuple[tuple[int, int], ...] = ()

        if kids_i and kids_j:
            real = np.array(
                [[tables.tree2[self.row_of[c_i], self.col_of[c_j]] for c_j in kids_j] for c_i in kids_i]
            )
            result = solve(
                augment(real, [tables.empty2_i[c] for c in kids_i], [tables.empty2_j[c] for c in kids_j]),
                self.solver,
            )
            forest2 = result.cost
            matches = tuple(
                (kids_i[r], kids_j[c]) for r, c in result.pairs() if r < len(kids_i) and c < len(kids_j)
            )
        else:
            forest2 = 0.0
            for c_i in kids_i:
                forest2 += tables.empty2_i[c_i]
            for c_j in kids_j:
                forest2 += tables.empty2_j[c_j]

        row, col = self.row_of[b_i], self.col_of[b_j]
        tables.forest2[row, col] = forest2
        tables.tree2[row, col] = match_cost2(self.bdt_i.branch(b_i), self.bdt_j.branch(b_j)) + forest2
        tables.forest_matches[(b_i, b_j)] = matches

    def fill_sequential(self) -> DistanceTables:
        for b_i, b_j in self.pairs():
            self.fill(b_i, b_j)
        return self.tables

    def fill_parallel(self, thread_count: int) -> DistanceTables:
        """
        Task-parallel filling driven by per-cell dependency counters.

        Each task fills one cell, then decrements the counter of the parent
        pair; the task bringing it to zero fills the parent itself.
        """
        pending = {(b_i, b_j): len(self.children_i[b_i]) * len(self.children_j[b_j]) for b_i, b_j in self.pairs()}
        lock = threading.Lock()
        seeds = [pair for pair, count in pending.items() if count == 0]

        def run(pair: tuple[int, int]) -> None:
            while pair is not None:
                self.fill(*pair)
                parent = (self.bdt_i.branch(pair[0]).parent, self.bdt_j.branch(pair[1]).parent)
                if parent[0] is None or parent[1] is None:
                    return
                with lock:
                    pending[parent] -= 1
                    ready = pending[parent] == 0
                pair = parent if ready else None

        with ThreadPoolExecutor(max_workers=thread_count) as executor:
            futures = [executor.submit(run, pair) for pair in seeds]
            for future in futures:
                future.result()
        return self.tables


def _backtrack(tables: DistanceTables, bdt_i: Bdt, bdt_j: Bdt) -> tuple[list, list, list]:
    matched, destroyed, created = [], [], []
    stack = [(bdt_i.root, bdt_j.root)]
    while stack:
        b_i, b_j = stack.pop()
        matched.append((b_i, b_j))
        pairs = tables.forest_matches[(b_i, b_j)]
        stack.extend(pairs)
        kept_i = {p[0] for p in pairs}
        kept_j = {p[1] for p in pairs}
        for child in bdt_i.children(b_i):
            if child not in kept_i:
                destroyed.extend(bdt_i.subtree(child))
        for child in bdt_j.children(b_j):
            if child not in kept_j:
                created.extend(bdt_j.subtree(child))
    return matched, destroyed, created


def compare(
    coords_i: Bdt,
    coords_j: Bdt,
    solver: str = SOLVER_EXACT,
    thread_count: int = 1,
    metric: str = "W^N_2",
) -> tuple[TreeMatching, DistanceTables]:
    """
    Distance between two BDTs already in a shared coordinate system.

    No preprocessing happens here; the roots are always matched.
    """
    filler = _TableFiller(coords_i, coords_j, solver)
    tables = filler.fill_parallel(thread_count) if thread_count > 1 else filler.fill_sequential()

    matched, destroyed, created = _backtrack(tables, coords_i, coords_j)
    squared = tables.tree2[filler.row_of[coords_i.root], filler.col_of[coords_j.root]]
    matching = TreeMatching(
        distance=float(np.sqrt(squared)),
        matched=tuple(sorted(matched)),
        destroyed=tuple(sorted(destroyed)),
        created=tuple(sorted(created)),
        metric=metric,
    )
    return matching, tables


def match_prepared(
    prep_i: PreparedBdt,
    prep_j: PreparedBdt,
    solver: str = SOLVER_EXACT,
    thread_count: int = 1,
) -> TreeMatching:
    """Distance between two prepared BDTs, reported with the ids of the raw inputs."""
    matching, _ = compare(prep_i.coords, prep_j.coords, solver, thread_count, metric=prep_i.params.label())
    return replace(
        matching,
        destroyed=tuple(sorted(matching.destroyed + prep_i.dropped)),
        created=tuple(sorted(matching.created + prep_j.dropped)),
    )


def mt_distance(
    bdt_i: Bdt,
    bdt_j: Bdt,
    params: MetricParams | None = None,
    solver: str = SOLVER_EXACT,
) -> TreeMatching:
    """
    Merge tree Wasserstein distance with its optimal matching.

    Both BDTs go through saddle merging (eps1), branch moving (eps2, eps3)
    and, when requested, local normalization before being compared.

    Args:
        bdt_i: First raw BDT.
        bdt_j: Second raw BDT.
        params: Preprocessing parameters, defaults when omitted.
        solver: "exact" or "auction" for the forest assignment problems.

    Returns:
        The matching, whose `distance` is W^T_2 (raw) or W^N_2 (normalized).
    """
    params = params or MetricParams()
    return match_prepared(prepare(bdt_i, params), prepare(bdt_j, params), solver)


def mt_distance_parallel(
    bdt_i: Bdt,
    bdt_j: Bdt,
    params: MetricParams | None = None,
    solver: str = SOLVER_EXACT,
    thread_count: int = 1,
) -> TreeMatching:
    """Same result as `mt_distance`, with the table cells filled by a task pool."""
    if thread_count < 1:
        raise InvalidParameter(f"Thread count must be >= 1, got {thread_count}")
    params = params or MetricParams()
    return match_prepared(prepare(bdt_i, params), prepare(bdt_j, params), solver, thread_count)


def distance_matrix(
    ensemble: Sequence[Bdt],
    params: MetricParams | None = None,
    solver: str = SOLVER_EXACT,
    thread_count: int = 1,
) -> np.ndarray:
    """Symmetric matrix of pairwise distances, one task per pair."""
    params = params or MetricParams()
    prepared = [prepare(bdt, params) for bdt in ensemble]
    size = len(prepared)
    matrix = np.zeros((size, size))
    pairs = [(i, j) for i in range(size) for j in range(i + 1, size)]

    def entry(pair: tuple[int, int]) -> float:
        return match_prepared(prepared[pair[0]], prepared[pair[1]], solver).distance

    if thread_count > 1:
        with ThreadPoolExecutor(max_workers=thread_count) as executor:
            values = list(executor.map(entry, pairs))
    else:
        values = [entry(pair) for pair in pairs]

    for (i, j), value in zip(pairs, values, strict=True):
        matrix[i, j] = matrix[j, i] = value
    logger.debug(f"Computed {size}x{size} distance matrix ({len(pairs)} pairs)")
    return matrix
