"""
BDT preprocessing for the merge tree Wasserstein distance.

Three steps make the metric robust to saddle swaps before comparing trees:
saddle merging (eps1), moving branches up (eps2, eps3) and local
normalization. `prepare` chains them the same way for every consumer
(distances, geodesics, barycenters) so their outputs stay comparable.
"""

import logging
from dataclasses import dataclass, field, replace

from app.common.exceptions import EmptyTree, InvalidParameter, ZeroPersistenceParent
from app.constants import DEFAULT_EPS1, DEFAULT_EPS2, DEFAULT_EPS3, DEFAULT_NORMALIZE
from app.topology.tree import Bdt, Branch, MergeTree, build_bdt, elder_decomposition, reconstruct_merge_tree

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetricParams:
    eps1: float = DEFAULT_EPS1
    eps2: float = DEFAULT_EPS2
    eps3: float = DEFAULT_EPS3
    normalize: bool = DEFAULT_NORMALIZE

    def __post_init__(self) -> None:
        for name in ("eps1", "eps2", "eps3"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidParameter(f"{name} must be in [0, 1], got {value}")

    def label(self) -> str:
        """Name of the metric these parameters produce."""
        return "W^N_2" if self.normalize else "W^T_2"


@dataclass(frozen=True)
class NormalizedBdt:
    """BDT whose non-root branches are expressed relative to their parent interval."""

    bdt: Bdt

    @property
    def root_interval(self) -> tuple[float, float]:
        root = self.bdt.branch(self.bdt.root)
        return root.birth, root.death


@dataclass(frozen=True)
class PreparedBdt:
    """
    A BDT ready for comparison.

    Attributes:
        source: The BDT as given.
        structure: Restructured BDT in raw coordinates, zero-persistence
            subtrees removed.
        coords: Coordinates the metric works with; normalized when the
            parameters ask for it, otherwise `structure` itself.
        dropped: Ids of the zero-persistence branches left out.
    """

    source: Bdt
    structure: Bdt
    coords: Bdt
    params: MetricParams
    dropped: tuple[int, ...] = field(default=())


# ===== SADDLE MERGING =====


def merge_saddles(tree: MergeTree, eps1: float) -> MergeTree:
    """
    Contract arcs between adjacent saddles that are close in scalar value.

    An arc is contracted when its scalar gap, relative to the largest gap
    between adjacent saddles of the tree, is below eps1 (eps1 = 1 contracts
    every such arc). Merged nodes keep the value of their root-most member;
    every leaf keeps the death value of its original persistence pair.
    """
    if not 0.0 <= eps1 <= 1.0:
        raise InvalidParameter(f"eps1 must be in [0, 1], got {eps1}")

    saddles = {node.id for node in tree.nodes if len(tree.children(node.id)) >= 2}
    gaps = {
        (child, parent): abs(tree.node(parent).scalar - tree.node(child).scalar)
        for child, parent in tree.parents.items()
        if child in saddles and parent in saddles
    }
    if eps1 == 0.0 or not gaps:
        return tree

    max_gap = max(gaps.values())
    contracted = {
        child
        for (child, _), gap in gaps.items()
        if eps1 >= 1.0 or (gap / max_gap if max_gap > 0 else 0.0) < eps1
    }
    if not contracted:
        return tree

    _, decomposition = elder_decomposition(tree)
    deaths = {leaf: tree.death_overrides.get(leaf, tree.node(death).scalar) for leaf, death, _ in decomposition}

    def representative(node_id: int) -> int:
        while node_id in contracted:
            node_id = tree.parents[node_id]
        return node_id

    parents = {
        child: representative(parent) for child, parent in tree.parents.items() if child not in contracted
    }
    merged = MergeTree(
        kind=tree.kind,
        nodes=tuple(node for node in tree.nodes if node.id not in contracted),
        parents=parents,
        death_overrides=deaths,
    )
    logger.debug(f"Merged {len(contracted)} saddle arc(s) at eps1={eps1} (max gap {max_gap:.6g})")
    return merged


def merge_bdt_saddles(bdt: Bdt, eps1: float) -> Bdt:
    """Saddle merging expressed on a BDT; branch ids, pairs and back-references are kept."""
    if eps1 == 0.0 or len(bdt) <= 1:
        return bdt

    tree, leaf_of = reconstruct_merge_tree(bdt)
    rebuilt = build_bdt(merge_saddles(tree, eps1))
    branch_of_leaf = {leaf: branch_id for branch_id, leaf in leaf_of.items()}
    original_id = {b.id: branch_of_leaf[b.node] for b in rebuilt.branches}
    parents = {
        original_id[b.id]: None if b.parent is None else original_id[b.parent] for b in rebuilt.branches
    }
    return Bdt(branches=tuple(replace(b, parent=parents[b.id]) for b in bdt.branches), kind=bdt.kind)


# ===== MOVING BRANCHES UP =====


def move_branches_up(bdt: Bdt, eps2: float, eps3: float) -> Bdt:
    """
    Re-parent small branches that are almost as persistent as their parent.

    A branch climbs one level (to its grandparent) while its persistence
    relative to the data range is below eps3 and its persistence relative to
    its current parent exceeds eps2. Moves happen one at a time, sweeping
    branches by decreasing persistence, until none applies.
    """
    for name, value in (("eps2", eps2), ("eps3", eps3)):
        if not 0.0 <= value <= 1.0:
            raise InvalidParameter(f"{name} must be in [0, 1], got {value}")
    if not len(bdt) or eps3 == 0.0:
        return bdt

    data_range = bdt.branch(bdt.root).persistence
    if data_range <= 0:
        return bdt

    parents = {b.id: b.parent for b in bdt.branches}
    order = sorted(
        (b for b in bdt.branches if b.parent is not None),
        key=lambda b: (-b.persistence, b.birth, b.id),
    )

    def should_move(branch: Branch, parent: Branch) -> bool:
        if branch.persistence / data_range >= eps3:
            return False
        if eps2 == 0.0:
            return True
        ratio = branch.persistence / parent.persistence if parent.persistence > 0 else 1.0
        return ratio > eps2

    moves = 0
    changed = True
    while changed:
        changed = False
        for branch in order:
            parent_id = parents[branch.id]
            grandparent_id = parents[parent_id]
            if grandparent_id is None or not should_move(branch, bdt.branch(parent_id)):
                continue
            parents[branch.id] = grandparent_id
            moves += 1
            changed = True

    if moves:
        logger.debug(f"Moved {moves} branch level(s) up (eps2={eps2}, eps3={eps3})")
    return bdt.with_parents(parents)


# ===== LOCAL NORMALIZATION =====


def normalize(bdt: Bdt) -> NormalizedBdt:
    """
    Express every non-root branch relative to its parent's raw interval.

    The root keeps raw coordinates, which makes the mapping invertible.

    Raises:
        ZeroPersistenceParent: A parent with zero persistence has children.
    """
    if not len(bdt):
        raise EmptyTree("Cannot normalize an empty BDT")

    normalized = []
    for branch in bdt.branches:
        if branch.parent is None:
            normalized.append(branch)
            continue
        parent = bdt.branch(branch.parent)
        span = parent.death - parent.birth
        if span <= 0:
            raise ZeroPersistenceParent(f"Branch {branch.id} has parent {parent.id} with zero persistence")
        normalized.append(
            replace(branch, birth=(branch.birth - parent.birth) / span, death=(branch.death - parent.birth) / span)
        )
    return NormalizedBdt(bdt=Bdt(branches=tuple(normalized), kind=bdt.kind))


def denormalize(nbdt: NormalizedBdt) -> Bdt:
    """Inverse of `normalize`, evaluated top-down from the raw root."""
    bdt = nbdt.bdt
    if not len(bdt):
        return bdt

    raw: dict[int, Branch] = {}
    for branch_id in bdt.preorder():
        branch = bdt.branch(branch_id)
        if branch.parent is None:
            raw[branch_id] = branch
            continue
        parent = raw[branch.parent]
        span = parent.death - parent.birth
        # Clamped: rounding can push an endpoint one ulp past the parent's.
        raw[branch_id] = replace(
            branch,
            birth=min(max(parent.birth + branch.birth * span, parent.birth), parent.death),
            death=min(max(parent.birth + branch.death * span, parent.birth), parent.death),
        )
    return Bdt(branches=tuple(raw[b.id] for b in bdt.branches), kind=bdt.kind)


# ===== PIPELINE =====


def drop_zero_persistence(bdt: Bdt) -> tuple[Bdt, tuple[int, ...]]:
    """Remove zero-persistence non-root branches together with their subtrees."""
    dropped: set[int] = set()
    for branch in bdt.branches:
        if branch.parent is not None and branch.persistence <= 0 and branch.id not in dropped:
            dropped.update(bdt.subtree(branch.id))
    if not dropped:
        return bdt, ()
    return bdt.without(dropped), tuple(sorted(dropped))


def prepare(bdt: Bdt, params: MetricParams) -> PreparedBdt:
    """
    Run the preprocessing pipeline on a raw BDT.

    Raises:
        EmptyTree: The BDT has no branch.
        NestingViolation: A child interval leaks out of its parent interval.
    """
    if not len(bdt):
        raise EmptyTree("Cannot compare an empty BDT")
    bdt.validate_nesting()

    structure, dropped = drop_zero_persistence(bdt)
    structure = merge_bdt_saddles(structure, params.eps1)
    structure = move_branches_up(structure, params.eps2, params.eps3)
    coords = normalize(structure).bdt if params.normalize else structure
    return PreparedBdt(source=bdt, structure=structure, coords=coords, params=params, dropped=dropped)
