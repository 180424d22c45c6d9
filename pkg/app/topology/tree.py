"""Merge trees, persistence pairs and branch decomposition trees (BDTs).

Node ids of a computed merge tree follow the sweep order of the tie-break
comparator, so comparing leaves by (sweep value, id) reproduces simulation of
simplicity without keeping the field around. Reconstructed trees number the
leaves of parent branches before those of their children, which keeps the
Elder rule consistent with the BDT they came from even when values tie.
"""

import logging
from collections import deque
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field, replace

import numpy as np
from networkx.utils import UnionFind

from app.common.exceptions import EmptyTree, InvalidParameter, NestingViolation
from app.constants import NODE_LEAF, NODE_ROOT, NODE_SADDLE, TREE_JOIN, TREE_KINDS, TREE_SPLIT
from app.topology.field import ScalarField

logger = logging.getLogger(__name__)


# ===== MERGE TREES =====


@dataclass(frozen=True)
class TreeNode:
    id: int
    scalar: float
    vertex: int | None = None
    kind: str = NODE_SADDLE


@dataclass(frozen=True, eq=False)
class MergeTree:
    """
    Rooted tree of critical nodes.

    `parents` maps every non-root node id to its parent id. `death_overrides`
    maps a leaf id to the death value of its original persistence pair when
    saddle merging moved the node where it dies.
    """

    kind: str
    nodes: tuple[TreeNode, ...]
    parents: Mapping[int, int]
    death_overrides: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in TREE_KINDS:
            raise InvalidParameter(f"Unknown merge tree kind '{self.kind}'")
        if not self.nodes:
            raise EmptyTree("A merge tree needs at least one node")

        by_id = {node.id: node for node in self.nodes}
        if len(by_id) != len(self.nodes):
            raise InvalidParameter("Duplicate node ids in merge tree")
        for child, parent in self.parents.items():
            if child not in by_id or parent not in by_id:
                raise InvalidParameter(f"Arc ({parent}, {child}) references an unknown node")

        roots = [node.id for node in self.nodes if node.id not in self.parents]
        if len(roots) != 1:
            raise InvalidParameter(f"A merge tree needs exactly one root, found {len(roots)}")

        children: dict[int, list[int]] = {node.id: [] for node in self.nodes}
        for child, parent in sorted(self.parents.items()):
            children[parent].append(child)

        object.__setattr__(self, "_by_id", by_id)
        object.__setattr__(self, "_children", children)
        object.__setattr__(self, "_root", roots[0])

    def node(self, node_id: int) -> TreeNode:
        return self._by_id[node_id]

    @property
    def root(self) -> int:
        return self._root

    def children(self, node_id: int) -> list[int]:
        return self._children[node_id]

    def leaves(self) -> list[int]:
        return [node.id for node in self.nodes if not self._children[node.id]]

    def sweep_key(self, node_id: int) -> tuple[float, int]:
        """Smaller keys are swept first (older components)."""
        scalar = self._by_id[node_id].scalar
        return (scalar if self.kind == TREE_JOIN else -scalar, node_id)

    def postorder(self) -> Iterator[int]:
        stack = [(self._root, False)]
        while stack:
            node_id, expanded = stack.pop()
            if expanded:
                yield node_id
                continue
            stack.append((node_id, True))
            stack.extend((child, False) for child in reversed(self._children[node_id]))

    def data_range(self) -> float:
        scalars = [node.scalar for node in self.nodes]
        return max(scalars) - min(scalars)


@dataclass(frozen=True)
class PersistencePair:
    birth: float
    death: float
    birth_node: int
    death_node: int

    @property
    def persistence(self) -> float:
        return self.death - self.birth


@dataclass(frozen=True)
class Diagram:
    pairs: tuple[PersistencePair, ...]
    kind: str = TREE_JOIN

    def points(self) -> np.ndarray:
        return np.array([(p.birth, p.death) for p in self.pairs], dtype=float).reshape(-1, 2)


# ===== BRANCH DECOMPOSITION TREES =====


@dataclass(frozen=True)
class Branch:
    id: int
    birth: float
    death: float
    parent: int | None = None
    node: int | None = None

    @property
    def persistence(self) -> float:
        return self.death - self.birth


@dataclass(frozen=True, eq=False)
class Bdt:
    """
    Branch decomposition tree: one node per persistence pair.

    Branches are stored with birth <= death whatever the tree kind; `kind`
    only matters when turning the BDT back into a merge tree.
    """

    branches: tuple[Branch, ...]
    kind: str = TREE_JOIN

    def __post_init__(self) -> None:
        by_id = {branch.id: branch for branch in self.branches}
        if len(by_id) != len(self.branches):
            raise InvalidParameter("Duplicate branch ids in BDT")
        roots = [b.id for b in self.branches if b.parent is None]
        if self.branches and len(roots) != 1:
            raise InvalidParameter(f"A BDT needs exactly one root branch, found {len(roots)}")

        children: dict[int, list[int]] = {b.id: [] for b in self.branches}
        for branch in self.branches:
            if branch.parent is not None:
                if branch.parent not in by_id:
                    raise InvalidParameter(f"Branch {branch.id} has unknown parent {branch.parent}")
                children[branch.parent].append(branch.id)

        object.__setattr__(self, "_by_id", by_id)
        object.__setattr__(self, "_children", children)
        object.__setattr__(self, "_root", roots[0] if roots else None)

        reached = sum(1 for _ in self.preorder()) if self.branches else 0
        if reached != len(self.branches):
            raise InvalidParameter("BDT parent links contain a cycle")

    def __len__(self) -> int:
        return len(self.branches)

    def __contains__(self, branch_id: object) -> bool:
        return branch_id in self._by_id

    def branch(self, branch_id: int) -> Branch:
        return self._by_id[branch_id]

    @property
    def root(self) -> int:
        if self._root is None:
            raise EmptyTree("The BDT has no branches")
        return self._root

    def children(self, branch_id: int) -> list[int]:
        return self._children[branch_id]

    def preorder(self) -> Iterator[int]:
        """Parents before children, children in storage order."""
        queue = deque([self.root])
        while queue:
            branch_id = queue.popleft()
            yield branch_id
            queue.extend(self._children[branch_id])

    def depths(self) -> dict[int, int]:
        depth = {self.root: 0}
        for branch_id in self.preorder():
            for child in self._children[branch_id]:
                depth[child] = depth[branch_id] + 1
        return depth

    def subtree(self, branch_id: int) -> list[int]:
        result, stack = [], [branch_id]
        while stack:
            current = stack.pop()
            result.append(current)
            stack.extend(self._children[current])
        return result

    def nesting_violations(self) -> list[tuple[int, int]]:
        """(parent, child) pairs whose child interval leaks out of the parent interval."""
        violations = []
        for branch in self.branches:
            if branch.parent is None:
                continue
            parent = self._by_id[branch.parent]
            if branch.birth < parent.birth or branch.death > parent.death:
                violations.append((parent.id, branch.id))
        return violations

    def validate_nesting(self) -> None:
        violations = self.nesting_violations()
        if violations:
            parent_id, child_id = violations[0]
            parent, child = self._by_id[parent_id], self._by_id[child_id]
            raise NestingViolation(
                f"Branch {child_id} ({child.birth}, {child.death}) is not nested in "
                f"branch {parent_id} ({parent.birth}, {parent.death}); {len(violations)} violation(s)"
            )

    def canonical(self, branch_id: int | None = None) -> tuple:
        """Id-free structural signature: ((birth, death), sorted child signatures)."""
        branch_id = self.root if branch_id is None else branch_id
        branch = self._by_id[branch_id]
        return (
            (branch.birth, branch.death),
            tuple(sorted(self.canonical(child) for child in self._children[branch_id])),
        )

    def pairs(self) -> list[tuple[float, float]]:
        return sorted((b.birth, b.death) for b in self.branches)

    def with_parents(self, parents: Mapping[int, int | None]) -> "Bdt":
        """Copy with some parent links rewritten."""
        return Bdt(
            branches=tuple(replace(b, parent=parents.get(b.id, b.parent)) for b in self.branches),
            kind=self.kind,
        )

    def without(self, removed: set[int]) -> "Bdt":
        return Bdt(branches=tuple(b for b in self.branches if b.id not in removed), kind=self.kind)


# ===== MERGE TREE COMPUTATION =====


def compute_merge_tree(scalar_field: ScalarField, kind: str = TREE_SPLIT) -> MergeTree:
    """
    Union-find sweep over the vertices in tie-break order.

    Join trees track sub-level sets (sweep by increasing value), split trees
    super-level sets (sweep by decreasing value).
    """
    if kind not in TREE_KINDS:
        raise InvalidParameter(f"Unknown merge tree kind '{kind}'")

    order = scalar_field.sweep_order(descending=kind == TREE_SPLIT)
    values = scalar_field.values
    processed = np.zeros(scalar_field.vertex_count, dtype=bool)
    components = UnionFind()
    top: dict[int, int] = {}
    nodes: list[TreeNode] = []
    parents: dict[int, int] = {}
    last_node_vertex = -1

    def add_node(vertex: int, node_kind: str) -> int:
        node_id = len(nodes)
        nodes.append(TreeNode(id=node_id, scalar=float(values[vertex]), vertex=int(vertex), kind=node_kind))
        return node_id

    for vertex in order:
        vertex = int(vertex)
        reps = sorted({components[u] for u in scalar_field.neighbors(vertex) if processed[u]})
        processed[vertex] = True

        if not reps:
            top[components[vertex]] = add_node(vertex, NODE_LEAF)
            last_node_vertex = vertex
        elif len(reps) == 1:
            current_top = top[reps[0]]
            components.union(reps[0], vertex)
            top[components[vertex]] = current_top
        else:
            saddle = add_node(vertex, NODE_SADDLE)
            for rep in reps:
                parents[top[rep]] = saddle
            components.union(vertex, *reps)
            top[components[vertex]] = saddle
            last_node_vertex = vertex

    last_vertex = int(order[-1])
    if last_node_vertex == last_vertex and nodes[-1].kind == NODE_SADDLE:
        nodes[-1] = replace(nodes[-1], kind=NODE_ROOT)
    else:
        root = add_node(last_vertex, NODE_ROOT)
        parents[top[components[last_vertex]]] = root

    tree = MergeTree(kind=kind, nodes=tuple(nodes), parents=parents)
    logger.debug(f"Computed {kind} tree: {len(nodes)} nodes, {len(tree.leaves())} leaves")
    return tree


# ===== ELDER RULE AND BRANCH DECOMPOSITION =====


def elder_decomposition(tree: MergeTree) -> tuple[dict[int, int], list[tuple[int, int, int | None]]]:
    """
    Elder rule over the tree structure.

    Returns the elder leaf of every node's subtree and the branches as
    (leaf, death node, parent branch leaf) triples, root branch last.
    """
    elder: dict[int, int] = {}
    branches: list[tuple[int, int, int | None]] = []
    for node_id in tree.postorder():
        kids = tree.children(node_id)
        if not kids:
            elder[node_id] = node_id
            continue
        elder[node_id] = min((elder[c] for c in kids), key=tree.sweep_key)
        branches.extend((elder[c], node_id, elder[node_id]) for c in kids if elder[c] != elder[node_id])
    branches.append((elder[tree.root], tree.root, None))
    return elder, branches


def _pair(tree: MergeTree, leaf: int, death_node: int) -> PersistencePair:
    leaf_value = tree.node(leaf).scalar
    death_value = tree.death_overrides.get(leaf, tree.node(death_node).scalar)
    return PersistencePair(
        birth=min(leaf_value, death_value),
        death=max(leaf_value, death_value),
        birth_node=leaf,
        death_node=death_node,
    )


def elder_pairs(tree: MergeTree) -> Diagram:
    """One persistence pair per leaf; the global extremum pairs with the root."""
    _, branches = elder_decomposition(tree)
    pairs = tuple(_pair(tree, leaf, death) for leaf, death, _ in branches)
    return Diagram(pairs=pairs, kind=tree.kind)


def build_bdt(tree: MergeTree) -> Bdt:
    """
    Persistence-driven branch decomposition tree.

    Branch ids are assigned breadth-first from the root branch, siblings by
    decreasing persistence, then birth, then leaf id.
    """
    _, decomposition = elder_decomposition(tree)
    pairs = {leaf: _pair(tree, leaf, death) for leaf, death, _ in decomposition}
    parent_leaf = {leaf: parent for leaf, _, parent in decomposition}

    child_leaves: dict[int, list[int]] = {leaf: [] for leaf in pairs}
    root_leaf = None
    for leaf, parent in parent_leaf.items():
        if parent is None:
            root_leaf = leaf
        else:
            child_leaves[parent].append(leaf)

    def order_key(leaf: int) -> tuple[float, float, int]:
        return (-pairs[leaf].persistence, pairs[leaf].birth, leaf)

    ids: dict[int, int] = {}
    ordered: list[int] = []
    queue = deque([root_leaf])
    while queue:
        leaf = queue.popleft()
        ids[leaf] = len(ordered)
        ordered.append(leaf)
        queue.extend(sorted(child_leaves[leaf], key=order_key))

    branches = tuple(
        Branch(
            id=ids[leaf],
            birth=pairs[leaf].birth,
            death=pairs[leaf].death,
            parent=None if parent_leaf[leaf] is None else ids[parent_leaf[leaf]],
            node=leaf,
        )
        for leaf in ordered
    )
    return Bdt(branches=branches, kind=tree.kind)


# ===== SIMPLIFICATION =====


def simplify(tree: MergeTree, threshold: float) -> MergeTree:
    """
    Remove every pair whose persistence is below threshold * data range.

    Nodes owned by a pruned branch disappear with it; saddles left with a
    single child are spliced out. The global pair is never removed.
    """
    if not 0.0 <= threshold <= 1.0:
        raise InvalidParameter(f"Simplification threshold must be in [0, 1], got {threshold}")

    cutoff = threshold * tree.data_range()
    elder, decomposition = elder_decomposition(tree)
    pruned = {
        leaf
        for leaf, death, parent in decomposition
        if parent is not None and _pair(tree, leaf, death).persistence < cutoff
    }
    if not pruned:
        return tree

    kept = {node.id for node in tree.nodes if elder[node.id] not in pruned}
    parents = {child: parent for child, parent in tree.parents.items() if child in kept}

    remaining_children: dict[int, list[int]] = {node_id: [] for node_id in kept}
    for child, parent in parents.items():
        remaining_children[parent].append(child)

    for node_id in sorted(kept):
        if node_id == tree.root or len(remaining_children[node_id]) != 1:
            continue
        (only_child,) = remaining_children[node_id]
        parent = parents.pop(node_id)
        parents[only_child] = parent
        remaining_children[parent] = [only_child if c == node_id else c for c in remaining_children[parent]]
        kept.discard(node_id)

    simplified = MergeTree(
        kind=tree.kind,
        nodes=tuple(node for node in tree.nodes if node.id in kept),
        parents=parents,
        death_overrides={leaf: value for leaf, value in tree.death_overrides.items() if leaf in kept},
    )
    logger.debug(f"Simplified {tree.kind} tree at {threshold}: pruned {len(pruned)} pair(s)")
    return simplified


# ===== RECONSTRUCTION =====


def reconstruct_merge_tree(bdt: Bdt) -> tuple[MergeTree, dict[int, int]]:
    """
    Merge tree whose branch decomposition is `bdt`, plus the leaf node id of
    every branch.
    """
    bdt.validate_nesting()
    split = bdt.kind == TREE_SPLIT

    def leaf_value(branch: Branch) -> float:
        return branch.death if split else branch.birth

    def end_value(branch: Branch) -> float:
        return branch.birth if split else branch.death

    order = list(bdt.preorder())
    nodes: list[TreeNode] = []
    parents: dict[int, int] = {}
    leaf_of: dict[int, int] = {}

    for branch_id in order:
        leaf_of[branch_id] = len(nodes)
        nodes.append(TreeNode(id=len(nodes), scalar=leaf_value(bdt.branch(branch_id)), kind=NODE_LEAF))

    # Saddles of a branch segment, one per distinct child end value, in sweep order.
    saddle_at: dict[tuple[int, float], int] = {}
    top_of: dict[int, int] = {}
    for branch_id in order:
        branch = bdt.branch(branch_id)
        ends = sorted({end_value(bdt.branch(c)) for c in bdt.children(branch_id)}, reverse=split)
        below = leaf_of[branch_id]
        for value in ends:
            saddle = len(nodes)
            nodes.append(TreeNode(id=saddle, scalar=value, kind=NODE_SADDLE))
            saddle_at[(branch_id, value)] = saddle
            parents[below] = saddle
            below = saddle
        if branch.parent is None:
            root = len(nodes)
            nodes.append(TreeNode(id=root, scalar=end_value(branch), kind=NODE_ROOT))
            parents[below] = root
        else:
            top_of[branch_id] = below

    for branch_id, top in top_of.items():
        branch = bdt.branch(branch_id)
        parents[top] = saddle_at[(branch.parent, end_value(branch))]

    tree = MergeTree(kind=bdt.kind, nodes=tuple(nodes), parents=parents)
    return tree, leaf_of


def bdt_to_merge_tree(bdt: Bdt) -> MergeTree:
    """Create a vertical branch per BDT node and glue them along the BDT arcs."""
    tree, _ = reconstruct_merge_tree(bdt)
    return tree


def field_to_bdt(scalar_field: ScalarField, kind: str = TREE_SPLIT, threshold: float = 0.0) -> Bdt:
    """Merge tree of a field, simplified at `threshold`, as a BDT."""
    return build_bdt(simplify(compute_merge_tree(scalar_field, kind), threshold))
