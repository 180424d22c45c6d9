import numpy as np
import pytest

from app.common.exceptions import EmptyTree, InvalidParameter, NestingViolation
from app.constants import NODE_LEAF, NODE_ROOT, NODE_SADDLE, TREE_JOIN, TREE_SPLIT
from app.topology.field import ScalarField
from app.topology.tree import (
    Bdt,
    Branch,
    MergeTree,
    TreeNode,
    bdt_to_merge_tree,
    build_bdt,
    compute_merge_tree,
    elder_pairs,
    field_to_bdt,
    reconstruct_merge_tree,
    simplify,
)
from tests.factories import make_bdt, random_bdt


def component_pairs(scalar_field: ScalarField, kind: str) -> set[tuple[int, int]]:
    """
    (leaf vertex, death vertex) pairs by recomputing connected components from scratch.

    Each prefix of the sweep is flood-filled; a vertex joining several
    components kills all of them but the one whose first vertex was swept first.
    """
    order = [int(v) for v in scalar_field.sweep_order(descending=kind == TREE_SPLIT)]
    position = {v: k for k, v in enumerate(order)}
    pairs = set()
    for step, vertex in enumerate(order):
        remaining, oldest = set(order[:step]), {}
        while remaining:
            start = remaining.pop()
            component, stack = [start], [start]
            while stack:
                for neighbor in scalar_field.neighbors(stack.pop()):
                    if neighbor in remaining:
                        remaining.remove(neighbor)
                        component.append(neighbor)
                        stack.append(neighbor)
            first = min(component, key=position.__getitem__)
            oldest.update((v, first) for v in component)
        joined = {oldest[n] for n in scalar_field.neighbors(vertex) if n in oldest}
        if len(joined) > 1:
            survivor = min(joined, key=position.__getitem__)
            pairs.update((leaf, vertex) for leaf in joined if leaf != survivor)
    pairs.add((order[0], order[-1]))
    return pairs


class TestComputeMergeTree:
    def test_monotone_grid_has_a_single_arc(self):
        field = ScalarField(dims=(2, 2), values=np.array([0.0, 1.0, 2.0, 3.0]))
        tree = compute_merge_tree(field, TREE_SPLIT)
        assert len(tree.nodes) == 2
        assert tree.leaves() == [0]
        assert tree.node(tree.root).scalar == 0.0
        assert [(p.birth, p.death) for p in elder_pairs(tree).pairs] == [(0.0, 3.0)]

    def test_split_tree_of_a_ramp(self, ramp_field):
        tree = compute_merge_tree(ramp_field, TREE_SPLIT)
        assert [n.scalar for n in tree.nodes] == [4.0, 3.0, 1.0, 0.0]
        assert [n.kind for n in tree.nodes] == [NODE_LEAF, NODE_LEAF, NODE_SADDLE, NODE_ROOT]
        assert dict(tree.parents) == {0: 2, 1: 2, 2: 3}
        assert [(p.birth, p.death) for p in elder_pairs(tree).pairs] == [(1.0, 3.0), (0.0, 4.0)]

    def test_join_tree_of_a_ramp_ends_on_a_saddle_root(self, ramp_field):
        tree = compute_merge_tree(ramp_field, TREE_JOIN)
        root = tree.node(tree.root)
        assert root.kind == NODE_ROOT
        assert root.scalar == 4.0
        assert sorted((p.birth, p.death) for p in elder_pairs(tree).pairs) == [(0.0, 4.0), (1.0, 3.0), (2.0, 4.0)]

    def test_one_pair_per_leaf(self, two_bump_field):
        tree = compute_merge_tree(two_bump_field, TREE_SPLIT)
        assert len(elder_pairs(tree).pairs) == len(tree.leaves())

    def test_join_and_split_trees_are_dual(self, rng):
        values = rng.random(36)
        join = compute_merge_tree(ScalarField(dims=(6, 6), values=values), TREE_JOIN)
        split = compute_merge_tree(ScalarField(dims=(6, 6), values=-values), TREE_SPLIT)
        join_pairs = sorted((p.birth, p.death) for p in elder_pairs(join).pairs)
        split_pairs = sorted((-p.death, -p.birth) for p in elder_pairs(split).pairs)
        assert join_pairs == split_pairs

    def test_two_bumps_give_two_persistent_maxima(self, two_bump_field):
        tree = simplify(compute_merge_tree(two_bump_field, TREE_SPLIT), 0.05)
        diagram = elder_pairs(tree)
        assert len(diagram.pairs) == 2
        deaths = sorted(p.death for p in diagram.pairs)
        assert deaths[1] == pytest.approx(1.0, abs=1e-2)
        assert deaths[0] == pytest.approx(0.6, abs=1e-2)

    @pytest.mark.parametrize("kind", [TREE_JOIN, TREE_SPLIT])
    @pytest.mark.parametrize("dims", [(16,), (5, 6), (3, 3, 4)], ids=["1d", "2d", "3d"])
    def test_pairs_match_a_flood_fill_of_every_sweep_prefix(self, rng, kind, dims):
        for _ in range(15):
            # Few distinct values, so most vertices tie with others.
            values = rng.integers(0, 5, size=int(np.prod(dims))).astype(float)
            field = ScalarField(dims=dims, values=values)
            tree = compute_merge_tree(field, kind)
            found = {(tree.node(p.birth_node).vertex, tree.node(p.death_node).vertex) for p in elder_pairs(tree).pairs}
            assert found == component_pairs(field, kind)
            assert len(tree.leaves()) == len(found)

    def test_unknown_kind(self, ramp_field):
        with pytest.raises(InvalidParameter):
            compute_merge_tree(ramp_field, "contour")


class TestMergeTreeValidation:
    def test_needs_a_single_root(self):
        nodes = (TreeNode(0, 0.0), TreeNode(1, 1.0), TreeNode(2, 2.0))
        with pytest.raises(InvalidParameter):
            MergeTree(kind=TREE_JOIN, nodes=nodes, parents={0: 2})

    def test_arcs_reference_known_nodes(self):
        with pytest.raises(InvalidParameter):
            MergeTree(kind=TREE_JOIN, nodes=(TreeNode(0, 0.0),), parents={0: 7})

    def test_needs_nodes(self):
        with pytest.raises(EmptyTree):
            MergeTree(kind=TREE_JOIN, nodes=(), parents={})


class TestBdt:
    def test_structure_queries(self):
        bdt = make_bdt([(0, 10, None), (1, 6, 0), (2, 4, 1), (7, 9, 0)])
        assert bdt.root == 0
        assert list(bdt.preorder()) == [0, 1, 3, 2]
        assert bdt.depths() == {0: 0, 1: 1, 3: 1, 2: 2}
        assert sorted(bdt.subtree(1)) == [1, 2]
        assert 3 in bdt
        assert 9 not in bdt

    def test_duplicate_ids(self):
        with pytest.raises(InvalidParameter):
            Bdt(branches=(Branch(0, 0.0, 1.0), Branch(0, 0.2, 0.4, parent=0)))

    def test_two_roots(self):
        with pytest.raises(InvalidParameter):
            Bdt(branches=(Branch(0, 0.0, 1.0), Branch(1, 0.2, 0.4)))

    def test_unknown_parent(self):
        with pytest.raises(InvalidParameter):
            Bdt(branches=(Branch(0, 0.0, 1.0), Branch(1, 0.2, 0.4, parent=5)))

    def test_cycle(self):
        with pytest.raises(InvalidParameter):
            Bdt(branches=(Branch(0, 0.0, 1.0), Branch(1, 0.2, 0.4, parent=2), Branch(2, 0.3, 0.4, parent=1)))

    def test_empty_bdt_has_no_root(self):
        with pytest.raises(EmptyTree):
            _ = Bdt(branches=()).root

    def test_nesting(self):
        nested = make_bdt([(0, 10, None), (2, 6, 0)])
        nested.validate_nesting()
        leaking = make_bdt([(0, 10, None), (2, 6, 0), (1, 5, 1)])
        assert leaking.nesting_violations() == [(1, 2)]
        with pytest.raises(NestingViolation):
            leaking.validate_nesting()

    def test_canonical_ignores_ids(self):
        first = make_bdt([(0, 10, None), (1, 6, 0), (7, 9, 0)])
        second = Bdt(branches=(Branch(5, 0, 10), Branch(2, 7, 9, parent=5), Branch(8, 1, 6, parent=5)))
        assert first.canonical() == second.canonical()


class TestBuildBdt:
    def test_ramp_bdt(self, ramp_field):
        bdt = build_bdt(compute_merge_tree(ramp_field, TREE_JOIN))
        assert [(b.id, b.birth, b.death, b.parent) for b in bdt.branches] == [
            (0, 0.0, 4.0, None),
            (1, 1.0, 3.0, 0),
            (2, 2.0, 4.0, 0),
        ]
        assert bdt.kind == TREE_JOIN

    def test_field_bdt_is_nested(self, two_bump_field):
        bdt = field_to_bdt(two_bump_field, TREE_SPLIT)
        assert bdt.nesting_violations() == []
        assert bdt.branch(bdt.root).persistence == pytest.approx(two_bump_field.data_range)

    @pytest.mark.parametrize("kind", [TREE_JOIN, TREE_SPLIT])
    def test_reconstruction_round_trip(self, rng, kind):
        for size in (1, 2, 5, 12):
            bdt = random_bdt(rng, size, kind=kind)
            assert build_bdt(bdt_to_merge_tree(bdt)).canonical() == bdt.canonical()

    def test_reconstruction_keeps_pairs_with_shared_saddles(self):
        bdt = make_bdt([(0, 10, None), (2, 6, 0), (3, 6, 0), (4, 5, 1)])
        tree, leaf_of = reconstruct_merge_tree(bdt)
        assert sorted(leaf_of) == [0, 1, 2, 3]
        assert build_bdt(tree).canonical() == bdt.canonical()

    def test_reconstruction_rejects_leaking_children(self):
        with pytest.raises(NestingViolation):
            bdt_to_merge_tree(make_bdt([(0, 10, None), (2, 12, 0)]))


class TestSimplify:
    def test_threshold_range(self, ramp_field):
        tree = compute_merge_tree(ramp_field, TREE_SPLIT)
        with pytest.raises(InvalidParameter):
            simplify(tree, 1.5)

    def test_zero_threshold_is_identity(self, ramp_field):
        tree = compute_merge_tree(ramp_field, TREE_SPLIT)
        assert simplify(tree, 0.0) is tree

    def test_prunes_short_pairs_and_splices_saddles(self, ramp_field):
        tree = simplify(compute_merge_tree(ramp_field, TREE_SPLIT), 0.6)
        assert sorted(n.id for n in tree.nodes) == [0, 3]
        assert dict(tree.parents) == {0: 3}
        assert [(p.birth, p.death) for p in elder_pairs(tree).pairs] == [(0.0, 4.0)]

    def test_keeps_pairs_above_threshold(self, two_bump_field):
        tree = compute_merge_tree(two_bump_field, TREE_SPLIT)
        cutoff = 0.01 * tree.data_range()
        kept = sorted((p.birth, p.death) for p in elder_pairs(simplify(tree, 0.01)).pairs)
        expected = sorted((p.birth, p.death) for p in elder_pairs(tree).pairs if p.persistence >= cutoff)
        assert kept == expected
