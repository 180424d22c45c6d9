import pytest

from app.common.exceptions import EmptyTree, InvalidParameter, NestingViolation, ZeroPersistenceParent
from app.topology.preprocess import (
    MetricParams,
    NormalizedBdt,
    denormalize,
    drop_zero_persistence,
    merge_bdt_saddles,
    merge_saddles,
    move_branches_up,
    normalize,
    prepare,
)
from app.topology.tree import Bdt, bdt_to_merge_tree, elder_pairs
from tests.factories import NORMALIZED, RAW, make_bdt, random_bdt


def swapped_saddles() -> Bdt:
    # Branch 2 merges into branch 1 at 5.8, just below the saddle where 1 joins the root at 6.
    return make_bdt([(0, 10, None), (1, 6, 0), (2, 5.8, 1), (3, 9, 0)])


class TestMetricParams:
    def test_defaults(self):
        params = MetricParams()
        assert (params.eps1, params.eps2, params.eps3, params.normalize) == (0.05, 0.95, 0.9, True)
        assert params.label() == "W^N_2"
        assert RAW.label() == "W^T_2"

    @pytest.mark.parametrize("name", ["eps1", "eps2", "eps3"])
    def test_range(self, name):
        with pytest.raises(InvalidParameter):
            MetricParams(**{name: 1.5})
        with pytest.raises(InvalidParameter):
            MetricParams(**{name: -0.1})


class TestSaddleMerging:
    def test_zero_threshold_keeps_the_tree(self):
        tree = bdt_to_merge_tree(swapped_saddles())
        assert merge_saddles(tree, 0.0) is tree

    def test_close_saddles_are_merged_and_pairs_kept(self):
        tree = bdt_to_merge_tree(swapped_saddles())
        merged = merge_saddles(tree, 0.1)
        assert len(merged.nodes) == len(tree.nodes) - 1
        before = sorted((p.birth, p.death) for p in elder_pairs(tree).pairs)
        after = sorted((p.birth, p.death) for p in elder_pairs(merged).pairs)
        assert after == before

    def test_bdt_branch_moves_to_the_merged_saddle_owner(self):
        bdt = swapped_saddles()
        merged = merge_bdt_saddles(bdt, 0.1)
        assert merged.branch(2).parent == 0
        assert merged.pairs() == bdt.pairs()
        assert merged.nesting_violations() == []

    def test_distant_saddles_stay_apart(self):
        bdt = swapped_saddles()
        assert merge_bdt_saddles(bdt, 0.01).canonical() == bdt.canonical()

    def test_full_merging_flattens_the_tree(self, rng):
        for _ in range(10):
            bdt = random_bdt(rng, 8)
            merged = merge_bdt_saddles(bdt, 1.0)
            assert merged.pairs() == bdt.pairs()
            assert merged.nesting_violations() == []

    def test_range(self):
        with pytest.raises(InvalidParameter):
            merge_saddles(bdt_to_merge_tree(swapped_saddles()), 2.0)


class TestMoveBranchesUp:
    def bdt(self) -> Bdt:
        return make_bdt([(0, 10, None), (1, 9, 0), (2, 8.5, 1)])

    def test_moves_branches_almost_as_persistent_as_their_parent(self):
        moved = move_branches_up(self.bdt(), eps2=0.5, eps3=0.9)
        assert moved.branch(2).parent == 0

    def test_persistence_ratio_guard(self):
        assert move_branches_up(self.bdt(), eps2=0.9, eps3=0.9).branch(2).parent == 1

    def test_relative_persistence_guard(self):
        assert move_branches_up(self.bdt(), eps2=0.5, eps3=0.5).branch(2).parent == 1

    def test_zero_eps2_only_checks_eps3(self):
        assert move_branches_up(self.bdt(), eps2=0.0, eps3=0.9).branch(2).parent == 0

    def test_moves_one_level_at_a_time_until_stable(self):
        bdt = make_bdt([(0, 10, None), (1, 9.5, 0), (2, 8.8, 1), (3, 8.4, 2)])
        moved = move_branches_up(bdt, eps2=0.5, eps3=0.95)
        assert moved.branch(2).parent == 0
        assert moved.branch(3).parent == 0

    def test_zero_eps3_is_identity(self):
        bdt = self.bdt()
        assert move_branches_up(bdt, 0.5, 0.0) is bdt


class TestNormalization:
    def test_relative_coordinates(self):
        nbdt = normalize(make_bdt([(0, 10, None), (2, 6, 0), (3, 5, 1)]))
        assert nbdt.root_interval == (0.0, 10.0)
        assert (nbdt.bdt.branch(1).birth, nbdt.bdt.branch(1).death) == pytest.approx((0.2, 0.6))
        assert (nbdt.bdt.branch(2).birth, nbdt.bdt.branch(2).death) == pytest.approx((0.25, 0.75))

    def test_round_trip(self, rng):
        for _ in range(20):
            bdt = random_bdt(rng, 10, scale=7.0)
            restored = denormalize(normalize(bdt))
            for original in bdt.branches:
                branch = restored.branch(original.id)
                assert branch.birth == pytest.approx(original.birth, abs=1e-12)
                assert branch.death == pytest.approx(original.death, abs=1e-12)
                assert branch.parent == original.parent

    def test_normalized_children_live_in_the_unit_interval(self, rng):
        bdt = normalize(random_bdt(rng, 15, scale=3.0)).bdt
        for branch in bdt.branches:
            if branch.parent is not None:
                assert 0.0 <= branch.birth <= branch.death <= 1.0

    def test_denormalized_output_is_nested(self, rng):
        coords = normalize(random_bdt(rng, 15)).bdt
        assert denormalize(NormalizedBdt(bdt=coords)).nesting_violations() == []

    def test_zero_persistence_parent(self):
        with pytest.raises(ZeroPersistenceParent):
            normalize(make_bdt([(0, 10, None), (5, 5, 0), (5, 5, 1)]))

    def test_empty(self):
        with pytest.raises(EmptyTree):
            normalize(Bdt(branches=()))


class TestPrepare:
    def test_drops_zero_persistence_subtrees(self):
        bdt = make_bdt([(0, 10, None), (5, 5, 0), (5, 5, 1), (2, 4, 0)])
        kept, dropped = drop_zero_persistence(bdt)
        assert dropped == (1, 2)
        assert sorted(b.id for b in kept.branches) == [0, 3]

    def test_pipeline(self):
        bdt = make_bdt([(0, 10, None), (5, 5, 0), (2, 4, 0)])
        prepared = prepare(bdt, NORMALIZED)
        assert prepared.source is bdt
        assert prepared.dropped == (1,)
        assert prepared.coords.branch(2).birth == pytest.approx(0.2)
        assert prepared.structure.branch(2).birth == 2.0

    def test_raw_coordinates_are_the_structure(self):
        prepared = prepare(make_bdt([(0, 10, None), (2, 4, 0)]), RAW)
        assert prepared.coords is prepared.structure

    def test_rejects_empty_and_leaking_trees(self):
        with pytest.raises(EmptyTree):
            prepare(Bdt(branches=()), MetricParams())
        with pytest.raises(NestingViolation):
            prepare(make_bdt([(0, 10, None), (2, 12, 0)]), MetricParams())
