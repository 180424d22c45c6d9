import itertools

import pytest

from app.common.exceptions import InvalidAlpha, MatchingMismatch, NestingViolation
from app.topology.geodesic import diagram_interpolate, geodesic_series, interpolate
from app.topology.metric import TreeMatching, compare, mt_distance
from app.topology.tree import Diagram, bdt_to_merge_tree
from tests.factories import NORMALIZED, RAW, make_bdt, random_bdt, single


class TestEndpoints:
    def test_endpoints_are_the_inputs(self, rng):
        a, b = random_bdt(rng, 6), random_bdt(rng, 4)
        matching = mt_distance(a, b)
        assert interpolate(a, b, matching, 0.0).bdt is a
        assert interpolate(a, b, matching, 1.0).bdt is b

    @pytest.mark.parametrize("alpha", [-0.1, 1.5])
    def test_alpha_range(self, alpha):
        a, b = single(1.0), single(2.0)
        with pytest.raises(InvalidAlpha):
            interpolate(a, b, mt_distance(a, b), alpha)
        with pytest.raises(InvalidAlpha):
            geodesic_series(a, b, [0.5, alpha])

    def test_matching_from_other_trees(self):
        a, b = single(1.0), single(2.0)
        with pytest.raises(MatchingMismatch):
            interpolate(a, b, TreeMatching(distance=0.0, matched=((0, 9),)), 0.5)


class TestInterpolation:
    def test_single_branches_move_linearly(self):
        sample = interpolate(single(4.0), single(8.0), mt_distance(single(4.0), single(8.0), RAW), 0.25, RAW)
        assert sample.bdt.pairs() == [(0.0, 5.0)]

    def test_created_branches_grow_from_the_diagonal(self):
        a, b = single(10.0), make_bdt([(0, 10, None), (2, 6, 0)])
        sample = interpolate(a, b, mt_distance(a, b, RAW), 0.5, RAW)
        created = [branch for branch in sample.bdt.branches if branch.id != 0]
        assert len(created) == 1
        assert (created[0].birth, created[0].death, created[0].parent) == (3.0, 5.0, 0)

    def test_destroyed_branches_shrink_to_the_diagonal(self):
        a, b = make_bdt([(0, 10, None), (2, 6, 0)]), single(10.0)
        sample = interpolate(a, b, mt_distance(a, b, RAW), 0.5, RAW)
        assert sample.bdt.branch(1).birth == 3.0
        assert sample.bdt.branch(1).death == 5.0

    def test_samples_lie_on_a_geodesic(self, rng):
        for _ in range(6):
            a, b = random_bdt(rng, 7, scale=2.0), random_bdt(rng, 6, scale=3.0)
            total = mt_distance(a, b, NORMALIZED).distance
            for sample in geodesic_series(a, b, [0.25, 0.5, 0.75], NORMALIZED):
                to_start = mt_distance(a, sample.bdt, NORMALIZED).distance
                to_end = mt_distance(sample.bdt, b, NORMALIZED).distance
                assert to_start == pytest.approx(sample.alpha * total, abs=1e-6)
                assert to_end == pytest.approx((1.0 - sample.alpha) * total, abs=1e-6)

    def test_raw_samples_lie_on_a_geodesic(self, rng):
        # Raw samples may break nesting, so they are compared without preprocessing.
        for _ in range(6):
            a, b = random_bdt(rng, 7, scale=2.0), random_bdt(rng, 6, scale=3.0)
            total = compare(a, b)[0].distance
            for sample in geodesic_series(a, b, [0.25, 0.5, 0.75], RAW):
                assert compare(a, sample.bdt)[0].distance == pytest.approx(sample.alpha * total, abs=1e-6)
                assert compare(sample.bdt, b)[0].distance == pytest.approx((1.0 - sample.alpha) * total, abs=1e-6)

    @pytest.mark.parametrize("params", [RAW, NORMALIZED], ids=["raw", "normalized"])
    def test_every_pair_of_samples_is_proportionally_apart(self, rng, params):
        def distance(x, y):
            # Raw samples may break nesting, so they skip preprocessing.
            return compare(x, y)[0].distance if params is RAW else mt_distance(x, y, params).distance

        alphas = [0.0, 0.25, 0.5, 0.75, 1.0]
        for _ in range(6):
            a, b = random_bdt(rng, 6, scale=2.0), random_bdt(rng, 7, scale=3.0)
            samples = geodesic_series(a, b, alphas, params)
            total = distance(a, b)
            for s, t in itertools.combinations(samples, 2):
                assert distance(s.bdt, t.bdt) == pytest.approx((t.alpha - s.alpha) * total, abs=1e-6)

    def test_normalized_samples_stay_nested(self, rng):
        alphas = [k / 10 for k in range(1, 10)]
        for _ in range(200):
            a, b = random_bdt(rng, 10), random_bdt(rng, 10, scale=float(rng.uniform(0.5, 2.0)))
            for sample in geodesic_series(a, b, alphas):
                assert sample.bdt.nesting_violations() == []

    def test_raw_samples_can_leak_out_of_their_parent(self):
        a = make_bdt([(0, 10, None), (0, 8, 0), (0, 6, 1)])
        b = single(10.0)
        params = RAW
        sample = interpolate(a, b, mt_distance(a, b, params), 0.5, params)
        assert sample.bdt.branch(1).birth == 2.0
        assert sample.bdt.branch(2).birth == 1.5
        assert sample.bdt.nesting_violations() == [(1, 2)]
        with pytest.raises(NestingViolation):
            bdt_to_merge_tree(sample.bdt)

        normalized = interpolate(a, b, mt_distance(a, b, NORMALIZED), 0.5, NORMALIZED)
        assert normalized.bdt.nesting_violations() == []

    def test_series_shares_one_matching(self, rng):
        a, b = random_bdt(rng, 5), random_bdt(rng, 5)
        samples = geodesic_series(a, b, [0.0, 0.5, 1.0])
        assert [s.alpha for s in samples] == [0.0, 0.5, 1.0]
        assert len({id(s.matching) for s in samples}) == 1


class TestDiagramInterpolation:
    def test_matched_points_move_linearly(self):
        diagram = diagram_interpolate([(0.0, 4.0)], [(0.0, 2.0)], 0.5)
        assert isinstance(diagram, Diagram)
        assert [(p.birth, p.death) for p in diagram.pairs] == [(0.0, 3.0)]

    def test_unmatched_points_slide_to_the_diagonal(self):
        halfway = diagram_interpolate([(0.0, 4.0), (1.0, 1.2)], [(0.0, 4.0)], 0.5)
        points = sorted((p.birth, p.death) for p in halfway.pairs)
        assert points[0] == (0.0, 4.0)
        assert points[1] == pytest.approx((1.05, 1.15))
        assert len(diagram_interpolate([(0.0, 4.0), (1.0, 1.2)], [(0.0, 4.0)], 1.0).pairs) == 1

    def test_alpha_range(self):
        with pytest.raises(InvalidAlpha):
            diagram_interpolate([(0.0, 1.0)], [(0.0, 1.0)], 2.0)
