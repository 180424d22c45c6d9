"""Metric axioms and reference oracles on random nested BDTs."""

import itertools
import math

import numpy as np
import pytest

from app.topology.field import ScalarField
from app.topology.metric import delete_cost2, diagram_distance, match_cost2, mt_distance
from app.topology.preprocess import MetricParams
from app.topology.tree import Bdt, field_to_bdt
from tests.factories import NORMALIZED, RAW, random_bdt


@pytest.mark.parametrize("params", [RAW, NORMALIZED], ids=["raw", "normalized"])
def test_symmetry_and_identity(rng, params):
    for _ in range(100):
        a, b = random_bdt(rng, 6, scale=1.0), random_bdt(rng, 8, scale=2.0)
        forward = mt_distance(a, b, params)
        backward = mt_distance(b, a, params)
        assert forward.distance == pytest.approx(backward.distance, abs=1e-12)
        assert mt_distance(a, a, params).distance == 0.0
        assert forward.distance > 0.0


@pytest.mark.parametrize("params", [RAW, NORMALIZED], ids=["raw", "normalized"])
def test_triangle_inequality(rng, params):
    for _ in range(300):
        a, b, c = (random_bdt(rng, int(rng.integers(1, 8)), scale=float(rng.uniform(0.5, 3.0))) for _ in range(3))
        ab = mt_distance(a, b, params).distance
        bc = mt_distance(b, c, params).distance
        ac = mt_distance(a, c, params).distance
        assert ac <= ab + bc + 1e-9


def test_matching_covers_every_branch(rng):
    for _ in range(10):
        a, b = random_bdt(rng, 7), random_bdt(rng, 5)
        matching = mt_distance(a, b, RAW)
        assert sorted([i for i, _ in matching.matched] + list(matching.destroyed)) == sorted(x.id for x in a.branches)
        assert sorted([j for _, j in matching.matched] + list(matching.created)) == sorted(x.id for x in b.branches)
        assert (a.root, b.root) in matching.matched


# ===== REFERENCE ORACLES =====


def partial_isomorphism_cost2(a: Bdt, b: Bdt) -> float:
    """
    Squared cost of the best rooted partial isomorphism, by enumeration.

    Roots are matched; a matched pair's children are matched to each other
    through every partial injection, unmatched subtrees are destroyed or created.
    """

    def destroyed(bdt: Bdt, branch_id: int) -> float:
        return sum(delete_cost2(bdt.branch(k)) for k in bdt.subtree(branch_id))

    def pair(i: int, j: int) -> float:
        return match_cost2(a.branch(i), b.branch(j)) + forest(a.children(i), b.children(j))

    def forest(kids_a: list[int], kids_b: list[int]) -> float:
        best = math.inf
        for size in range(min(len(kids_a), len(kids_b)) + 1):
            for chosen in itertools.combinations(kids_a, size):
                for image in itertools.permutations(kids_b, size):
                    cost = sum(pair(i, j) for i, j in zip(chosen, image, strict=True))
                    cost += sum(destroyed(a, i) for i in kids_a if i not in chosen)
                    cost += sum(destroyed(b, j) for j in kids_b if j not in image)
                    best = min(best, cost)
        return best

    return pair(a.root, b.root)


def test_tree_distance_equals_the_best_partial_isomorphism(rng):
    for _ in range(60):
        a = random_bdt(rng, int(rng.integers(1, 5)), scale=float(rng.uniform(0.5, 2.0)))
        b = random_bdt(rng, int(rng.integers(1, 5)), scale=float(rng.uniform(0.5, 2.0)))
        expected = math.sqrt(partial_isomorphism_cost2(a, b))
        assert mt_distance(a, b, RAW).distance == pytest.approx(expected, abs=1e-9)


def test_full_saddle_merging_reduces_to_the_diagram_distance(rng):
    # Every saddle collapses into one, so the BDTs flatten to their diagrams.
    flat = MetricParams(eps1=1.0, eps2=0.0, eps3=0.0, normalize=False)
    for _ in range(100):
        a, b = random_bdt(rng, int(rng.integers(1, 8))), random_bdt(rng, int(rng.integers(1, 8)))
        expected, _ = diagram_distance(a.pairs(), b.pairs())
        assert mt_distance(a, b, flat).distance == pytest.approx(expected, abs=1e-9)


def test_equal_diagrams_with_different_nesting():
    # Mirroring swaps which valley is swept first, hence which peak the lowest one joins.
    values = np.array([1.0, 0.0, 0.7, 0.0, 0.4])
    nested = field_to_bdt(ScalarField(dims=(5,), values=values))
    flat = field_to_bdt(ScalarField(dims=(5,), values=values[::-1].copy()))
    assert max(nested.depths().values()) == 2
    assert max(flat.depths().values()) == 1

    diagram, _ = diagram_distance(nested.pairs(), flat.pairs())
    assert diagram == 0.0
    tree = mt_distance(nested, flat, RAW).distance
    assert tree > 0.1
    assert tree == pytest.approx(0.4)
