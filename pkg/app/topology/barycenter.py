"""
Frechet means of BDT ensembles (and of persistence diagrams).

The candidate lives in the working coordinates of the preprocessed members,
so one update is a weighted arithmetic mean per branch: matched branches
average their images, destroyed ones pull toward the diagonal, and branches
the members have but the candidate lacks are spawned near the diagonal.
"""

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from app.common.exceptions import (
    EmptyEnsemble,
    InvalidParameter,
    MatchingMismatch,
    NestingViolation,
    NonConvergence,
    WeightError,
)
from app.constants import (
    BARYCENTER_MAX_ITERATIONS,
    BARYCENTER_STOP_RATIO,
    PERSISTENCE_EPSILON,
    SOLVER_EXACT,
    TREE_JOIN,
    WEIGHT_TOLERANCE,
)
from app.topology.metric import PointSet, TreeMatching, compare, diagram_distance, diagram_points, match_prepared
from app.topology.preprocess import MetricParams, NormalizedBdt, PreparedBdt, denormalize, prepare
from app.topology.tree import Bdt, Branch, Diagram, MergeTree, PersistencePair, bdt_to_merge_tree

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BarycenterRun:
    """
    Outcome of a barycenter computation.

    Attributes:
        result: Barycenter BDT in raw coordinates.
        merge_tree: Merge tree reconstructed from `result`, or None when the
            raw result breaks the nesting condition (normalize=False only).
        energy_trace: Frechet energy of every accepted candidate.
        matchings: Final matching from the barycenter to each member.
        weights: Barycentric weights.
        coords: Barycenter in working coordinates, usable as a warm start.
    """

    result: Bdt
    merge_tree: MergeTree | None
    energy_trace: tuple[float, ...]
    matchings: tuple[TreeMatching, ...]
    weights: tuple[float, ...]
    coords: Bdt
    init_index: int | None
    params: MetricParams

    @property
    def energy(self) -> float:
        return self.energy_trace[-1]

    @property
    def iterations(self) -> int:
        return len(self.energy_trace)


def check_weights(weights: Sequence[float] | None, count: int) -> np.ndarray:
    """Uniform weights when omitted, otherwise non-negative and summing to one."""
    if count == 0:
        raise EmptyEnsemble("The ensemble has no member")
    if weights is None:
        return np.full(count, 1.0 / count)
    values = np.asarray(weights, dtype=float).ravel()
    if values.size != count:
        raise WeightError(f"Expected {count} weights, got {values.size}")
    if np.any(values < 0) or np.any(values > 1) or abs(values.sum() - 1.0) > WEIGHT_TOLERANCE:
        raise WeightError(f"Weights must lie in [0, 1] and sum to 1, got sum {values.sum()!r}")
    return values


def _weighted_energy(distances: Sequence[float], weights: np.ndarray) -> float:
    energy = 0.0
    for distance, weight in zip(distances, weights, strict=True):
        energy += float(weight) * distance**2
    return energy


def frechet_energy(
    candidate: Bdt,
    ensemble: Sequence[Bdt],
    weights: Sequence[float] | None = None,
    params: MetricParams | None = None,
    solver: str = SOLVER_EXACT,
) -> float:
    """Weighted sum of squared distances from a raw candidate to the members."""
    alphas = check_weights(weights, len(ensemble))
    params = params or MetricParams()
    prepared = prepare(candidate, params)
    distances = [match_prepared(prepared, prepare(member, params), solver).distance for member in ensemble]
    return _weighted_energy(distances, alphas)


def _diagonal_pull(branch: Branch, weight: float) -> tuple[float, float]:
    mid = 0.5 * (branch.birth + branch.death)
    return (
        weight * branch.birth + (1.0 - weight) * mid,
        weight * branch.death + (1.0 - weight) * mid,
    )


def update_candidate(
    candidate: Bdt,
    members: Sequence[Bdt],
    matchings: Sequence[TreeMatching],
    weights: Sequence[float],
    prune_below: float = PERSISTENCE_EPSILON,
) -> Bdt:
    """
    One update step with the matchings frozen.

    Args:
        candidate: Candidate in working coordinates.
        members: Members in the same coordinates.
        matchings: Matching from the candidate to each member.
        weights: Barycentric weights.
        prune_below: Branches whose persistence falls below this are removed.

    Returns:
        The updated candidate. Existing branch ids are kept; spawned
        branches get fresh ids.
    """
    alphas = check_weights(weights, len(members))
    if len(matchings) != len(members):
        raise MatchingMismatch(f"Got {len(matchings)} matchings for {len(members)} members")

    forwards = [m.forward() for m in matchings]
    for member, forward in zip(members, forwards, strict=True):
        bad = [(b, c) for b, c in forward.items() if b not in candidate or c not in member]
        if bad:
            raise MatchingMismatch(f"Matching references unknown branches {bad[:3]}")

    branches: list[Branch] = []
    for branch in candidate.branches:
        mid = 0.5 * (branch.birth + branch.death)
        birth = death = 0.0
        for member, forward, alpha in zip(members, forwards, alphas, strict=True):
            target = member.branch(forward[branch.id]) if branch.id in forward else None
            birth += alpha * (target.birth if target is not None else mid)
            death += alpha * (target.death if target is not None else mid)
        branches.append(replace(branch, birth=birth, death=death, node=None))

    next_id = max(b.id for b in candidate.branches) + 1
    for member, matching, alpha in zip(members, matchings, alphas, strict=True):
        image = matching.backward()
        for c_id in member.preorder():
            if c_id in image:
                continue
            c = member.branch(c_id)
            parent = image.get(c.parent)
            if parent is None:
                continue
            birth, death = _diagonal_pull(c, float(alpha))
            if death - birth <= prune_below:
                continue
            image[c_id] = next_id
            branches.append(Branch(id=next_id, birth=birth, death=death, parent=parent))
            next_id += 1

    updated = Bdt(branches=tuple(branches), kind=candidate.kind)
    pruned: set[int] = set()
    for branch in updated.branches:
        if branch.parent is not None and branch.persistence < prune_below and branch.id not in pruned:
            pruned.update(updated.subtree(branch.id))
    return updated.without(pruned) if pruned else updated


def _median_member(prepared: Sequence[PreparedBdt]) -> int:
    totals = [sum(b.persistence for b in p.source.branches) for p in prepared]
    ranked = sorted(range(len(totals)), key=lambda k: (totals[k], k))
    return ranked[(len(ranked) - 1) // 2]


def to_raw_result(coords: Bdt, params: MetricParams) -> tuple[Bdt, MergeTree | None]:
    result = denormalize(NormalizedBdt(bdt=coords)) if params.normalize else coords
    try:
        merge_tree = bdt_to_merge_tree(result)
    except NestingViolation:
        if params.normalize:
            raise
        logger.warning("Barycenter breaks the nesting condition in raw coordinates; no merge tree built")
        merge_tree = None
    return result, merge_tree


def _assign(
    candidate: Bdt,
    prepared: Sequence[PreparedBdt],
    solver: str,
    thread_count: int,
) -> list[TreeMatching]:
    def match(member: PreparedBdt) -> TreeMatching:
        matching, _ = compare(candidate, member.coords, solver, metric=member.params.label())
        return matching

    if thread_count > 1:
        with ThreadPoolExecutor(max_workers=thread_count) as executor:
            return list(executor.map(match, prepared))
    return [match(member) for member in prepared]


def barycenter_prepared(
    prepared: Sequence[PreparedBdt],
    weights: Sequence[float] | None = None,
    init_index: int | None = None,
    init_coords: Bdt | None = None,
    solver: str = SOLVER_EXACT,
    thread_count: int = 1,
    max_iterations: int = BARYCENTER_MAX_ITERATIONS,
) -> BarycenterRun:
    """Barycenter of already prepared members, optionally warm-started from coordinates."""
    alphas = check_weights(weights, len(prepared))
    params = prepared[0].params
    if init_coords is None:
        if init_index is None:
            init_index = _median_member(prepared)
        if not 0 <= init_index < len(prepared):
            raise InvalidParameter(f"init_index must be in [0, {len(prepared)}), got {init_index}")
        init_coords = prepared[init_index].coords

    members = [p.coords for p in prepared]
    prune_scale = 1.0 if params.normalize else max(init_coords.branch(init_coords.root).persistence, 1.0)

    candidate = init_coords
    matchings = _assign(candidate, prepared, solver, thread_count)
    trace = [_weighted_energy([m.distance for m in matchings], alphas)]
    logger.debug(f"Barycenter start: energy {trace[0]:.6g}, {len(candidate)} branch(es)")

    while trace[-1] > 0:
        if len(trace) >= max_iterations:
            raise NonConvergence(f"Barycenter did not converge within {max_iterations} iterations")

        proposal = update_candidate(candidate, members, matchings, alphas, PERSISTENCE_EPSILON * prune_scale)
        proposal_matchings = _assign(proposal, prepared, solver, thread_count)
        energy = _weighted_energy([m.distance for m in proposal_matchings], alphas)
        if energy > trace[-1]:
            logger.debug(f"Rejected barycenter update raising energy to {energy:.6g}")
            break

        decrease = (trace[-1] - energy) / trace[-1]
        candidate, matchings = proposal, proposal_matchings
        trace.append(energy)
        logger.debug(f"Barycenter iteration {len(trace) - 1}: energy {energy:.6g}")
        if decrease < BARYCENTER_STOP_RATIO:
            break

    result, merge_tree = to_raw_result(candidate, params)
    reported = tuple(
        replace(m, created=tuple(sorted(m.created + p.dropped))) for m, p in zip(matchings, prepared, strict=True)
    )
    return BarycenterRun(
        result=result,
        merge_tree=merge_tree,
        energy_trace=tuple(trace),
        matchings=reported,
        weights=tuple(float(a) for a in alphas),
        coords=candidate,
        init_index=init_index,
        params=params,
    )


def barycenter(
    ensemble: Sequence[Bdt],
    weights: Sequence[float] | None = None,
    params: MetricParams | None = None,
    init_index: int | None = None,
    solver: str = SOLVER_EXACT,
    thread_count: int = 1,
    max_iterations: int = BARYCENTER_MAX_ITERATIONS,
) -> BarycenterRun:
    """
    Wasserstein barycenter of a BDT ensemble by alternating assignment and update.

    Args:
        ensemble: Raw member BDTs.
        weights: Barycentric weights, uniform when omitted.
        params: Preprocessing parameters.
        init_index: Member used as the initial candidate; defaults to the
            member with median total persistence.
        solver: Assignment solver for the distances.
        thread_count: Members are matched concurrently when above 1.
        max_iterations: Iteration cap.

    Returns:
        The run, stopped once the energy decreases by less than 1%.

    Raises:
        EmptyEnsemble: No member was given.
        WeightError: Invalid weights.
        NonConvergence: The iteration cap was reached.
    """
    if not ensemble:
        raise EmptyEnsemble("The ensemble has no member")
    check_weights(weights, len(ensemble))
    params = params or MetricParams()
    prepared = [prepare(member, params) for member in ensemble]
    run = barycenter_prepared(
        prepared,
        weights=weights,
        init_index=init_index,
        solver=solver,
        thread_count=thread_count,
        max_iterations=max_iterations,
    )
    logger.info(f"Barycenter of {len(ensemble)} tree(s): energy {run.energy:.6g} after {run.iterations} iteration(s)")
    return run


# ===== PERSISTENCE DIAGRAMS =====


def _diagram_step(
    points: np.ndarray,
    diagrams: Sequence[np.ndarray],
    alphas: np.ndarray,
) -> tuple[float, Callable[[], np.ndarray]]:
    """Energy of `points` and a closure computing the updated points."""
    results = [diagram_distance(points, diagram) for diagram in diagrams]
    energy = _weighted_energy([d for d, _ in results], alphas)

    def update() -> np.ndarray:
        mids = points.mean(axis=1, keepdims=True) if len(points) else np.zeros((0, 1))
        new_points = np.zeros_like(points)
        spawned = []
        for diagram, (_, matching), alpha in zip(diagrams, results, alphas, strict=True):
            targets = np.repeat(mids, 2, axis=1)
            for r, c in matching.matched:
                targets[r] = diagram[c]
            new_points += alpha * targets
            for c in matching.inserted:
                mid = diagram[c].mean()
                spawned.append(alpha * diagram[c] + (1.0 - alpha) * mid)
        merged = np.vstack([new_points, *spawned]) if spawned else new_points
        return merged[merged[:, 1] - merged[:, 0] >= PERSISTENCE_EPSILON]

    return energy, update


def diagram_barycenter(
    diagrams: Sequence[PointSet],
    weights: Sequence[float] | None = None,
    max_iterations: int = BARYCENTER_MAX_ITERATIONS,
) -> tuple[Diagram, tuple[float, ...]]:
    """
    Frechet mean of persistence diagrams under W^D_2.

    Returns:
        The barycenter diagram and its energy trace.
    """
    alphas = check_weights(weights, len(diagrams))
    point_sets = [diagram_points(d) for d in diagrams]
    totals = [float((p[:, 1] - p[:, 0]).sum()) for p in point_sets]
    ranked = sorted(range(len(totals)), key=lambda k: (totals[k], k))
    points = point_sets[ranked[(len(ranked) - 1) // 2]]

    energy, update = _diagram_step(points, point_sets, alphas)
    trace = [energy]
    while trace[-1] > 0:
        if len(trace) >= max_iterations:
            raise NonConvergence(f"Diagram barycenter did not converge within {max_iterations} iterations")
        proposal = update()
        energy, proposal_update = _diagram_step(proposal, point_sets, alphas)
        if energy > trace[-1]:
            break
        decrease = (trace[-1] - energy) / trace[-1]
        points, update = proposal, proposal_update
        trace.append(energy)
        if decrease < BARYCENTER_STOP_RATIO:
            break

    pairs = tuple(PersistencePair(birth=float(x), death=float(y), birth_node=-1, death_node=-1) for x, y in points)
    kind = diagrams[0].kind if isinstance(diagrams[0], Diagram) else TREE_JOIN
    return Diagram(pairs=pairs, kind=kind), tuple(trace)
