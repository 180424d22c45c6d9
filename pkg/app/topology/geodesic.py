"""
Geodesics between BDTs and between persistence diagrams.

Interpolation happens in the coordinates the metric compared the trees in
(locally normalized by default), then is mapped back to raw values. Normalized
coordinates stay inside [0, 1], which keeps every interpolated child interval
inside its parent interval.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

from app.common.exceptions import InvalidAlpha, MatchingMismatch
from app.constants import SOLVER_EXACT, TREE_JOIN
from app.topology.metric import PointSet, TreeMatching, diagram_distance, diagram_points, match_prepared
from app.topology.preprocess import MetricParams, NormalizedBdt, PreparedBdt, denormalize, prepare
from app.topology.tree import Bdt, Branch, Diagram, PersistencePair

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GeodesicSample:
    alpha: float
    bdt: Bdt
    matching: TreeMatching


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise InvalidAlpha(f"alpha must be in [0, 1], got {alpha}")


def _lerp(start: tuple[float, float], end: tuple[float, float], alpha: float) -> tuple[float, float]:
    return (
        (1.0 - alpha) * start[0] + alpha * end[0],
        (1.0 - alpha) * start[1] + alpha * end[1],
    )


def _diagonal(birth: float, death: float) -> tuple[float, float]:
    mid = 0.5 * (birth + death)
    return mid, mid


def _check_matching(prep_i: PreparedBdt, prep_j: PreparedBdt, matching: TreeMatching) -> None:
    unknown_i = [b for b, _ in matching.matched if b not in prep_i.coords] + [
        b for b in matching.destroyed if b not in prep_i.source
    ]
    unknown_j = [c for _, c in matching.matched if c not in prep_j.coords] + [
        c for c in matching.created if c not in prep_j.source
    ]
    if unknown_i or unknown_j:
        raise MatchingMismatch(f"Matching references unknown branches: {unknown_i} (first), {unknown_j} (second)")


def interpolate_prepared(
    prep_i: PreparedBdt,
    prep_j: PreparedBdt,
    matching: TreeMatching,
    alpha: float,
) -> Bdt:
    """
    Interpolated BDT in the working coordinates of the prepared inputs.

    Matched branches move linearly, destroyed branches slide toward their
    diagonal projection and created branches grow out of theirs, attached to
    the image of their parent. Branches ending on the diagonal are omitted.
    """
    coords_i, coords_j = prep_i.coords, prep_j.coords
    forward = matching.forward()
    backward = matching.backward()
    offset = max(b.id for b in coords_i.branches) + 1

    def created_id(c: int) -> int:
        return offset + c

    branches: list[Branch] = []
    for b_id in coords_i.preorder():
        b = coords_i.branch(b_id)
        start = (b.birth, b.death)
        if b_id in forward:
            c = coords_j.branch(forward[b_id])
            birth, death = _lerp(start, (c.birth, c.death), alpha)
        else:
            birth, death = _lerp(start, _diagonal(*start), alpha)
        branches.append(Branch(id=b_id, birth=birth, death=death, parent=b.parent))

    for c_id in coords_j.preorder():
        if c_id in backward:
            continue
        c = coords_j.branch(c_id)
        end = (c.birth, c.death)
        birth, death = _lerp(_diagonal(*end), end, alpha)
        parent = backward.get(c.parent, created_id(c.parent))
        branches.append(Branch(id=created_id(c_id), birth=birth, death=death, parent=parent))

    sample = Bdt(branches=tuple(branches), kind=coords_i.kind)
    vanished: set[int] = set()
    for branch in sample.branches:
        if branch.parent is not None and branch.persistence <= 0 and branch.id not in vanished:
            vanished.update(sample.subtree(branch.id))
    return sample.without(vanished) if vanished else sample


def interpolate(
    bdt_i: Bdt,
    bdt_j: Bdt,
    matching: TreeMatching,
    alpha: float,
    params: MetricParams | None = None,
) -> GeodesicSample:
    """
    Point at parameter alpha on the geodesic from bdt_i to bdt_j.

    Args:
        bdt_i: Raw BDT at alpha = 0.
        bdt_j: Raw BDT at alpha = 1.
        matching: Matching returned by the distance on the same inputs and parameters.
        alpha: Position along the geodesic, in [0, 1].
        params: Preprocessing parameters used for the matching.

    Returns:
        The sample, in raw coordinates. With normalize=False the sample is
        returned as is, even when it breaks the nesting condition.
    """
    _check_alpha(alpha)
    params = params or MetricParams()
    prep_i, prep_j = prepare(bdt_i, params), prepare(bdt_j, params)
    _check_matching(prep_i, prep_j, matching)

    if alpha == 0.0:
        return GeodesicSample(alpha=alpha, bdt=bdt_i, matching=matching)
    if alpha == 1.0:
        return GeodesicSample(alpha=alpha, bdt=bdt_j, matching=matching)

    coords = interpolate_prepared(prep_i, prep_j, matching, alpha)
    bdt = denormalize(NormalizedBdt(bdt=coords)) if params.normalize else coords
    return GeodesicSample(alpha=alpha, bdt=bdt, matching=matching)


def geodesic_series(
    bdt_i: Bdt,
    bdt_j: Bdt,
    alphas: Sequence[float],
    params: MetricParams | None = None,
    solver: str = SOLVER_EXACT,
) -> list[GeodesicSample]:
    """Samples at several alphas, sharing one optimal matching."""
    for alpha in alphas:
        _check_alpha(alpha)
    params = params or MetricParams()
    matching = match_prepared(prepare(bdt_i, params), prepare(bdt_j, params), solver)
    logger.debug(f"Geodesic at distance {matching.distance:.6g}, {len(alphas)} sample(s)")
    return [interpolate(bdt_i, bdt_j, matching, alpha, params) for alpha in alphas]


def diagram_interpolate(d_i: PointSet, d_j: PointSet, alpha: float) -> Diagram:
    """
    Point at parameter alpha on the W^D_2 geodesic between two diagrams.

    Matched points move linearly; unmatched points slide to or from their
    diagonal projection. Points sitting on the diagonal are omitted.
    """
    _check_alpha(alpha)
    p_i, p_j = diagram_points(d_i), diagram_points(d_j)
    _, matching = diagram_distance(p_i, p_j, q=2.0)

    points = [_lerp(tuple(p_i[r]), tuple(p_j[c]), alpha) for r, c in matching.matched]
    sliding = [_lerp(tuple(p_i[r]), _diagonal(*p_i[r]), alpha) for r in matching.deleted]
    sliding += [_lerp(_diagonal(*p_j[c]), tuple(p_j[c]), alpha) for c in matching.inserted]
    points += [(x, y) for x, y in sliding if y - x > 0]

    pairs = tuple(
        PersistencePair(birth=float(x), death=float(y), birth_node=-1, death_node=-1) for x, y in points
    )
    return Diagram(pairs=pairs, kind=d_i.kind if isinstance(d_i, Diagram) else TREE_JOIN)
