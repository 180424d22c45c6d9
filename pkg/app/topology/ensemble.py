"""
Ensemble analysis on top of the merge tree Wasserstein distance.

k-means clustering with barycenters as centroids, partition scores, temporal
reduction of sequences to key frames, feature tracking and the noise
stability experiment.
"""

import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from sklearn.metrics import adjusted_rand_score, normalized_mutual_info_score

from app.common.exceptions import (
    EmptyEnsemble,
    InvalidK,
    InvalidKeyFrames,
    InvalidParameter,
    LengthMismatch,
)
from app.constants import (
    KMEANS_MAX_ITERATIONS,
    SOLVER_EXACT,
    STABILITY_FIT_LIMIT,
    STABILITY_TOLERANCE,
    TREE_SPLIT,
)
from app.topology.barycenter import barycenter_prepared, to_raw_result
from app.topology.field import (
    ScalarField,
    add_uniform_noise,
    random_centers,
    ring_centers,
    synth_gaussian_mixture,
)
from app.topology.geodesic import interpolate_prepared
from app.topology.metric import TreeMatching, compare, diagram_distance, match_prepared
from app.topology.preprocess import MetricParams, NormalizedBdt, PreparedBdt, denormalize, prepare
from app.topology.tree import Bdt, build_bdt, compute_merge_tree, elder_pairs, simplify

logger = logging.getLogger(__name__)


# ===== CLUSTERING =====


@dataclass(frozen=True)
class ClusteringResult:
    assignments: tuple[int, ...]
    centroids: tuple[Bdt, ...]
    iterations: int
    cluster_energies: tuple[float, ...]
    energy_trace: tuple[float, ...]
    seeds: tuple[int, ...]
    centroid_coords: tuple[Bdt, ...] = ()

    @property
    def energy(self) -> float:
        return float(sum(self.cluster_energies))


def _distances_to(
    centroids: Sequence[Bdt], prepared: Sequence[PreparedBdt], solver: str, thread_count: int
) -> np.ndarray:
    """Member x centroid distance matrix."""
    cells = [(i, c) for i in range(len(prepared)) for c in range(len(centroids))]

    def cell(index: tuple[int, int]) -> float:
        matching, _ = compare(centroids[index[1]], prepared[index[0]].coords, solver)
        return matching.distance

    if thread_count > 1:
        with ThreadPoolExecutor(max_workers=thread_count) as executor:
            values = list(executor.map(cell, cells))
    else:
        values = [cell(index) for index in cells]
    return np.array(values).reshape(len(prepared), len(centroids))


def _seed_centroids(
    prepared: Sequence[PreparedBdt], k: int, rng: np.random.Generator, solver: str, thread_count: int
) -> list[int]:
    """k-means++ seeding over member indices."""
    size = len(prepared)
    seeds = [int(rng.integers(size))]
    while len(seeds) < k:
        distances = _distances_to([prepared[s].coords for s in seeds], prepared, solver, thread_count)
        weights = distances.min(axis=1) ** 2
        weights[seeds] = 0.0
        if weights.sum() > 0:
            choice = int(rng.choice(size, p=weights / weights.sum()))
        else:
            remaining = [i for i in range(size) if i not in seeds]
            choice = int(rng.choice(remaining))
        seeds.append(choice)
    return seeds


def kmeans(
    ensemble: Sequence[Bdt],
    k: int,
    params: MetricParams | None = None,
    seed: int | None = 0,
    solver: str = SOLVER_EXACT,
    thread_count: int = 1,
    max_iterations: int = KMEANS_MAX_ITERATIONS,
) -> ClusteringResult:
    """
    k-means over BDTs with Wasserstein barycenters as centroids.

    Centroids are seeded k-means++ style from the members, then assignment
    and centroid update alternate until the assignment is stable. Ties go to
    the lower cluster id; an empty cluster is re-seeded with the member
    farthest from its centroid.

    Raises:
        EmptyEnsemble: No member was given.
        InvalidK: k is not in [1, N].
    """
    if not ensemble:
        raise EmptyEnsemble("The ensemble has no member")
    if not 1 <= k <= len(ensemble):
        raise InvalidK(f"k must be in [1, {len(ensemble)}], got {k}")

    params = params or MetricParams()
    prepared = [prepare(bdt, params) for bdt in ensemble]
    rng = np.random.default_rng(seed)
    seeds = _seed_centroids(prepared, k, rng, solver, thread_count)
    centroids = [prepared[s].coords for s in seeds]

    labels: np.ndarray | None = None
    trace: list[float] = []
    iterations = 0
    while iterations < max_iterations:
        iterations += 1
        distances = _distances_to(centroids, prepared, solver, thread_count)
        new_labels = np.argmin(distances, axis=1)

        for cluster in range(k):
            if np.any(new_labels == cluster):
                continue
            own = distances[np.arange(len(prepared)), new_labels]
            movable = [i for i in range(len(prepared)) if np.sum(new_labels == new_labels[i]) > 1]
            farthest = max(movable, key=lambda i: (own[i], -i))
            logger.debug(f"Re-seeding empty cluster {cluster} with member {farthest}")
            centroids[cluster] = prepared[farthest].coords
            new_labels[farthest] = cluster
            distances[farthest, cluster] = 0.0

        trace.append(float(sum(distances[i, new_labels[i]] ** 2 for i in range(len(prepared)))))
        if labels is not None and np.array_equal(labels, new_labels):
            break
        labels = new_labels

        for cluster in range(k):
            members = [prepared[i] for i in range(len(prepared)) if labels[i] == cluster]
            run = barycenter_prepared(
                members, init_coords=centroids[cluster], solver=solver, thread_count=thread_count
            )
            centroids[cluster] = run.coords
    else:
        logger.warning(f"k-means stopped at the iteration cap ({max_iterations}) before stabilizing")

    distances = _distances_to(centroids, prepared, solver, thread_count)
    energies = tuple(
        float(sum(distances[i, cluster] ** 2 for i in range(len(prepared)) if labels[i] == cluster))
        for cluster in range(k)
    )
    logger.info(f"k-means with k={k}: {iterations} iteration(s), energy {sum(energies):.6g}")
    return ClusteringResult(
        assignments=tuple(int(label) for label in labels),
        centroids=tuple(to_raw_result(c, params)[0] for c in centroids),
        iterations=iterations,
        cluster_energies=energies,
        energy_trace=tuple(trace),
        seeds=tuple(seeds),
        centroid_coords=tuple(centroids),
    )


def _check_labels(labels_a: Sequence[int], labels_b: Sequence[int]) -> None:
    if len(labels_a) != len(labels_b):
        raise LengthMismatch(f"Label sequences differ in length: {len(labels_a)} vs {len(labels_b)}")
    if len(labels_a) == 0:
        raise InvalidParameter("Label sequences must not be empty")


def nmi(labels_a: Sequence[int], labels_b: Sequence[int]) -> float:
    """Normalized mutual information (arithmetic normalization)."""
    _check_labels(labels_a, labels_b)
    return float(normalized_mutual_info_score(labels_a, labels_b))


def ari(labels_a: Sequence[int], labels_b: Sequence[int]) -> float:
    _check_labels(labels_a, labels_b)
    return float(adjusted_rand_score(labels_a, labels_b))


# ===== TEMPORAL SEQUENCES =====


@dataclass(frozen=True)
class ReductionResult:
    kept: tuple[int, ...]
    removed: tuple[int, ...]
    distance_trace: tuple[float, ...]
    reconstructed: tuple[Bdt, ...]


class _SequenceModel:
    """Prepared frames plus memoized geodesic reconstruction costs."""

    def __init__(self, sequence: Sequence[Bdt], params: MetricParams, solver: str) -> None:
        self.params, self.solver = params, solver
        self.prepared = [prepare(bdt, params) for bdt in sequence]
        self._matchings: dict[tuple[int, int], TreeMatching] = {}
        self._costs: dict[tuple[int, int, int], float] = {}

    def matching(self, start: int, end: int) -> TreeMatching:
        if (start, end) not in self._matchings:
            self._matchings[(start, end)] = match_prepared(self.prepared[start], self.prepared[end], self.solver)
        return self._matchings[(start, end)]

    def reconstruct(self, start: int, end: int, frame: int) -> Bdt:
        alpha = (frame - start) / (end - start)
        coords = interpolate_prepared(self.prepared[start], self.prepared[end], self.matching(start, end), alpha)
        return denormalize(NormalizedBdt(bdt=coords)) if self.params.normalize else coords

    def cost2(self, start: int, end: int, frame: int) -> float:
        key = (start, end, frame)
        if key not in self._costs:
            rebuilt = prepare(self.reconstruct(start, end, frame), self.params)
            self._costs[key] = match_prepared(self.prepared[frame], rebuilt, self.solver).distance ** 2
        return self._costs[key]

    def distance(self, kept: Sequence[int]) -> float:
        total = 0.0
        for start, end in zip(kept, kept[1:], strict=False):
            for frame in range(start + 1, end):
                total += self.cost2(start, end, frame)
        return float(np.sqrt(total))


def _check_key_frames(kept: Sequence[int], length: int) -> list[int]:
    frames = [int(k) for k in kept]
    if not frames or frames[0] != 0 or frames[-1] != length - 1:
        raise InvalidKeyFrames(f"Key frames must start at 0 and end at {length - 1}, got {frames}")
    if any(b <= a for a, b in zip(frames, frames[1:], strict=False)):
        raise InvalidKeyFrames(f"Key frames must be strictly increasing, got {frames}")
    return frames


def sequence_distance(
    sequence: Sequence[Bdt],
    kept: Sequence[int],
    params: MetricParams | None = None,
    solver: str = SOLVER_EXACT,
) -> float:
    """
    Distance between a sequence and its reconstruction from key frames.

    Every dropped frame is replaced by the geodesic interpolation between its
    flanking key frames at its relative time position.
    """
    if not sequence:
        raise EmptyEnsemble("The sequence has no frame")
    frames = _check_key_frames(kept, len(sequence))
    return _SequenceModel(sequence, params or MetricParams(), solver).distance(frames)


def temporal_reduce(
    sequence: Sequence[Bdt],
    target_size: int,
    params: MetricParams | None = None,
    solver: str = SOLVER_EXACT,
) -> ReductionResult:
    """
    Greedy key frame selection.

    Starting from every frame, repeatedly drop the interior frame whose
    removal yields the smallest sequence distance (lowest index on ties)
    until `target_size` frames remain.
    """
    if not 2 <= target_size <= len(sequence):
        raise InvalidParameter(f"target_size must be in [2, {len(sequence)}], got {target_size}")

    model = _SequenceModel(sequence, params or MetricParams(), solver)
    kept = list(range(len(sequence)))
    removed: list[int] = []
    trace: list[float] = []
    while len(kept) > target_size:
        candidates = [(model.distance([k for k in kept if k != frame]), frame) for frame in kept[1:-1]]
        best_distance, best_frame = min(candidates)
        kept.remove(best_frame)
        removed.append(best_frame)
        trace.append(best_distance)
        logger.debug(f"Removed frame {best_frame}: d_S = {best_distance:.6g}")

    reconstructed = []
    for start, end in zip(kept, kept[1:], strict=False):
        reconstructed.append(sequence[start])
        reconstructed.extend(model.reconstruct(start, end, frame) for frame in range(start + 1, end))
    reconstructed.append(sequence[kept[-1]])
    return ReductionResult(
        kept=tuple(kept),
        removed=tuple(removed),
        distance_trace=tuple(trace),
        reconstructed=tuple(reconstructed),
    )


def track(
    sequence: Sequence[Bdt],
    params: MetricParams | None = None,
    solver: str = SOLVER_EXACT,
) -> list[TreeMatching]:
    """Matchings between consecutive frames, for feature tracking."""
    if len(sequence) < 2:
        raise InvalidParameter(f"Tracking needs at least 2 frames, got {len(sequence)}")
    params = params or MetricParams()
    prepared = [prepare(bdt, params) for bdt in sequence]
    return [match_prepared(a, b, solver) for a, b in zip(prepared, prepared[1:], strict=False)]


# ===== STABILITY AND SYNTHETIC ENSEMBLES =====


@dataclass(frozen=True)
class StabilityRow:
    eps1: float
    amplitude: float
    tree_distance: float
    diagram_distance: float


def stability_curve(
    scalar_field: ScalarField,
    amplitudes: Sequence[float],
    eps1_values: Sequence[float],
    seed: int | None = 0,
    params: MetricParams | None = None,
    kind: str = TREE_SPLIT,
    threshold: float = 0.0,
    solver: str = SOLVER_EXACT,
) -> list[StabilityRow]:
    """
    Distance between a field and noisy copies of it, per noise amplitude.

    Amplitudes are fractions of the data range. The tree distance is
    reported for every eps1 value; the diagram distance serves as reference.
    """
    params = params or MetricParams()
    base_tree = simplify(compute_merge_tree(scalar_field, kind), threshold)
    base_bdt = build_bdt(base_tree)
    data_range = scalar_field.data_range

    rows = []
    for amplitude in amplitudes:
        noisy = add_uniform_noise(scalar_field, amplitude * data_range, seed)
        noisy_tree = simplify(compute_merge_tree(noisy, kind), threshold)
        noisy_bdt = build_bdt(noisy_tree)
        reference, _ = diagram_distance(elder_pairs(base_tree), elder_pairs(noisy_tree))
        for eps1 in eps1_values:
            run_params = replace(params, eps1=float(eps1))
            matching = match_prepared(prepare(base_bdt, run_params), prepare(noisy_bdt, run_params), solver)
            rows.append(StabilityRow(float(eps1), float(amplitude), matching.distance, reference))
        logger.debug(f"Stability at amplitude {amplitude}: W^D_2 = {reference:.6g}")
    return rows


def transition_amplitude(
    amplitudes: Sequence[float],
    distances: Sequence[float],
    tolerance: float = STABILITY_TOLERANCE,
    fit_up_to: float = STABILITY_FIT_LIMIT,
) -> float | None:
    """
    First amplitude where a stability curve leaves its linear regime.

    A line through the origin is fitted by least squares on the positive
    amplitudes up to `fit_up_to`; the curve leaves the regime at the first
    amplitude whose distance deviates from the line by more than `tolerance`
    relative to the line.

    Returns:
        The amplitude, or None when the whole curve stays linear.
    """
    if len(amplitudes) != len(distances):
        raise LengthMismatch(f"Got {len(amplitudes)} amplitudes for {len(distances)} distances")
    a = np.asarray(amplitudes, dtype=float)
    d = np.asarray(distances, dtype=float)
    fitted = (a > 0) & (a <= fit_up_to)
    if not np.any(fitted):
        raise InvalidParameter(f"No positive amplitude up to {fit_up_to} to fit the linear regime on")
    slope = float(a[fitted] @ d[fitted] / (a[fitted] @ a[fitted]))

    for amplitude, distance in zip(a, d, strict=True):
        if amplitude <= 0:
            continue
        predicted = slope * amplitude
        deviation = abs(distance - predicted)
        if deviation > tolerance * predicted and deviation > 0:
            return float(amplitude)
    return None


def transitions(
    rows: Sequence[StabilityRow],
    tolerance: float = STABILITY_TOLERANCE,
    fit_up_to: float = STABILITY_FIT_LIMIT,
) -> dict[float, float | None]:
    """`transition_amplitude` of the tree distance curve of every eps1 value."""
    curves: dict[float, list[StabilityRow]] = {}
    for row in rows:
        curves.setdefault(row.eps1, []).append(row)
    return {
        eps1: transition_amplitude(
            [r.amplitude for r in curve], [r.tree_distance for r in curve], tolerance, fit_up_to
        )
        for eps1, curve in curves.items()
    }


def synth_ensemble(
    classes: int,
    members: int,
    noise: float,
    seed: int | None = 0,
    dims: Sequence[int] = (64, 64),
    layout: str = "ring",
) -> tuple[list[ScalarField], list[int]]:
    """
    Labelled Gaussian-mixture ensemble.

    With the ring layout, class c is a central bump with c + 1 satellites
    taken from max(classes, 4) ring slots, so classes differ by whole
    branches. The random layout draws c + 2 bumps at seeded random positions
    instead. Each member adds uniform noise of `noise` times the class data
    range; simplifying at SYNTH_SIMPLIFY_THRESHOLD removes it for noise up
    to 2%.

    Returns:
        Fields ordered class by class and their ground-truth labels.
    """
    if classes < 1 or members < 1 or noise < 0:
        raise InvalidParameter(f"Invalid ensemble request: {classes} classes, {members} members, noise {noise}")
    if layout not in ("ring", "random"):
        raise InvalidParameter(f"Unknown ensemble layout '{layout}'")

    rng = np.random.default_rng(seed)
    fields: list[ScalarField] = []
    labels: list[int] = []
    for label in range(classes):
        if layout == "ring":
            centers = ring_centers(dims, label + 1, slots=max(classes, 4))
        else:
            centers = random_centers(dims, label + 2, int(rng.integers(2**31)))
        base = synth_gaussian_mixture(dims, centers)
        for _ in range(members):
            fields.append(add_uniform_noise(base, noise * base.data_range, int(rng.integers(2**31))))
            labels.append(label)
    return fields, labels
