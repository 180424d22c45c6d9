"""Regular-grid scalar fields and synthetic generators.

Values are stored flat in row-major order with axis 0 varying fastest, which
is the order of the field JSON format. Vertex comparisons use simulation of
simplicity: (value, vertex index) lexicographic order, so the raw values are
never modified.
"""

import itertools
import logging
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field

import numpy as np

from app.common.exceptions import DimensionMismatch, InvalidParameter, NonFiniteValue

logger = logging.getLogger(__name__)

Center = tuple[Sequence[float] | None, float, float]


@dataclass(frozen=True)
class ScalarField:
    """Piecewise-linear scalar function sampled on a regular grid."""

    dims: tuple[int, ...]
    values: np.ndarray
    spacing: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        if not 1 <= len(dims) <= 3 or any(d < 2 for d in dims):
            raise DimensionMismatch(f"Grid extents must have 1 to 3 axes of size >= 2, got {list(dims)}")

        values = np.array(self.values, dtype=float).ravel()
        if values.size != int(np.prod(dims)):
            raise DimensionMismatch(f"Expected {int(np.prod(dims))} values for dims {list(dims)}, got {values.size}")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise NonFiniteValue(f"Vertex {bad} has non-finite value {values[bad]}")
        values.setflags(write=False)

        spacing = tuple(float(s) for s in self.spacing) if self.spacing else (1.0,) * len(dims)
        if len(spacing) != len(dims):
            raise DimensionMismatch(f"Spacing has {len(spacing)} entries for {len(dims)} axes")

        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "spacing", spacing)

    @property
    def vertex_count(self) -> int:
        return int(self.values.size)

    @property
    def data_range(self) -> float:
        return float(self.values.max() - self.values.min())

    def grid(self) -> np.ndarray:
        """Values as an array indexed by grid coordinates (axis 0 first)."""
        return self.values.reshape(self.dims, order="F")

    def sweep_order(self, descending: bool = False) -> np.ndarray:
        """Vertex indices sorted by the simulation-of-simplicity comparator."""
        # lexsort sorts by the last key first: value, then index.
        order = np.lexsort((np.arange(self.vertex_count), self.values))
        return order[::-1] if descending else order

    def neighbors(self, vertex: int) -> Iterator[int]:
        """Vertices sharing an edge with `vertex` in the Freudenthal triangulation."""
        coords = np.unravel_index(vertex, self.dims, order="F")
        for offset in _freudenthal_offsets(len(self.dims)):
            neighbor = tuple(c + o for c, o in zip(coords, offset, strict=True))
            if all(0 <= n < d for n, d in zip(neighbor, self.dims, strict=True)):
                yield int(np.ravel_multi_index(neighbor, self.dims, order="F"))


def _freudenthal_offsets(ndim: int) -> list[tuple[int, ...]]:
    positive = [o for o in itertools.product((0, 1), repeat=ndim) if any(o)]
    return positive + [tuple(-c for c in o) for o in positive]


def synth_gaussian_mixture(
    dims: Sequence[int],
    centers: Sequence[Center],
    seed: int | None = None,
) -> ScalarField:
    """
    Sum of isotropic Gaussian bumps.

    Args:
        dims: Grid extents.
        centers: (position, amplitude, width) triples. Positions are in grid
            index units; a None position is drawn uniformly from the grid with
            the seeded generator.
        seed: Seed used only for centers without a position.

    Returns:
        The field sum_k A_k exp(-|x - c_k|^2 / (2 w_k^2)).
    """
    dims = tuple(int(d) for d in dims)
    rng = np.random.default_rng(seed)
    axes = np.meshgrid(*[np.arange(d, dtype=float) for d in dims], indexing="ij")
    total = np.zeros(dims)

    for position, amplitude, width in centers:
        if width <= 0 or amplitude <= 0:
            raise InvalidParameter(f"Gaussian bumps need positive amplitude and width, got ({amplitude}, {width})")
        if position is None:
            position = [rng.uniform(0, d - 1) for d in dims]
        if len(position) != len(dims):
            raise InvalidParameter(f"Center {list(position)} does not match {len(dims)} axes")
        squared = sum((axis - c) ** 2 for axis, c in zip(axes, position, strict=True))
        total += amplitude * np.exp(-squared / (2.0 * width**2))

    logger.debug(f"Synthesized {len(centers)}-bump field on grid {list(dims)}")
    return ScalarField(dims=dims, values=total.ravel(order="F"))


def random_centers(
    dims: Sequence[int],
    count: int,
    seed: int | None,
    amplitude_range: tuple[float, float] = (0.5, 1.0),
    width_ratio: float = 0.08,
) -> list[Center]:
    """Seeded bump placement for synthetic ensembles."""
    rng = np.random.default_rng(seed)
    width = width_ratio * min(dims)
    return [
        (
            [float(rng.uniform(0.15 * (d - 1), 0.85 * (d - 1))) for d in dims],
            float(rng.uniform(*amplitude_range)),
            width,
        )
        for _ in range(count)
    ]


def ring_centers(
    dims: Sequence[int],
    count: int,
    slots: int | None = None,
    amplitude_range: tuple[float, float] = (0.4, 0.7),
    radius_ratio: float = 0.35,
) -> list[Center]:
    """
    A unit bump at the grid center with `count` satellites on a ring around it.

    The ring lies in the plane of the first two axes and has `slots`
    positions (default `count`); satellite j sits in slot j with an amplitude
    decreasing linearly from the top of `amplitude_range` to its bottom over
    the slots. Every satellite merges directly with the central bump.
    """
    if len(dims) < 2:
        raise InvalidParameter(f"Ring layouts need at least 2 axes, got {len(dims)}")
    slots = count if slots is None else slots
    if not 0 <= count <= slots:
        raise InvalidParameter(f"Cannot place {count} satellites on {slots} ring slots")

    extent = min(dims) - 1
    middle = [(d - 1) / 2.0 for d in dims]
    low, high = amplitude_range
    centers: list[Center] = [(middle, 1.0, 0.1 * extent)]
    for j in range(count):
        angle = 2.0 * np.pi * j / slots
        position = list(middle)
        position[0] += radius_ratio * extent * float(np.cos(angle))
        position[1] += radius_ratio * extent * float(np.sin(angle))
        amplitude = high - (high - low) * j / (slots - 1) if slots > 1 else high
        centers.append((position, amplitude, 0.065 * extent))
    return centers


def synth_saddle_swap_field(plateau: int = 5, valley: int = 2000) -> ScalarField:
    """
    1D staircase whose two saddles share the same value.

    Three plateaus at 1.0, 0.75 and 0.5 are separated by a single vertex at 0
    and by a `valley` of vertices at 0, and the field ends on a vertex at
    -0.25. The tie puts the 0.5 plateau under the 0.75 one in the split tree;
    almost any perturbation makes the wide valley the lower saddle and hangs
    both smaller plateaus from the highest one instead.
    """
    if plateau < 1 or valley < 1:
        raise InvalidParameter(f"Plateau and valley widths must be >= 1, got {plateau} and {valley}")
    values = np.concatenate(
        [
            np.full(plateau, 1.0),
            [0.0],
            np.full(plateau, 0.75),
            np.zeros(valley),
            np.full(plateau, 0.5),
            [-0.25],
        ]
    )
    return ScalarField(dims=(values.size,), values=values)


def add_uniform_noise(scalar_field: ScalarField, amplitude: float, seed: int | None) -> ScalarField:
    """
    Perturb every vertex with i.i.d. uniform noise on [-amplitude, +amplitude].

    The infinity-norm distance between input and output never exceeds the
    amplitude.
    """
    if amplitude < 0:
        raise InvalidParameter(f"Noise amplitude must be >= 0, got {amplitude}")
    if amplitude == 0:
        return ScalarField(dims=scalar_field.dims, values=scalar_field.values.copy(), spacing=scalar_field.spacing)

    rng = np.random.default_rng(seed)
    noise = rng.uniform(-amplitude, amplitude, size=scalar_field.vertex_count)
    return ScalarField(dims=scalar_field.dims, values=scalar_field.values + noise, spacing=scalar_field.spacing)
