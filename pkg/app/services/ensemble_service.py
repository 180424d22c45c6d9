"""Ensemble service: clustering, temporal reduction, tracking and stability sweeps."""

import logging
from collections.abc import Sequence

from app.topology.ensemble import (
    ClusteringResult,
    ReductionResult,
    StabilityRow,
    kmeans,
    stability_curve,
    temporal_reduce,
    track,
)
from app.topology.field import ScalarField
from app.topology.metric import TreeMatching
from app.topology.tree import Bdt

from .base_service import BaseService, RunConfig

logger = logging.getLogger(__name__)


class EnsembleService(BaseService):
    """Service for ensemble and time-varying analyses."""

    _instance = None

    def __init__(self):
        """Initialize the ensemble service."""
        super().__init__()

    @classmethod
    def get_instance(cls):
        """Get singleton instance of EnsembleService."""
        if cls._instance is None:
            cls._instance = cls()
        return cls._instance

    def cluster(self, ensemble: Sequence[Bdt], k: int, run: RunConfig | None = None) -> ClusteringResult:
        """
        k-means clustering of BDTs with barycenter centroids.

        Args:
            ensemble: Member BDTs.
            k: Number of clusters.
            run: Run settings; the seed drives centroid seeding.

        Returns:
            Assignments, centroids and energies.
        """
        run = self._settings(run)
        logger.debug(f"Clustering {len(ensemble)} member(s) into {k} cluster(s)")
        try:
            result = kmeans(
                ensemble,
                k,
                params=run.params,
                seed=run.seed,
                solver=run.solver,
                thread_count=run.threads,
                max_iterations=run.kmeans_max_iterations,
            )
        except Exception as e:
            logger.error(f"Error clustering ensemble: {str(e)}")
            raise
        logger.info(f"Clustering finished after {result.iterations} iteration(s), energy {result.energy:.6g}")
        return result

    def reduce(self, sequence: Sequence[Bdt], target_size: int, run: RunConfig | None = None) -> ReductionResult:
        run = self._settings(run)
        logger.debug(f"Reducing a sequence of {len(sequence)} frame(s) to {target_size}")
        try:
            return temporal_reduce(sequence, target_size, run.params, run.solver)
        except Exception as e:
            logger.error(f"Error reducing sequence: {str(e)}")
            raise

    def track(self, sequence: Sequence[Bdt], run: RunConfig | None = None) -> list[TreeMatching]:
        run = self._settings(run)
        logger.debug(f"Tracking features over {len(sequence)} frame(s)")
        try:
            return track(sequence, run.params, run.solver)
        except Exception as e:
            logger.error(f"Error tracking sequence: {str(e)}")
            raise

    def stability(
        self,
        scalar_field: ScalarField,
        amplitudes: Sequence[float],
        eps1_values: Sequence[float],
        run: RunConfig | None = None,
    ) -> list[StabilityRow]:
        """
        Tree and diagram distances between a field and noisy copies of it.

        Args:
            scalar_field: The reference field.
            amplitudes: Noise amplitudes as fractions of the data range.
            eps1_values: Saddle merging thresholds to sweep.
            run: Run settings; the seed drives the noise.

        Returns:
            One row per (eps1, amplitude).
        """
        run = self._settings(run)
        logger.debug(f"Stability sweep over {len(amplitudes)} amplitude(s) and {len(eps1_values)} eps1 value(s)")
        try:
            return stability_curve(
                scalar_field,
                amplitudes,
                eps1_values,
                seed=run.seed,
                params=run.params,
                kind=run.kind,
                threshold=run.simplify,
                solver=run.solver,
            )
        except Exception as e:
            logger.error(f"Error running stability sweep: {str(e)}")
            raise
