"""Metric service: distances, geodesics and barycenters of BDTs."""

import logging
from collections.abc import Sequence

import numpy as np

from app.topology.barycenter import BarycenterRun, barycenter
from app.topology.geodesic import GeodesicSample, geodesic_series
from app.topology.metric import TreeMatching, distance_matrix, mt_distance, mt_distance_parallel
from app.topology.tree import Bdt

from .base_service import BaseService, RunConfig

logger = logging.getLogger(__name__)


class MetricService(BaseService):
    """Service for comparing and averaging BDTs."""

    _instance = None

    def __init__(self):
        """Initialize the metric service."""
        super().__init__()

    @classmethod
    def get_instance(cls):
        """Get singleton instance of MetricService."""
        if cls._instance is None:
            cls._instance = cls()
        return cls._instance

    def distance(self, bdt_i: Bdt, bdt_j: Bdt, run: RunConfig | None = None) -> TreeMatching:
        """
        Distance and optimal matching between two BDTs.

        The branch-pair parallel computation is used when more than one
        thread is configured; both paths give identical results.
        """
        run = self._settings(run)
        logger.debug(f"Distance between BDTs of {len(bdt_i)} and {len(bdt_j)} branches")
        try:
            if run.threads > 1:
                return mt_distance_parallel(bdt_i, bdt_j, run.params, run.solver, run.threads)
            return mt_distance(bdt_i, bdt_j, run.params, run.solver)
        except Exception as e:
            logger.error(f"Error computing distance: {str(e)}")
            raise

    def geodesic(
        self, bdt_i: Bdt, bdt_j: Bdt, alphas: Sequence[float], run: RunConfig | None = None
    ) -> list[GeodesicSample]:
        """
        Samples along the geodesic between two BDTs.

        Args:
            bdt_i: Start of the path.
            bdt_j: End of the path.
            alphas: Positions in [0, 1].
            run: Run settings.

        Returns:
            One sample per alpha, in order.
        """
        run = self._settings(run)
        logger.debug(f"Sampling geodesic at {list(alphas)}")
        try:
            return geodesic_series(bdt_i, bdt_j, alphas, run.params, run.solver)
        except Exception as e:
            logger.error(f"Error sampling geodesic: {str(e)}")
            raise

    def distance_matrix(self, ensemble: Sequence[Bdt], run: RunConfig | None = None) -> np.ndarray:
        run = self._settings(run)
        logger.debug(f"Distance matrix of {len(ensemble)} member(s)")
        try:
            return distance_matrix(ensemble, run.params, run.solver, run.threads)
        except Exception as e:
            logger.error(f"Error computing distance matrix: {str(e)}")
            raise

    def barycenter(
        self,
        ensemble: Sequence[Bdt],
        weights: Sequence[float] | None = None,
        init_index: int | None = None,
        run: RunConfig | None = None,
    ) -> BarycenterRun:
        """
        Wasserstein barycenter of an ensemble.

        Args:
            ensemble: Member BDTs.
            weights: Barycentric weights; uniform when None.
            init_index: Member used as the initial candidate; the member of
                median total persistence when None.
            run: Run settings.

        Returns:
            The barycenter run with its energy trace and matchings.
        """
        run = self._settings(run)
        logger.debug(f"Barycenter of {len(ensemble)} member(s)")
        try:
            result = barycenter(
                ensemble,
                weights=weights,
                params=run.params,
                init_index=init_index,
                solver=run.solver,
                thread_count=run.threads,
                max_iterations=run.barycenter_max_iterations,
            )
        except Exception as e:
            logger.error(f"Error computing barycenter: {str(e)}")
            raise
        logger.info(f"Barycenter converged in {result.iterations} iteration(s), energy {result.energy:.6g}")
        return result
