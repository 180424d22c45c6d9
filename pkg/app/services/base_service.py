"""Base service for the merge tree toolkit."""

import logging
from dataclasses import dataclass, field

from app.common.exceptions import InvalidParameter
from app.config.config import config
from app.constants import (
    BARYCENTER_MAX_ITERATIONS,
    KMEANS_MAX_ITERATIONS,
    SOLVER_EXACT,
    SOLVERS,
    TREE_KINDS,
    TREE_SPLIT,
)
from app.topology.preprocess import MetricParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    """
    Settings of one run.

    Defaults come from the configuration scope; the CLI replaces the fields
    its flags set.
    """

    command: str = ""
    inputs: tuple[str, ...] = ()
    params: MetricParams = field(default_factory=MetricParams)
    solver: str = SOLVER_EXACT
    threads: int = 1
    seed: int = 0
    simplify: float = 0.0
    kind: str = TREE_SPLIT
    output: str | None = None
    barycenter_max_iterations: int = BARYCENTER_MAX_ITERATIONS
    kmeans_max_iterations: int = KMEANS_MAX_ITERATIONS

    def __post_init__(self) -> None:
        if self.solver not in SOLVERS:
            raise InvalidParameter(f"Unknown solver '{self.solver}', expected one of {list(SOLVERS)}")
        if self.kind not in TREE_KINDS:
            raise InvalidParameter(f"Unknown merge tree kind '{self.kind}'")
        if self.threads < 1:
            raise InvalidParameter(f"threads must be >= 1, got {self.threads}")
        if not 0.0 <= self.simplify <= 1.0:
            raise InvalidParameter(f"simplify must be in [0, 1], got {self.simplify}")

    @classmethod
    def from_config(cls) -> "RunConfig":
        """Defaults of the active configuration scope."""
        return cls(
            params=MetricParams(
                eps1=float(config.get("EPS1")),
                eps2=float(config.get("EPS2")),
                eps3=float(config.get("EPS3")),
                normalize=bool(config.get("NORMALIZE")),
            ),
            solver=config.get("DEFAULT_SOLVER"),
            threads=int(config.get("THREADS")),
            seed=int(config.get("SEED")),
            simplify=float(config.get("SIMPLIFY_THRESHOLD")),
            barycenter_max_iterations=int(config.get("BARYCENTER_MAX_ITERATIONS")),
            kmeans_max_iterations=int(config.get("KMEANS_MAX_ITERATIONS")),
        )


class BaseService:
    """Base service class holding the run settings shared by every service."""

    def __init__(self):
        """Initialize the base service with the configured defaults."""
        self.defaults = RunConfig.from_config()

    def _settings(self, run: RunConfig | None) -> RunConfig:
        return run if run is not None else self.defaults
