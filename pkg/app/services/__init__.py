"""Services for the merge tree toolkit."""

# Import all services for easy access
from .base_service import BaseService, RunConfig
from .ensemble_service import EnsembleService
from .metric_service import MetricService
from .tree_service import TreeExtraction, TreeService

__all__ = ["BaseService", "EnsembleService", "MetricService", "RunConfig", "TreeExtraction", "TreeService"]
