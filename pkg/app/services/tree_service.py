"""Tree service: merge trees, diagrams and BDTs from scalar fields."""

import logging
from dataclasses import dataclass

from app.topology.field import ScalarField
from app.topology.tree import Bdt, Diagram, MergeTree, build_bdt, compute_merge_tree, elder_pairs, simplify

from .base_service import BaseService, RunConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TreeExtraction:
    tree: MergeTree
    diagram: Diagram
    bdt: Bdt


class TreeService(BaseService):
    """Service for extracting topological abstractions from fields."""

    _instance = None

    def __init__(self):
        """Initialize the tree service."""
        super().__init__()

    @classmethod
    def get_instance(cls):
        """Get singleton instance of TreeService."""
        if cls._instance is None:
            cls._instance = cls()
        return cls._instance

    def extract(self, scalar_field: ScalarField, run: RunConfig | None = None) -> TreeExtraction:
        """
        Compute the simplified merge tree of a field with its diagram and BDT.

        Args:
            scalar_field: The input field.
            run: Run settings; `kind` and `simplify` are used.

        Returns:
            Tree, diagram and BDT of the field.
        """
        run = self._settings(run)
        logger.debug(f"Extracting {run.kind} tree from a {list(scalar_field.dims)} field")
        try:
            tree = simplify(compute_merge_tree(scalar_field, run.kind), run.simplify)
            extraction = TreeExtraction(tree=tree, diagram=elder_pairs(tree), bdt=build_bdt(tree))
        except Exception as e:
            logger.error(f"Error extracting merge tree: {str(e)}")
            raise
        logger.info(f"Extracted {len(extraction.bdt)} branch(es) at simplification {run.simplify}")
        return extraction
