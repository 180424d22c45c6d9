"""
File adapter for the merge tree toolkit.

Reads and writes every on-disk format the toolkit exchanges: scalar fields,
merge trees, BDTs and matchings as JSON, run results (barycenters,
clusterings, reductions, tracking, stability sweeps) as JSON documents and
distance matrices as CSV. Malformed inputs surface as ParseError; value
checks (dimensions, finiteness, nesting) stay with the domain types.
"""

import csv
import json
import logging
from collections.abc import Sequence
from functools import singledispatch
from pathlib import Path
from typing import Any

import numpy as np

from app.common.exceptions import MergeTreeError, ParseError
from app.constants import NODE_LEAF, NODE_ROOT, NODE_SADDLE, TREE_JOIN, TREE_KINDS
from app.topology.barycenter import BarycenterRun
from app.topology.ensemble import ClusteringResult, ReductionResult, StabilityRow
from app.topology.field import ScalarField
from app.topology.geodesic import GeodesicSample
from app.topology.metric import TreeMatching
from app.topology.preprocess import MetricParams
from app.topology.tree import Bdt, Branch, Diagram, MergeTree, TreeNode, build_bdt, field_to_bdt, simplify

logger = logging.getLogger(__name__)

PathLike = str | Path


# ===== RAW JSON =====


def read_json(path: PathLike) -> Any:
    """Load a JSON document, mapping IO and syntax failures to ParseError."""
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError as e:
        raise ParseError(f"File not found: {path}") from e
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as e:
        logger.error(f"Error reading {path}: {str(e)}")
        raise ParseError(f"Cannot parse {path}: {e}") from e


def write_json(payload: Any, path: PathLike) -> Path:
    """Write a JSON document with a stable layout; parent folders are created."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")
    logger.debug(f"Wrote {path}")
    return path


def _require(payload: Any, key: str, where: str) -> Any:
    if not isinstance(payload, dict) or key not in payload:
        raise ParseError(f"Missing '{key}' in {where}")
    return payload[key]


def _as_float(value: Any, where: str) -> float:
    # NaN/Infinity strings are accepted here and rejected by the domain checks.
    if isinstance(value, bool):
        raise ParseError(f"Expected a number in {where}, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError) as e:
        raise ParseError(f"Expected a number in {where}, got {value!r}") from e


def _as_int(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int | float) or int(value) != value:
        raise ParseError(f"Expected an integer in {where}, got {value!r}")
    return int(value)


def _kind(payload: Any, where: str) -> str:
    kind = payload.get("kind", TREE_JOIN) if isinstance(payload, dict) else None
    if kind not in TREE_KINDS:
        raise ParseError(f"'kind' must be one of {list(TREE_KINDS)} in {where}, got {kind!r}")
    return kind


def _arcs(payload: Any, where: str) -> list[tuple[int, int]]:
    arcs = payload.get("arcs", []) if isinstance(payload, dict) else None
    if not isinstance(arcs, list):
        raise ParseError(f"'arcs' must be a list in {where}")
    pairs = []
    for arc in arcs:
        if not isinstance(arc, list | tuple) or len(arc) != 2:
            raise ParseError(f"Arcs must be [parent, child] pairs in {where}, got {arc!r}")
        pairs.append((_as_int(arc[0], where), _as_int(arc[1], where)))
    return pairs


# ===== FIELDS =====


def field_to_dict(scalar_field: ScalarField) -> dict[str, Any]:
    return {
        "dims": list(scalar_field.dims),
        "values": [float(v) for v in scalar_field.values],
        "spacing": list(scalar_field.spacing),
    }


def field_from_dict(payload: Any, where: str = "field") -> ScalarField:
    dims = _require(payload, "dims", where)
    values = _require(payload, "values", where)
    if not isinstance(dims, list) or not isinstance(values, list):
        raise ParseError(f"'dims' and 'values' must be lists in {where}")
    spacing = payload.get("spacing") or ()
    return ScalarField(
        dims=tuple(_as_int(d, where) for d in dims),
        values=np.array([_as_float(v, where) for v in values], dtype=float),
        spacing=tuple(_as_float(s, where) for s in spacing),
    )


def load_field(path: PathLike) -> ScalarField:
    """
    Load a scalar field from its JSON file.

    Raises:
        ParseError: The file is missing or malformed.
        DimensionMismatch: The value count does not match the grid extents.
        NonFiniteValue: A value is NaN or infinite.
    """
    return field_from_dict(read_json(path), where=str(path))


def save_field(scalar_field: ScalarField, path: PathLike) -> Path:
    return write_json(field_to_dict(scalar_field), path)


# ===== MERGE TREES =====


def tree_to_dict(tree: MergeTree) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "kind": tree.kind,
        "nodes": [{"id": n.id, "scalar": n.scalar, "vertex": n.vertex} for n in tree.nodes],
        "arcs": [[parent, child] for child, parent in sorted(tree.parents.items())],
    }
    if tree.death_overrides:
        payload["death_overrides"] = {str(leaf): value for leaf, value in sorted(tree.death_overrides.items())}
    return payload


def tree_from_dict(payload: Any, where: str = "tree") -> MergeTree:
    kind = _kind(payload, where)
    raw_nodes = _require(payload, "nodes", where)
    if not isinstance(raw_nodes, list):
        raise ParseError(f"'nodes' must be a list in {where}")

    parents: dict[int, int] = {}
    for parent, child in _arcs(payload, where):
        if child in parents:
            raise ParseError(f"Node {child} has two parents in {where}")
        parents[child] = parent
    has_children = set(parents.values())

    nodes = []
    for raw in raw_nodes:
        node_id = _as_int(_require(raw, "id", where), where)
        vertex = raw.get("vertex")
        if node_id not in parents:
            node_kind = NODE_ROOT
        elif node_id in has_children:
            node_kind = NODE_SADDLE
        else:
            node_kind = NODE_LEAF
        nodes.append(
            TreeNode(
                id=node_id,
                scalar=_as_float(_require(raw, "scalar", where), where),
                vertex=None if vertex is None else _as_int(vertex, where),
                kind=node_kind,
            )
        )

    overrides = payload.get("death_overrides") or {}
    try:
        death_overrides = {int(leaf): _as_float(value, where) for leaf, value in overrides.items()}
    except (AttributeError, ValueError) as e:
        raise ParseError(f"Malformed 'death_overrides' in {where}") from e
    return MergeTree(kind=kind, nodes=tuple(nodes), parents=parents, death_overrides=death_overrides)


def load_tree(path: PathLike) -> MergeTree:
    return tree_from_dict(read_json(path), where=str(path))


def save_tree(tree: MergeTree, path: PathLike) -> Path:
    return write_json(tree_to_dict(tree), path)


# ===== BDTS =====


def bdt_to_dict(bdt: Bdt) -> dict[str, Any]:
    branches = []
    for b in bdt.branches:
        entry: dict[str, Any] = {"id": int(b.id), "birth": float(b.birth), "death": float(b.death)}
        if b.node is not None:
            entry["node"] = int(b.node)
        branches.append(entry)
    return {
        "kind": bdt.kind,
        "branches": branches,
        "arcs": [[int(b.parent), int(b.id)] for b in bdt.branches if b.parent is not None],
    }


def bdt_from_dict(payload: Any, where: str = "bdt") -> Bdt:
    raw_branches = _require(payload, "branches", where)
    if not isinstance(raw_branches, list):
        raise ParseError(f"'branches' must be a list in {where}")

    parents: dict[int, int] = {}
    for parent, child in _arcs(payload, where):
        if child in parents:
            raise ParseError(f"Branch {child} has two parents in {where}")
        parents[child] = parent

    branches = []
    for raw in raw_branches:
        branch_id = _as_int(_require(raw, "id", where), where)
        node = raw.get("node")
        branches.append(
            Branch(
                id=branch_id,
                birth=_as_float(_require(raw, "birth", where), where),
                death=_as_float(_require(raw, "death", where), where),
                parent=parents.get(branch_id),
                node=None if node is None else _as_int(node, where),
            )
        )
    return Bdt(branches=tuple(branches), kind=_kind(payload, where))


def load_bdt(path: PathLike) -> Bdt:
    return bdt_from_dict(read_json(path), where=str(path))


def save_bdt(bdt: Bdt, path: PathLike) -> Path:
    return write_json(bdt_to_dict(bdt), path)


def bdt_from_any(payload: Any, where: str, kind: str, threshold: float) -> Bdt:
    """
    Turn a field, merge tree or BDT document into a BDT.

    Fields are converted with the given merge tree kind; fields and trees are
    simplified at `threshold` (fraction of the data range) first.
    """
    if isinstance(payload, dict) and "branches" in payload:
        return bdt_from_dict(payload, where)
    if isinstance(payload, dict) and "nodes" in payload:
        return build_bdt(simplify(tree_from_dict(payload, where), threshold))
    if isinstance(payload, dict) and "dims" in payload:
        return field_to_bdt(field_from_dict(payload, where), kind, threshold)
    raise ParseError(f"{where} is neither a field, a merge tree nor a BDT document")


def load_any_bdt(path: PathLike, kind: str, threshold: float = 0.0) -> Bdt:
    return bdt_from_any(read_json(path), str(path), kind, threshold)


def list_inputs(path: PathLike) -> list[Path]:
    """JSON files of a directory in lexicographic order, or the file itself."""
    path = Path(path)
    if path.is_file():
        return [path]
    if not path.is_dir():
        raise ParseError(f"No such file or directory: {path}")
    return sorted(p for p in path.iterdir() if p.is_file() and p.suffix == ".json")


def load_ensemble(paths: Sequence[PathLike], kind: str, threshold: float = 0.0) -> tuple[list[str], list[Bdt]]:
    """
    Load an ensemble from files and/or directories, in the order given.

    Directories contribute their JSON files in lexicographic order.

    Returns:
        File names and their BDTs.
    """
    names: list[str] = []
    bdts: list[Bdt] = []
    for entry in paths:
        for file in list_inputs(entry):
            try:
                bdts.append(load_any_bdt(file, kind, threshold))
            except MergeTreeError as e:
                logger.error(f"Error loading ensemble member {file}: {str(e)}")
                raise
            names.append(file.name)
    logger.info(f"Loaded {len(bdts)} ensemble member(s)")
    return names, bdts


# ===== MATCHINGS AND DIAGRAMS =====


def matching_to_dict(matching: TreeMatching) -> dict[str, Any]:
    return {
        "metric": matching.metric,
        "distance": float(matching.distance),
        "matched": [[int(i), int(j)] for i, j in matching.matched],
        "destroyed": [int(i) for i in matching.destroyed],
        "created": [int(j) for j in matching.created],
    }


def matching_from_dict(payload: Any, where: str = "matching") -> TreeMatching:
    matched = _require(payload, "matched", where)
    if not isinstance(matched, list) or any(not isinstance(m, list | tuple) or len(m) != 2 for m in matched):
        raise ParseError(f"'matched' must be a list of [i, j] pairs in {where}")
    return TreeMatching(
        distance=_as_float(_require(payload, "distance", where), where),
        matched=tuple((_as_int(i, where), _as_int(j, where)) for i, j in matched),
        destroyed=tuple(_as_int(i, where) for i in payload.get("destroyed", [])),
        created=tuple(_as_int(j, where) for j in payload.get("created", [])),
        metric=payload.get("metric", "W^N_2"),
    )


def load_matching(path: PathLike) -> TreeMatching:
    return matching_from_dict(read_json(path), where=str(path))


def save_matching(matching: TreeMatching, path: PathLike) -> Path:
    return write_json(matching_to_dict(matching), path)


def diagram_to_dict(diagram: Diagram) -> dict[str, Any]:
    return {"kind": diagram.kind, "pairs": [[p.birth, p.death] for p in diagram.pairs]}


def params_to_dict(params: MetricParams) -> dict[str, Any]:
    return {
        "eps1": params.eps1,
        "eps2": params.eps2,
        "eps3": params.eps3,
        "normalize": params.normalize,
        "metric": params.label(),
    }


# ===== RUN DOCUMENTS =====


@singledispatch
def run_to_dict(run: Any) -> dict[str, Any]:
    raise TypeError(f"No JSON layout for {type(run).__name__}")


@run_to_dict.register
def _(run: BarycenterRun) -> dict[str, Any]:
    return {
        "params": params_to_dict(run.params),
        "init_index": run.init_index,
        "weights": list(run.weights),
        "energy": run.energy,
        "iterations": run.iterations,
        "energy_trace": [float(e) for e in run.energy_trace],
        "barycenter": bdt_to_dict(run.result),
        "merge_tree": None if run.merge_tree is None else tree_to_dict(run.merge_tree),
        "matchings": [matching_to_dict(m) for m in run.matchings],
    }


@run_to_dict.register
def _(run: ClusteringResult) -> dict[str, Any]:
    return {
        "assignments": [int(a) for a in run.assignments],
        "iterations": run.iterations,
        "energy": run.energy,
        "cluster_energies": list(run.cluster_energies),
        "energy_trace": [float(e) for e in run.energy_trace],
        "seeds": [int(s) for s in run.seeds],
        "centroids": [bdt_to_dict(c) for c in run.centroids],
    }


@run_to_dict.register
def _(run: ReductionResult) -> dict[str, Any]:
    return {
        "kept": [int(i) for i in run.kept],
        "removed": [int(i) for i in run.removed],
        "distance_trace": list(run.distance_trace),
        "reconstructed": [bdt_to_dict(b) for b in run.reconstructed],
    }


@run_to_dict.register
def _(run: GeodesicSample) -> dict[str, Any]:
    return {"alpha": run.alpha, "bdt": bdt_to_dict(run.bdt)}


@run_to_dict.register
def _(run: StabilityRow) -> dict[str, Any]:
    return {
        "eps1": run.eps1,
        "amplitude": run.amplitude,
        "tree_distance": run.tree_distance,
        "diagram_distance": run.diagram_distance,
    }


@run_to_dict.register
def _(run: TreeMatching) -> dict[str, Any]:
    return matching_to_dict(run)


def save_run(run: Any, path: PathLike, extra: dict[str, Any] | None = None) -> Path:
    """
    Write a run result as JSON.

    Args:
        run: A barycenter run, clustering, reduction, or a list of geodesic
            samples, tracking matchings or stability rows.
        path: Output file.
        extra: Additional top-level entries (inputs, scores, ...).

    Returns:
        The written path.
    """
    if isinstance(run, list | tuple):
        payload: dict[str, Any] = {"items": [run_to_dict(item) for item in run]}
    else:
        payload = run_to_dict(run)
    if extra:
        payload = {**extra, **payload}
    return write_json(payload, path)


# ===== CSV =====


def save_distance_matrix(matrix: np.ndarray, path: PathLike, names: Sequence[str] | None = None) -> Path:
    """Write a square distance matrix as CSV, with a header row of member names."""
    matrix = np.asarray(matrix, dtype=float)
    names = list(names) if names is not None else [str(i) for i in range(matrix.shape[0])]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["", *names])
        for name, row in zip(names, matrix, strict=True):
            writer.writerow([name, *(repr(float(v)) for v in row)])
    logger.debug(f"Wrote {matrix.shape[0]}x{matrix.shape[1]} distance matrix to {path}")
    return path


def load_distance_matrix(path: PathLike) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    try:
        with path.open(encoding="utf-8", newline="") as handle:
            rows = list(csv.reader(handle))
        names = rows[0][1:]
        matrix = np.array([[float(v) for v in row[1:]] for row in rows[1:]], dtype=float)
    except (OSError, IndexError, ValueError) as e:
        raise ParseError(f"Cannot parse distance matrix {path}: {e}") from e
    return names, matrix.reshape(len(names), len(names))
