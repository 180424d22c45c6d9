"""
Subcommands of the mtw command line.

Each subcommand is registered on the shared subparsers object together with
its handler. Handlers receive the parsed arguments and the resolved
RunConfig, write their result (a JSON document, or CSV for distance
matrices) to --output or to stdout, and return the process exit code.
"""

import argparse
import json
import logging
import sys
from collections.abc import Callable, Sequence
from dataclasses import replace
from pathlib import Path
from typing import Any

from app.adapters.json_adapter import (
    bdt_to_dict,
    diagram_to_dict,
    load_any_bdt,
    load_ensemble,
    load_field,
    matching_to_dict,
    params_to_dict,
    run_to_dict,
    save_distance_matrix,
    save_run,
    tree_to_dict,
    write_json,
)
from app.constants import SOLVERS, STABILITY_FIT_LIMIT, SWAP_FIELD_SIMPLIFY_THRESHOLD, TREE_KINDS
from app.services import EnsembleService, MetricService, RunConfig, TreeService
from app.topology.ensemble import ari, nmi, transitions
from app.topology.field import synth_saddle_swap_field
from app.topology.preprocess import MetricParams

logger = logging.getLogger(__name__)

Handler = Callable[[argparse.Namespace, RunConfig], int]

DEFAULT_AMPLITUDES = "0.01,0.02,0.03,0.05,0.075,0.1,0.15,0.2,0.25,0.3"
DEFAULT_STABILITY_EPS1 = "0,0.05"


# ===== ARGUMENT TYPES =====


def float_list(text: str) -> list[float]:
    """Comma separated floats, e.g. `0,0.5,1`."""
    try:
        values = [float(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from e
    if not values:
        raise argparse.ArgumentTypeError("expected at least one number")
    return values


def int_list(text: str) -> list[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from e


def weights_arg(text: str) -> list[float] | None:
    """`uniform` or comma separated weights."""
    return None if text == "uniform" else float_list(text)


def common_options() -> argparse.ArgumentParser:
    """Flags shared by every subcommand; unset flags keep the configured defaults."""
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("run settings")
    group.add_argument("--eps1", type=float, help="saddle merging threshold")
    group.add_argument("--eps2", type=float, help="persistence ratio threshold for moving branches up")
    group.add_argument("--eps3", type=float, help="relative persistence guard for moving branches up")
    group.add_argument(
        "--no-normalize", dest="normalize", action="store_false", default=None, help="skip local normalization"
    )
    group.add_argument("--solver", choices=SOLVERS, help="assignment solver")
    group.add_argument("--threads", type=int, help="size of the metric task pool")
    group.add_argument("--seed", type=int, help="seed for every random choice")
    group.add_argument("--simplify", type=float, help="persistence simplification, fraction of the data range")
    group.add_argument("--kind", choices=TREE_KINDS, help="merge tree kind used for field inputs")
    group.add_argument("-o", "--output", help="output file (stdout when omitted)")
    return parent


def inputs_of(args: argparse.Namespace) -> Sequence[str]:
    if hasattr(args, "inputs"):
        return args.inputs
    return [args.field] if getattr(args, "field", None) else []


def resolve_run(args: argparse.Namespace, defaults: RunConfig) -> RunConfig:
    """Overlay the flags that were given on the configured defaults."""

    def pick(name: str, default: Any) -> Any:
        value = getattr(args, name, None)
        return default if value is None else value

    params = MetricParams(
        eps1=pick("eps1", defaults.params.eps1),
        eps2=pick("eps2", defaults.params.eps2),
        eps3=pick("eps3", defaults.params.eps3),
        normalize=pick("normalize", defaults.params.normalize),
    )
    return replace(
        defaults,
        command=args.command,
        inputs=tuple(str(p) for p in inputs_of(args)),
        params=params,
        solver=pick("solver", defaults.solver),
        threads=pick("threads", defaults.threads),
        seed=pick("seed", defaults.seed),
        simplify=pick("simplify", defaults.simplify),
        kind=pick("kind", defaults.kind),
        output=pick("output", defaults.output),
    )


# ===== OUTPUT =====


def emit(payload: dict[str, Any], run: RunConfig) -> None:
    if run.output:
        write_json(payload, run.output)
        logger.info(f"Wrote {run.output}")
    else:
        sys.stdout.write(json.dumps(payload, indent=2) + "\n")


def _header(run: RunConfig) -> dict[str, Any]:
    return {"command": run.command, "inputs": list(run.inputs), "params": params_to_dict(run.params)}


# ===== HANDLERS =====


def tree_command(args: argparse.Namespace, run: RunConfig) -> int:
    extraction = TreeService.get_instance().extract(load_field(args.field), run)
    emit(
        {
            **_header(run),
            "kind": run.kind,
            "simplify": run.simplify,
            "tree": tree_to_dict(extraction.tree),
            "diagram": diagram_to_dict(extraction.diagram),
            "bdt": bdt_to_dict(extraction.bdt),
        },
        run,
    )
    return 0


def distance_command(args: argparse.Namespace, run: RunConfig) -> int:
    service = MetricService.get_instance()
    pairwise = len(args.inputs) == 2 and all(Path(p).is_file() for p in args.inputs)
    if pairwise:
        bdt_i, bdt_j = (load_any_bdt(p, run.kind, run.simplify) for p in args.inputs)
        matching = service.distance(bdt_i, bdt_j, run)
        if run.output:
            write_json({**_header(run), **matching_to_dict(matching)}, run.output)
        sys.stdout.write(f"{matching.distance!r}\n")
        return 0

    names, ensemble = load_ensemble(args.inputs, run.kind, run.simplify)
    matrix = service.distance_matrix(ensemble, run)
    if run.output:
        save_distance_matrix(matrix, run.output, names)
    else:
        for row in matrix:
            sys.stdout.write(",".join(repr(float(v)) for v in row) + "\n")
    return 0


def geodesic_command(args: argparse.Namespace, run: RunConfig) -> int:
    bdt_i, bdt_j = (load_any_bdt(p, run.kind, run.simplify) for p in args.inputs)
    samples = MetricService.get_instance().geodesic(bdt_i, bdt_j, args.alpha, run)
    matching = samples[0].matching
    payload = {
        **_header(run),
        "distance": matching.distance,
        "matching": matching_to_dict(matching),
        "items": [run_to_dict(sample) for sample in samples],
    }
    emit(payload, run)
    return 0


def barycenter_command(args: argparse.Namespace, run: RunConfig) -> int:
    names, ensemble = load_ensemble(args.inputs, run.kind, run.simplify)
    result = MetricService.get_instance().barycenter(ensemble, args.weights, args.init, run)
    payload = {**_header(run), "members": names, **run_to_dict(result)}
    emit(payload, run)
    return 0


def cluster_command(args: argparse.Namespace, run: RunConfig) -> int:
    names, ensemble = load_ensemble(args.inputs, run.kind, run.simplify)
    result = EnsembleService.get_instance().cluster(ensemble, args.k, run)
    payload = {**_header(run), "members": names, "k": args.k, "seed": run.seed, **run_to_dict(result)}
    if args.labels is not None:
        payload["nmi"] = nmi(args.labels, result.assignments)
        payload["ari"] = ari(args.labels, result.assignments)
        logger.info(f"Clustering scores: NMI {payload['nmi']:.4f}, ARI {payload['ari']:.4f}")
    emit(payload, run)
    return 0


def reduce_command(args: argparse.Namespace, run: RunConfig) -> int:
    names, sequence = load_ensemble(args.inputs, run.kind, run.simplify)
    result = EnsembleService.get_instance().reduce(sequence, args.target, run)
    payload = {**_header(run), "frames": names, "target": args.target, **run_to_dict(result)}
    emit(payload, run)
    return 0


def track_command(args: argparse.Namespace, run: RunConfig) -> int:
    names, sequence = load_ensemble(args.inputs, run.kind, run.simplify)
    matchings = EnsembleService.get_instance().track(sequence, run)
    payload = {**_header(run), "frames": names, "items": [matching_to_dict(m) for m in matchings]}
    emit(payload, run)
    return 0


def stability_command(args: argparse.Namespace, run: RunConfig) -> int:
    if args.field is None:
        scalar_field = synth_saddle_swap_field()
        if args.simplify is None:
            run = replace(run, simplify=SWAP_FIELD_SIMPLIFY_THRESHOLD)
    else:
        scalar_field = load_field(args.field)
    rows = EnsembleService.get_instance().stability(scalar_field, args.amplitudes, args.eps1_values, run)
    found = transitions(rows) if any(0 < a <= STABILITY_FIT_LIMIT for a in args.amplitudes) else {}
    extra = {
        **_header(run),
        "seed": run.seed,
        "kind": run.kind,
        "transitions": [{"eps1": eps1, "amplitude": amplitude} for eps1, amplitude in found.items()],
    }
    if run.output:
        save_run(rows, run.output, extra)
    else:
        emit({**extra, "items": [run_to_dict(row) for row in rows]}, run)
    return 0


# ===== REGISTRATION =====


def _add(
    subparsers: Any, name: str, handler: Handler, help_text: str, parent: argparse.ArgumentParser
) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(name, help=help_text, description=help_text, parents=[parent])
    parser.set_defaults(handler=handler)
    return parser


def register_commands(subparsers: Any) -> None:
    """Register every subcommand on the given subparsers object."""
    parent = common_options()

    parser = _add(subparsers, "tree", tree_command, "merge tree, diagram and BDT of a field", parent)
    parser.add_argument("field", help="field JSON file")

    parser = _add(subparsers, "distance", distance_command, "distance between two trees, or a distance matrix", parent)
    parser.add_argument("inputs", nargs="+", help="two files, or files/directories forming an ensemble")

    parser = _add(subparsers, "geodesic", geodesic_command, "samples along the geodesic between two trees", parent)
    parser.add_argument("inputs", nargs=2, help="start and end files")
    parser.add_argument("--alpha", type=float_list, default=[0.0, 0.25, 0.5, 0.75, 1.0], help="e.g. 0,0.5,1")

    parser = _add(subparsers, "barycenter", barycenter_command, "Wasserstein barycenter of an ensemble", parent)
    parser.add_argument("inputs", nargs="+", help="member files or directories")
    parser.add_argument("--weights", type=weights_arg, default=None, help="'uniform' or comma separated weights")
    parser.add_argument("--init", type=int, default=None, help="index of the initial member")

    parser = _add(subparsers, "cluster", cluster_command, "k-means clustering of an ensemble", parent)
    parser.add_argument("inputs", nargs="+", help="member files or directories")
    parser.add_argument("-k", type=int, required=True, help="number of clusters")
    parser.add_argument("--labels", type=int_list, default=None, help="ground-truth labels to score against")

    parser = _add(subparsers, "reduce", reduce_command, "key frame selection on a sequence", parent)
    parser.add_argument("inputs", nargs="+", help="frame files or directories, in sequence order")
    parser.add_argument("--target", type=int, required=True, help="number of key frames to keep")

    parser = _add(subparsers, "track", track_command, "feature tracking between consecutive frames", parent)
    parser.add_argument("inputs", nargs="+", help="frame files or directories, in sequence order")

    parser = _add(subparsers, "stability", stability_command, "distance to noisy copies of a field", parent)
    parser.add_argument("field", nargs="?", help="field JSON file (the built-in saddle swap field when omitted)")
    parser.add_argument(
        "--amplitudes",
        type=float_list,
        default=float_list(DEFAULT_AMPLITUDES),
        help="noise amplitudes, fractions of the data range",
    )
    parser.add_argument(
        "--eps1-values", type=float_list, default=float_list(DEFAULT_STABILITY_EPS1), help="eps1 values to sweep"
    )
