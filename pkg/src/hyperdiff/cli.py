"""Command-line interface.

Subcommands::

    hyperdiff distance   --graph tree.edges --out hdd.csv
    hyperdiff embed      --features cells.csv --out cells.hde
    hyperdiff eval       --distances hdd.csv --graph tree.edges
    hyperdiff classify   --distances hdd.csv --labels labels.csv
    hyperdiff synth-tree --branching 2 --depth 5 --out tree.edges

Pipeline options may also come from ``--config file.json`` (a flat mapping
or a manifest written by a previous run); flags given on the command line
win. Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from hyperdiff import __version__
from hyperdiff.diffusion import write_densities
from hyperdiff.errors import DataError, NumericalError
from hyperdiff.evaluation import (
    EvalReport,
    SplitSpec,
    average_distortion,
    balanced_tree,
    gromov_delta,
    mean_average_precision,
    medoid_classify,
    shortest_paths,
)
from hyperdiff.ingest import read_edge_list, read_labels, write_edge_list
from hyperdiff.io import read_distance_matrix, write_distance_matrix, write_embedding
from hyperdiff.pipeline import PipelineConfig, PipelineError, run_pipeline

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit with 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _max_scale(value: str) -> int | str:
    if value == "auto":
        return value
    k = int(value)
    if k < 0:
        raise argparse.ArgumentTypeError("K must be nonnegative")
    return k


def _add_pipeline_options(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    src = p.add_argument_group("input (exactly one)")
    src.add_argument("--graph", default=S, help="edge list; diffusion operator is exp(-L)")
    src.add_argument("--features", default=S, help="CSV of points; Gaussian kernel on ambient distances")
    src.add_argument("--distances", default=S, help="precomputed distance matrix (CSV or binary)")
    p.add_argument("--config", help="JSON file with pipeline options (flags override it)")
    p.add_argument("--unweighted", dest="weighted", action="store_false", default=S,
                   help="ignore a third edge-list column")
    p.add_argument("--has-header", dest="has_header", action="store_true", default=S)
    p.add_argument("--metric", choices=["cosine", "euclidean"], default=S)
    p.add_argument("--cosine-form", dest="cosine_form", choices=["one_minus", "arccos"], default=S)
    p.add_argument("--eps-scale", dest="eps_scale", type=float, default=S,
                   help="kernel scale = this multiple of the median squared distance (default 1)")
    p.add_argument("--laplacian", choices=["unnormalized", "symmetric"], default=S)
    p.add_argument("--alpha", type=float, default=S, help="scale exponent in (0, 1), default 0.5")
    p.add_argument("-K", "--max-scale", dest="max_scale", type=_max_scale, default=S,
                   help="largest dyadic scale, or 'auto' (default: 3 for n <= 600, else 10)")
    p.add_argument("--auto-tol", dest="auto_tol", type=float, default=S)
    p.add_argument("--variant", choices=["hdd", "l2_product", "single_scale", "euclidean"], default=S)
    p.add_argument("--scale", type=int, default=S, help="scale index for --variant single_scale")
    p.add_argument("--negative-policy", dest="negative_policy", choices=["auto", "error", "clip"], default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--workers", type=int, default=S, help="threads (default: all cores)")
    p.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")


def _pipeline_config(args: argparse.Namespace, out_keys: Sequence[str]) -> tuple[PipelineConfig, dict]:
    settings: dict[str, Any] = {}
    outputs: dict[str, Any] = {}
    if args.config:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if "config" in data:
            outputs = dict(data.get("output_options", {}))
            data = data["config"]
        settings.update(data)
    skip = {"command", "config", "manifest", "func", *out_keys}
    for key, value in vars(args).items():
        if key not in skip:
            settings[key] = value
    for key in out_keys:
        value = getattr(args, key, None)
        if value is not None:
            outputs[key] = value
    try:
        cfg = PipelineConfig.from_dict(settings)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    return cfg, outputs


def _write_manifest(path: Path, command: str, cfg: PipelineConfig, outputs: dict, result, written: list[str]) -> None:
    manifest = {
        "tool": "hyperdiff",
        "version": __version__,
        "command": command,
        "config": cfg.to_dict(),
        "output_options": outputs,
        "inputs": {cfg.input_path: _sha256(cfg.input_path)},
        "outputs": {p: _sha256(p) for p in written},
        "resolved": {
            "n": len(result.node_names),
            "max_scale": result.max_scale,
            "negative_policy": result.negative_policy,
            "epsilon": result.epsilon,
            "heights": [float(h) for h in result.embedding.heights],
        },
        "node_names": result.node_names,
        "timings_s": {k: round(v, 6) for k, v in result.timings.items()},
    }
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def cmd_distance(args: argparse.Namespace) -> int:
    cfg, outputs = _pipeline_config(args, ("out", "format"))
    if "out" not in outputs:
        raise UsageError("--out is required (or output_options.out in the config)")
    fmt = outputs.get("format", "csv")
    result = run_pipeline(cfg)
    out = outputs["out"]
    write_distance_matrix(result.distances, out, fmt)
    manifest = Path(args.manifest or f"{out}.manifest.json")
    outputs.setdefault("format", fmt)
    _write_manifest(manifest, "distance", cfg, outputs, result, [out])
    print(f"wrote {out} ({len(result.node_names)} points, K={result.max_scale}) and {manifest}")
    return EXIT_OK


def cmd_embed(args: argparse.Namespace) -> int:
    cfg, outputs = _pipeline_config(args, ("out", "densities_out"))
    if "out" not in outputs:
        raise UsageError("--out is required (or output_options.out in the config)")
    result = run_pipeline(cfg)
    out = outputs["out"]
    sidecar = write_embedding(result.embedding, out)
    written = [out, str(sidecar)]
    if outputs.get("densities_out"):
        write_densities(result.densities, outputs["densities_out"])
        written.append(outputs["densities_out"])
    manifest = Path(args.manifest or f"{out}.manifest.json")
    _write_manifest(manifest, "embed", cfg, outputs, result, written)
    print(f"wrote {', '.join(written)} and {manifest}")
    return EXIT_OK


def _emit(payload: str, out: str | None) -> None:
    if out:
        Path(out).write_text(payload + "\n", encoding="utf-8")
    print(payload)


def cmd_eval(args: argparse.Namespace) -> int:
    d_emb = read_distance_matrix(args.distances)
    graph = read_edge_list(args.graph, weighted=not args.unweighted)
    if d_emb.shape[0] != graph.n_nodes:
        raise DataError(f"distance matrix has {d_emb.shape[0]} points but graph has {graph.n_nodes} nodes")
    d_true = shortest_paths(graph)
    params: dict[str, Any] = {}
    if args.run_manifest:
        m = json.loads(Path(args.run_manifest).read_text(encoding="utf-8"))
        c = m.get("config", {})
        params = {
            "alpha": c.get("alpha"),
            "K": m.get("resolved", {}).get("max_scale"),
            "eps_scale": c.get("eps_scale"),
            "metric": c.get("metric"),
            "variant": c.get("variant"),
        }
    report = EvalReport(
        map_score=mean_average_precision(graph, d_emb),
        avg_distortion=average_distortion(d_emb, d_true),
        gromov_delta=gromov_delta(d_emb, allow_large=args.allow_large) if args.gromov else None,
        parameters=params,
    )
    _emit(report.to_json(), args.out)
    return EXIT_OK


def cmd_classify(args: argparse.Namespace) -> int:
    d = read_distance_matrix(args.distances)
    labels = read_labels(args.labels, has_header=args.labels_header)
    try:
        split = SplitSpec(args.train_fraction, args.repetitions, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    mean, std = medoid_classify(d, labels, split)
    payload = {
        "accuracy_mean": mean,
        "accuracy_std": std,
        "train_fraction": split.train_fraction,
        "repetitions": split.repetitions,
        "seed": split.seed,
        "n_points": int(d.shape[0]),
        "n_classes": len(set(labels)),
    }
    _emit(json.dumps(payload, indent=2, sort_keys=True), args.out)
    return EXIT_OK


def cmd_synth_tree(args: argparse.Namespace) -> int:
    try:
        tree = balanced_tree(args.branching, args.depth)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    write_edge_list(tree, args.out)
    print(f"wrote {args.out} ({tree.n_nodes} nodes, {tree.n_edges} edges)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hyperdiff", description="Hyperbolic diffusion embedding and distance.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("distance", help="compute the HDD (or an ablation) distance matrix")
    _add_pipeline_options(p)
    p.add_argument("--out", help="output distance matrix")
    p.add_argument("--format", choices=["csv", "bin"])
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("embed", help="write the multi-scale half-space embedding")
    _add_pipeline_options(p)
    p.add_argument("--out", help="output embedding (binary, with a .json sidecar)")
    p.add_argument("--densities-out", dest="densities_out", help="also dump the propagated densities")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("eval", help="MAP and average distortion against a graph's shortest paths")
    p.add_argument("--distances", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--unweighted", action="store_true")
    p.add_argument("--gromov", action="store_true", help="also report the Gromov delta (O(n^4))")
    p.add_argument("--allow-large", action="store_true", help="permit --gromov above 500 points")
    p.add_argument("--run-manifest", help="manifest of the run that produced --distances")
    p.add_argument("--out", help="write the JSON report here as well")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("classify", help="nearest-medoid classification accuracy")
    p.add_argument("--distances", required=True)
    p.add_argument("--labels", required=True, help="single-column CSV, one label per point")
    p.add_argument("--labels-header", action="store_true")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--repetitions", type=int, default=10)
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--out")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("synth-tree", help="write a complete balanced tree as an edge list")
    p.add_argument("--branching", type=int, required=True)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth_tree)
    return parser


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(exc, (DataError, OSError, json.JSONDecodeError)):
        return EXIT_DATA
    if isinstance(exc, (UsageError, ValueError, TypeError)):
        return EXIT_USAGE
    return EXIT_NUMERICAL


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error {exc}", file=sys.stderr)
        return _exit_code(exc.cause)
    except (UsageError, DataError, NumericalError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    raise SystemExit(main())
