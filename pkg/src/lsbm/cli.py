"""Command-line interface.

    lsbm generate   --model M --seed S --out DIR
    lsbm divergence --model M [--out F]
    lsbm cluster    --graph G --seed S [--stage spectral|refine|full] [--init P]
                    [--model M] [--truth T] [--preset desk|asymptotic] --out F
    lsbm evaluate   EST --truth T [--format json|csv]
    lsbm experiment --config C [--seeds A..B] [--jobs N] [--format csv|json]
    lsbm oracle     map|divergence ...

Exit status: 0 on success, 1 on usage errors, 2 on bad input data or an
algorithm failure on that data.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import sys
from pathlib import Path

from . import io
from .divergence import divergence, error_floor
from .errors import DataFormatError, LSBMError
from .evaluation import h_set, misclassified, parse_seeds, records_to_csv, run_experiment
from .model import Partition
from .oracle import divergence_dual_grid, divergence_grid_oracle, divergence_pg_oracle, map_oracle
from .refinement import refine_from, spectral_partition
from .rng import check_seed
from .sampler import sample
from .spectral import SpectralConfig, spectral_stage


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _seed(text: str) -> int:
    try:
        return check_seed(int(text))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _emit(text: str, out) -> None:
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        io.atomic_write(out, text)


def _spectral_config(args) -> SpectralConfig:
    if getattr(args, "spectral_config", None):
        return SpectralConfig.from_dict(io.read_json(args.spectral_config))
    return SpectralConfig.preset(args.preset)


# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    params = io.read_model(args.model)
    truth, graph = sample(params, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_graph(out / "graph.tsv", graph)
    io.write_partition(out / "truth.tsv", truth)
    return 0


def cmd_divergence(args) -> int:
    params = io.read_model(args.model)
    report = divergence(params)
    _emit(io.dumps(report.to_dict(params.n)), args.out)
    return 0


def cmd_cluster(args) -> int:
    graph = io.read_graph(args.graph)
    truth = io.read_partition(args.truth) if args.truth else None
    if truth is not None and truth.n != graph.n:
        raise DataFormatError(f"truth has {truth.n} items, graph has {graph.n}", args.truth)
    params = io.read_model(args.model) if args.model else None
    if params is not None and params.n != graph.n:
        raise DataFormatError(f"model has n={params.n}, graph has n={graph.n}", args.model)
    cfg = _spectral_config(args)
    diag: dict = {"stage": args.stage, "seed": args.seed, "n": graph.n, "L": graph.L, "m": graph.m}

    if args.stage == "spectral":
        out = spectral_stage(graph, cfg, args.seed)
        diag["spectral"] = out.to_dict()
        assignment = out.gamma_assignment()
        if truth is not None:
            diag["errors_spectral"] = misclassified(Partition(out.full_assignment(), out.k_hat), truth)[0]
    else:
        if args.stage == "refine":
            if not args.init:
                raise UsageError("cluster --stage refine requires --init")
            init = io.read_partition(args.init)
            if init.n != graph.n:
                raise DataFormatError(f"initial partition has {init.n} items, graph has {graph.n}", args.init)
            res = refine_from(graph, init, args.seed, truth, args.reestimate)
        else:
            res = spectral_partition(graph, args.seed, cfg, truth, args.reestimate)
            diag["spectral"] = res.spectral.to_dict()
        assignment = res.final.assignment
        diag["k_hat"] = res.k_hat
        diag["p_hat"] = res.p_hat.to_dict()
        diag["sweeps"] = res.refine.sweeps
        diag["changes"] = res.refine.changes
        if truth is not None:
            diag["errors_initial"] = misclassified(res.initial, truth)[0]
            diag["errors_final"] = misclassified(res.final, truth)[0]
            diag["error_trace"] = res.refine.error_trace
    if params is not None:
        if params.K > 1:
            d = divergence(params).d_value
            diag["d_value"] = d
            diag["floor_s"] = error_floor(params.n, d)
        if truth is not None and params.n * params.p_bar > 1:
            diag["outside_h"] = h_set(graph, truth, params).outside
    diag["config"] = cfg.to_dict()

    io.write_partition(args.out, assignment)
    io.atomic_write(args.diagnostics or f"{args.out}.json", io.dumps(diag))
    return 0


def cmd_evaluate(args) -> int:
    est = io.read_partition(args.estimate)
    truth = io.read_partition(args.truth)
    if est.n != truth.n:
        raise DataFormatError(f"partitions have {est.n} and {truth.n} items", args.estimate)
    errors, gamma = misclassified(est, truth)
    result = {
        "errors": errors,
        "n": est.n,
        "fraction": errors / est.n,
        "k_hat": est.k_hat,
        "K": truth.k_hat,
        "matching": gamma.tolist(),
    }
    if args.format == "csv":
        buf = _io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["errors", "n", "fraction", "k_hat", "K"])
        writer.writerow([errors, est.n, io.fmt_float(errors / est.n), est.k_hat, truth.k_hat])
        _emit(buf.getvalue(), args.out)
    else:
        _emit(io.dumps(result), args.out)
    return 0


def _load_experiment(path):
    conf = io.read_json(path)
    if not isinstance(conf, dict) or "models" not in conf:
        raise DataFormatError("experiment config needs a 'models' list", path)
    models, ids = [], []
    for i, entry in enumerate(conf["models"]):
        if not isinstance(entry, dict):
            raise DataFormatError(f"models[{i}] must be an object", path)
        entry = dict(entry)
        ids.append(str(entry.pop("id", i)))
        models.append(io.model_from_dict(entry, path))
    return conf, models, ids


def cmd_experiment(args) -> int:
    conf, models, ids = _load_experiment(args.config)
    seeds_spec = args.seeds if args.seeds is not None else conf.get("seeds", [])
    try:
        seeds = [check_seed(s) for s in parse_seeds(seeds_spec)]
    except (TypeError, ValueError) as exc:
        if args.seeds is not None:
            raise UsageError(f"bad --seeds {args.seeds!r}: {exc}") from None
        raise DataFormatError(f"bad seed range: {exc}", args.config) from None
    if args.spectral_config:
        cfg = SpectralConfig.from_dict(io.read_json(args.spectral_config))
    elif args.preset:
        cfg = SpectralConfig.preset(args.preset)
    else:
        try:
            cfg = SpectralConfig.from_dict(conf.get("spectral", "desk"))
        except (TypeError, ValueError) as exc:
            raise DataFormatError(f"bad spectral settings: {exc}", args.config) from None
    records = run_experiment(models, seeds, cfg, jobs=args.jobs, timing=args.timing,
                             model_ids=ids, reestimate=bool(conf.get("reestimate", False)))
    if args.format == "json":
        _emit(io.dumps([r.to_dict() for r in records]), args.out)
    else:
        _emit(records_to_csv(records), args.out)
    return 0


def cmd_oracle_map(args) -> int:
    graph = io.read_graph(args.graph)
    params = io.read_model(args.model)
    res = map_oracle(graph, params, detail=True)
    if args.partition_out:
        io.write_partition(args.partition_out, res.partition)
    _emit(io.dumps({"assignment": res.partition.assignment.tolist(), "log_score": res.log_score,
                    "ties": res.ties}), args.out)
    return 0


def cmd_oracle_divergence(args) -> int:
    params = io.read_model(args.model)
    report = divergence(params)
    i, j = report.argmin_pair
    a, p = params.user_alpha, params.user_p
    out = {
        "pair": [i, j],
        "dl_plus": report.d_value,
        "projected_subgradient": divergence_pg_oracle(a, p[i], p[j], iterations=args.iterations),
        "grid_min_max": divergence_grid_oracle(a, p[i], p[j], args.points),
        "grid_dual": divergence_dual_grid(a, p[i], p[j], args.points),
    }
    _emit(io.dumps(out), args.out)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lsbm", description="Clustering in the labeled stochastic block model.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="sample a graph and its ground truth")
    p.add_argument("--model", required=True, help="model JSON")
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--out", required=True, help="directory for graph.tsv and truth.tsv")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("divergence", help="divergence report of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="output JSON (default stdout)")
    p.set_defaults(func=cmd_divergence)

    p = sub.add_parser("cluster", help="run the clustering algorithm")
    p.add_argument("--graph", required=True)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--stage", choices=("spectral", "refine", "full"), default="full")
    p.add_argument("--init", help="initial partition for --stage refine")
    p.add_argument("--model", help="true model, for diagnostics only")
    p.add_argument("--truth", help="true partition, for diagnostics only")
    p.add_argument("--preset", choices=("desk", "asymptotic"), default="desk",
                   help="spectral constants (default desk)")
    p.add_argument("--spectral-config", help="JSON with SpectralConfig fields (overrides --preset)")
    p.add_argument("--reestimate", action="store_true", help="re-estimate parameters every sweep")
    p.add_argument("--out", required=True, help="partition file")
    p.add_argument("--diagnostics", help="diagnostics JSON (default <out>.json)")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("evaluate", help="misclassified items of a partition")
    p.add_argument("estimate", help="estimated partition file")
    p.add_argument("--truth", required=True)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="seed sweep over models")
    p.add_argument("--config", required=True, help="JSON with 'models', optional 'seeds', 'spectral'")
    p.add_argument("--seeds", help="inclusive range A..B (overrides the config)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--preset", choices=("desk", "asymptotic"))
    p.add_argument("--spectral-config")
    p.add_argument("--timing", action="store_true", help="fill runtime_ms (output no longer reproducible)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("oracle", help="brute-force references")
    osub = p.add_subparsers(dest="oracle", required=True, parser_class=_Parser)
    q = osub.add_parser("map", help="exhaustive MAP partition (K^n <= 1e7)")
    q.add_argument("--graph", required=True)
    q.add_argument("--model", required=True)
    q.add_argument("--partition-out")
    q.add_argument("--out")
    q.set_defaults(func=cmd_oracle_map)
    q = osub.add_parser("divergence", help="divergence by direct minimization and grids")
    q.add_argument("--model", required=True)
    q.add_argument("--iterations", type=int, default=200_000)
    q.add_argument("--points", type=int, default=10_000)
    q.add_argument("--out")
    q.set_defaults(func=cmd_oracle_divergence)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be at least 1")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except DataFormatError as exc:
        print(f"lsbm: data error: {exc}", file=sys.stderr)
        return 2
    except LSBMError as exc:
        print(f"lsbm: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"lsbm: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
