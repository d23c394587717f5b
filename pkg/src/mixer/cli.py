"""Command-line front end.

    mixer solve INPUT --output RESULT [--tol T] [--max-outer N] [--seed S]
    mixer synth --universe K --views N --obs-prob P --mismatch F --seed S --output FILE
    mixer eval RESULT TRUTH
    mixer bench --universe K.. --views N.. --obs-prob P.. --mismatch F.. --trials T --output CSV
    mixer combine IN [IN ...] --weights W [W ...] --output FILE

Affinity and result files are JSON.  Floats are written with ``repr`` so a
write-then-read round trip is exact.  Exit status: 0 success, 1 usage or input
error, 2 solver non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys
from dataclasses import asdict, replace

import numpy as np

from .core import AffinityError, DimensionError, SolverConfig, ViewPartition, combine_affinities, validate_affinity
from .evaluation import SyntheticSpec, generate_instance, precision_recall_f1, run_sweep
from .solver import NotConverged, solve

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2

CSV_HEADER = ["k", "n", "obs_prob", "mismatch", "algorithm", "precision", "recall", "f1", "gap", "wall_ms"]


class InputError(Exception):
    """Bad flags or a malformed document; maps to exit status 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which is reserved for non-convergence
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- documents

def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"{path}: cannot read: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}") from exc


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=None, separators=(",", ":"), allow_nan=False)
        fh.write("\n")


def _field(doc, name, path):
    if not isinstance(doc, dict):
        raise InputError(f"{path}: top level must be an object")
    if name not in doc:
        raise InputError(f"{path}: missing field '{name}'")
    return doc[name]


def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _labels(raw, m, path):
    if not isinstance(raw, list) or not all(_is_int(x) and x >= 0 for x in raw):
        raise InputError(f"{path}: field 'labels' must be an array of nonnegative integers")
    if m is not None and len(raw) != m:
        raise InputError(f"{path}: field 'labels' has {len(raw)} entries, expected {m}")
    return np.array(raw, dtype=np.int64)


def load_affinity_file(path):
    """Read an affinity document; returns ``(AffinityMatrix, labels or None)``."""
    doc = _read_json(path)
    views = _field(doc, "views", path)
    if not isinstance(views, list) or not views or not all(_is_int(v) and v >= 1 for v in views):
        raise InputError(f"{path}: field 'views' must be a non-empty array of positive integers")
    partition = ViewPartition(tuple(views))
    m = partition.m
    rows = _field(doc, "affinity", path)
    if not isinstance(rows, list) or len(rows) != m:
        got = len(rows) if isinstance(rows, list) else type(rows).__name__
        raise InputError(f"{path}: field 'affinity' must have {m} rows, got {got}")
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != m:
            raise InputError(f"{path}: field 'affinity' row {i} must have {m} entries")
        for j, x in enumerate(row):
            if not isinstance(x, (int, float)) or isinstance(x, bool):
                raise InputError(f"{path}: field 'affinity' entry ({i},{j}) is not a number")
    try:
        S = validate_affinity(np.array(rows, dtype=float), partition)
    except (AffinityError, DimensionError) as exc:
        raise InputError(f"{path}: field 'affinity': {exc}") from exc
    labels = _labels(doc["labels"], m, path) if "labels" in doc else None
    return S, labels


def affinity_document(S, labels=None):
    doc = {"views": list(S.partition.cardinalities), "affinity": S.values.tolist()}
    if labels is not None:
        doc["labels"] = [int(x) for x in labels]
    return doc


def _read_labels(path):
    doc = _read_json(path)
    return _labels(_field(doc, "labels", path), None, path)


# ---------------------------------------------------------------- commands

def cmd_solve(args):
    S, truth = load_affinity_file(args.input)
    cfg = SolverConfig()
    overrides = {}
    if args.tol is not None:
        overrides["inner_tol"] = args.tol
    if args.max_outer is not None:
        overrides["max_outer_iters"] = args.max_outer
    if args.seed is not None:
        overrides["rng_seed"] = args.seed
    try:
        cfg = replace(cfg, **overrides)
    except ValueError as exc:
        raise InputError(str(exc)) from exc

    status = EXIT_OK
    try:
        _, clusters, report = solve(S, cfg)
        labels, k_hat = clusters.labels, clusters.universe_estimate
    except NotConverged as exc:
        report = exc.report
        # not a valid clustering; the argmax labels are only for inspection
        labels = _first_seen(np.argmax(exc.U, axis=1))
        k_hat = report.universe_estimate
        status = EXIT_NOT_CONVERGED
        print(f"warning: {exc}", file=sys.stderr)
    _write_json(args.output, {
        "labels": [int(x) for x in labels],
        "universe_estimate": int(k_hat),
        "report": report.to_dict(),
        "config": asdict(cfg),
    })
    if truth is not None:
        _print_metrics(precision_recall_f1(labels, truth))
    return status


def _first_seen(cols):
    remap = {}
    return np.array([remap.setdefault(int(c), len(remap)) for c in cols], dtype=np.int64)


def _print_metrics(metrics):
    print(json.dumps(metrics.to_dict()))


def cmd_synth(args):
    try:
        spec = SyntheticSpec(args.universe, args.views, args.obs_prob, args.mismatch, args.seed)
        if args.theta is not None and not 0.0 <= args.theta <= 1.0:
            raise ValueError("theta must be in [0, 1]")
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    S, labels = generate_instance(spec, fixed_theta=args.theta)
    _write_json(args.output, affinity_document(S, labels))
    return EXIT_OK


def cmd_eval(args):
    predicted = _read_labels(args.result)
    truth = _read_labels(args.truth)
    if len(predicted) != len(truth):
        raise InputError(f"label length mismatch: {args.result} has {len(predicted)}, {args.truth} has {len(truth)}")
    _print_metrics(precision_recall_f1(predicted, truth))
    return EXIT_OK


def _fmt(x):
    return "" if x is None else repr(float(x))


def cmd_bench(args):
    try:
        grid = [SyntheticSpec(k, n, p, f, args.seed)
                for k, n, p, f in itertools.product(args.universe, args.views, args.obs_prob, args.mismatch)]
        if args.trials < 1:
            raise ValueError("trials must be >= 1")
        cfg = SolverConfig() if args.max_outer is None else SolverConfig(max_outer_iters=args.max_outer)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    rows = run_sweep(grid, cfg, trials=args.trials, fixed_theta=args.theta)
    with open(args.output, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(CSV_HEADER)
        for row in rows:
            spec = row["spec"]
            lead = [spec.universe_size, spec.num_views, repr(spec.obs_prob), repr(spec.mismatch)]
            if row["trials"]:
                out.writerow(lead + [row["algorithm"], _fmt(row["precision"]), _fmt(row["recall"]),
                                     _fmt(row["f1"]), _fmt(row["gap"]), _fmt(row["wall_ms"])])
            # failed trials get their own rows: "<algorithm>:<error>:<count>"
            for name, count in sorted(row["errors"].items()):
                out.writerow(lead + [f"{row['algorithm']}:{name}:{count}", "", "", "", "", ""])
    return EXIT_OK


def cmd_combine(args):
    if len(args.weights) != len(args.inputs):
        raise InputError(f"{len(args.inputs)} inputs but {len(args.weights)} weights")
    loaded = [load_affinity_file(p) for p in args.inputs]
    first = loaded[0][0].partition
    for path, (S, _) in zip(args.inputs[1:], loaded[1:]):
        if S.partition != first:
            raise InputError(f"partition mismatch: {args.inputs[0]} has views {list(first.cardinalities)}, "
                             f"{path} has views {list(S.partition.cardinalities)}")
    try:
        S = combine_affinities([S for S, _ in loaded], args.weights)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    labels = loaded[0][1]
    if labels is not None and any(lb is None or not np.array_equal(lb, labels) for _, lb in loaded[1:]):
        labels = None
    _write_json(args.output, affinity_document(S, labels))
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser():
    parser = _Parser(prog="mixer", description="Multiway fusion of pairwise affinities.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="fuse an affinity file into cycle-consistent labels")
    p.add_argument("input")
    p.add_argument("--output", required=True)
    p.add_argument("--tol", type=float, help="inner relative-decrease tolerance")
    p.add_argument("--max-outer", type=int, help="cap on penalty weights tried")
    p.add_argument("--seed", type=int, help="seed of the penalty perturbations")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("synth", help="write a synthetic affinity file with ground truth")
    p.add_argument("--universe", type=int, required=True)
    p.add_argument("--views", type=int, required=True)
    p.add_argument("--obs-prob", type=float, required=True)
    p.add_argument("--mismatch", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    # test hook: fixed uncertainty instead of theta ~ U[0, 1]
    p.add_argument("--theta", type=float, default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="pairwise precision/recall/F1 of a result against ground truth")
    p.add_argument("result")
    p.add_argument("truth")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="Monte Carlo sweep over a synthetic grid, written as CSV")
    p.add_argument("--universe", type=int, nargs="+", required=True)
    p.add_argument("--views", type=int, nargs="+", required=True)
    p.add_argument("--obs-prob", type=float, nargs="+", required=True)
    p.add_argument("--mismatch", type=float, nargs="+", required=True)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-outer", type=int)
    p.add_argument("--output", required=True)
    p.add_argument("--theta", type=float, default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("combine", help="weighted mean of attribute affinity files")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--weights", type=float, nargs="+", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_combine)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
