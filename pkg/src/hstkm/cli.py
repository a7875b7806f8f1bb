"""Command-line front end.

Every subcommand prints a single JSON document on stdout; human-readable
tables go to stderr. Exit codes: 0 success, 1 input error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import InvalidInputError
from .harness import ExperimentConfig, GraphGenConfig, gen_cluster_graph, run_experiment
from .hst import build_hst, validate_tree
from .local_search import OBJECTIVES, cost, local_search
from .metric import load_space, write_edge_list
from .privacy import dp_local_search
from .seeding import hst_init, kmedianpp_init, random_init

CLUSTER_METHODS = ("rand", "kmedianpp", "hst", "dp-rand", "dp-kmedianpp", "dp-hst")

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _level(value: str):
    if value == "auto":
        return value
    try:
        v = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer or 'auto', got {value!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"L must be >= 1, got {v}")
    return v


def _seed(value: str) -> int:
    v = int(value)
    if v < 0:
        raise argparse.ArgumentTypeError("seed must be non-negative")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hstkm", description="k-median clustering with HST initialization")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("gen-graph", help="generate a planted-cluster graph")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--n-clusters", type=int, default=10)
    g.add_argument("--r", type=float, default=100.0)
    g.add_argument("--p-intra", type=float, default=0.2)
    g.add_argument("--p-inter", type=float, default=0.01)
    g.add_argument("--seed", type=_seed, default=0)
    g.add_argument("--out", type=Path, required=True, help="edge-list output path")
    g.add_argument("--labels-out", type=Path, help="write one cluster label per line")

    c = sub.add_parser("cluster", help="run one clustering")
    c.add_argument("--data", type=Path, required=True)
    c.add_argument("--format", choices=("auto", "vector", "graph"), default="auto")
    c.add_argument("--norm", choices=("l1", "l2"), default="l2")
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--method", choices=CLUSTER_METHODS, required=True)
    c.add_argument("--seed", type=_seed, required=True)
    c.add_argument("--epsilon", type=float)
    c.add_argument("--demand", type=Path, help="file with one demand point id per line")
    c.add_argument("--T", type=int, default=20)
    c.add_argument("--L", type=_level, default=None, help="tree depth (default 6, DP 8)")
    c.add_argument("--alpha", type=float, default=1e-3)
    c.add_argument("--max-iter", type=int, default=20)
    c.add_argument("--objective", choices=OBJECTIVES, default="median")
    c.add_argument("--secure-rng", action="store_true",
                   help="draw DP noise from OS entropy (output is not reproducible)")

    e = sub.add_parser("experiment", help="run a sweep from a JSON config")
    e.add_argument("--config", type=Path, required=True)
    e.add_argument("--out", type=Path, default=Path("."))
    e.add_argument("--pretty", action="store_true", help="print the aggregate table to stderr")

    i = sub.add_parser("inspect-hst", help="dump the HST built on a dataset")
    i.add_argument("--data", type=Path, required=True)
    i.add_argument("--format", choices=("auto", "vector", "graph"), default="auto")
    i.add_argument("--norm", choices=("l1", "l2"), default="l2")
    i.add_argument("--L", type=_level, default="auto")
    i.add_argument("--seed", type=_seed, default=0)
    i.add_argument("--check", action="store_true", help="validate the diameter property")

    sub.add_parser("version", help="print the package version")
    return p


def _read_ids(path: Path) -> np.ndarray:
    try:
        return np.loadtxt(path, dtype=np.int64, ndmin=1)
    except (OSError, ValueError) as exc:
        raise InvalidInputError(f"{path}: cannot read point ids ({exc})") from None


def cmd_gen_graph(args) -> dict:
    g = gen_cluster_graph(GraphGenConfig(n=args.n, n_clusters=args.n_clusters, p_intra=args.p_intra,
                                         r=args.r, p_inter=args.p_inter, seed=args.seed))
    write_edge_list(args.out, g.edge_list(), g.n)
    if args.labels_out:
        np.savetxt(args.labels_out, g.labels, fmt="%d")
    return {"n": g.n, "m": int(len(g.edges)), "out": str(args.out), "patched": g.patched}


def cmd_cluster(args) -> dict:
    dp = args.method.startswith("dp-")
    if dp and (args.epsilon is None or args.demand is None):
        raise UsageError(f"--method {args.method} requires --epsilon and --demand")
    space = load_space(args.data, args.norm, args.format)
    demand = _read_ids(args.demand) if args.demand else np.arange(space.n)
    if dp:
        init = {"dp-rand": "random", "dp-kmedianpp": "kmedianpp", "dp-hst": "hst"}[args.method]
        res = dp_local_search(space, demand, args.k, args.epsilon, args.T, args.seed, init=init,
                              L=args.L or 8, objective=args.objective, secure=args.secure_rng)
        costs = res.trace.per_iteration_costs
        return {
            "centers": list(res.centers.centers),
            "initial_cost": costs[0],
            "final_cost": cost(space, res.centers, demand, args.objective),
            "iterations": res.trace.iterations,
            "costs": costs,
            "ledger": res.budget.to_list(),
        }
    squared = args.objective == "means"
    if args.method == "rand":
        init = random_init(space, args.k, args.seed)
    elif args.method == "kmedianpp":
        init = kmedianpp_init(space, args.k, args.seed, squared=squared)
    else:
        init = hst_init(space, args.k, args.L or 6, args.seed, demand=demand if args.demand else None)
    trace = local_search(space, demand, init, args.alpha, args.max_iter, args.objective)
    return {
        "centers": list(trace.final.centers),
        "initial_cost": trace.initial_cost,
        "final_cost": trace.final_cost,
        "iterations": trace.iterations,
        "costs": trace.per_iteration_costs,
    }


def cmd_experiment(args) -> dict:
    if not args.config.is_file():
        raise InvalidInputError(f"{args.config}: config file not found")
    cfg = ExperimentConfig.from_json(args.config)
    report = run_experiment(cfg)
    jpath, cpath = report.write(args.out)
    agg = report.aggregate()
    if args.pretty:
        _print_table(agg)
    failed = sum(c.status != "ok" for c in report.cells)
    return {"report_json": str(jpath), "report_csv": str(cpath), "cells": len(report.cells),
            "failed": failed, "aggregate": agg}


def _print_table(rows):
    head = f"{'method':<14}{'k':>4}{'init':>12}{'final':>12}{'best':>12}{'iter':>7}"
    print(head, file=sys.stderr)
    for r in rows:
        it = "" if r["iter_cost_mean"] is None else f"{r['iter_cost_mean']:.1f}"
        print(f"{r['method']:<14}{r['k']:>4}{r['init_cost_mean']:>12.4g}{r['final_cost_mean']:>12.4g}"
              f"{r['best_cost_mean']:>12.4g}{it:>7}", file=sys.stderr)


def cmd_inspect_hst(args) -> dict:
    space = load_space(args.data, args.norm, args.format)
    tree = build_hst(space, args.L, args.seed)
    out = tree.to_dict()
    if args.check:
        problems = validate_tree(tree)
        status = "pass" if not problems["diameter-property"] else "fail"
        out["check"] = {"diameter-property": status,
                        "violations": problems["diameter-property"]}
        print(f"diameter-property: {status}", file=sys.stderr)
    return out


def cmd_version(args) -> dict:
    return {"version": __version__}


COMMANDS = {
    "gen-graph": cmd_gen_graph,
    "cluster": cmd_cluster,
    "experiment": cmd_experiment,
    "inspect-hst": cmd_inspect_hst,
    "version": cmd_version,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        payload = COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"hstkm: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InvalidInputError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"hstkm: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # anything else is a bug, reported as such
        print(f"hstkm: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    json.dump(payload, sys.stdout)
    sys.stdout.write("\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
