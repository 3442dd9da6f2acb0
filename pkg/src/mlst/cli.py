"""Command line: ``mlst gen | solve | verify | bench``.

Exit codes: 0 feasible or proven result, 1 usage or parse error (and
failed verification), 2 degraded result (DGA fallback, timeout without
proof).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench
from .clock import make_clock
from .devo import INHERIT_STRONGER, INHERIT_UNION, MUTATE_LP_WEIGHTED, MUTATE_UNIFORM, DevoConfig, Devolver
from .exact import branch_and_bound, brute_force
from .graph import (
    InstanceError,
    InstanceSpec,
    SolutionViolation,
    dump_solution,
    format_instance,
    generate_random,
    load_solution,
    read_instance,
    solution_document,
    validate_solution,
)
from .heuristics import mvca, pilot
from .model import LINK_AGGREGATED, LINK_PER_EDGE

EXIT_OK, EXIT_USAGE, EXIT_DEGRADED = 0, 1, 2


class UsageError(Exception):
    pass


def _write(path: str | None, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_gen(args) -> int:
    spec = InstanceSpec(args.nodes, args.density, args.colors, args.terminal_ratio, args.seed)
    if spec.m < spec.n - 1:
        raise UsageError(f"density {spec.density} gives m={spec.m} < n-1={spec.n - 1}; graph cannot be connected")
    g = generate_random(spec)
    _write(args.out, format_instance(g, f"generated n={spec.n} d={spec.density} c={spec.colors} seed={spec.seed}"))
    info = f"n={g.n} m={g.m} L={g.num_labels} Q={len(g.terminals)}\n"
    (sys.stderr if args.out in (None, "-") else sys.stdout).write(info)
    return EXIT_OK


def cmd_solve(args) -> int:
    g = read_instance(args.instance)
    clock = make_clock(args.clock)
    t0 = clock.now_ms()
    extra: dict = {}
    code = EXIT_OK
    if args.algo == "brute":
        try:
            _, tree = brute_force(g, clock=clock)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        extra["status"] = "optimal"
    elif args.algo == "mvca":
        _, tree = mvca(g, clock=clock)
        extra["status"] = "heuristic"
    elif args.algo == "pilot":
        _, tree = pilot(g, clock=clock)
        extra["status"] = "heuristic"
    elif args.algo == "bb":
        res = branch_and_bound(g, time_limit_ms=args.time_limit, link_mode=args.link_mode or LINK_PER_EDGE, clock=clock)
        tree = res.tree
        extra.update(status="optimal" if res.proven else "timeout", nodes=res.nodes, root_bound=round(res.root_bound, 9))
        if not res.proven:
            code = EXIT_DEGRADED
    else:
        cfg = DevoConfig(
            pop_size=args.pop_size,
            feasible_target=args.feasible_target,
            generations=args.generations,
            mutation_rate=args.mutation_rate,
            seed=args.seed,
            time_limit_ms=args.time_limit,
            link_mode=args.link_mode or LINK_PER_EDGE,
            inherit=args.inherit,
            mutation_choice=args.mutation_choice,
        )
        tree, stats, fallback = Devolver(g, cfg, clock).run()
        extra.update(status="fallback" if fallback else "feasible", stop=stats.stop_reason, generations=len(stats.generations) - 1)
        if fallback:
            code = EXIT_DEGRADED
        if args.stats:
            Path(args.stats).write_text(stats.to_jsonl())
    doc = solution_document(tree, args.algo, clock.now_ms() - t0, args.seed, **extra)
    _write(args.out, dump_solution(doc))
    return code


def cmd_verify(args) -> int:
    g = read_instance(args.instance)
    try:
        doc = load_solution(Path(args.solution).read_text())
    except (json.JSONDecodeError, InstanceError) as exc:
        raise UsageError(f"{args.solution}: {exc}") from exc
    try:
        tree = validate_solution(g, [tuple(e) for e in doc["edges"]])
    except SolutionViolation as exc:
        print(f"FAIL {exc.kind}: {exc.detail}")
        return EXIT_USAGE
    problems = []
    if doc["value"] != tree.value:
        problems.append(f"value mismatch: claimed {doc['value']}, recomputed {tree.value}")
    if sorted(doc["labels"]) != sorted(tree.labels):
        problems.append(f"label mismatch: claimed {sorted(doc['labels'])}, recomputed {sorted(tree.labels)}")
    if problems:
        print("FAIL " + "; ".join(problems))
        return EXIT_USAGE
    print(f"PASS value={tree.value}")
    return EXIT_OK


def _parse_list(text: str, conv):
    return [conv(t) for t in text.split(",") if t.strip()]


def _parse_sizes(text: str) -> list[int]:
    """``2..12``, ``2..12:2`` or ``2,4,8``."""
    if ".." in text:
        lo, _, rest = text.partition("..")
        hi, _, step = rest.partition(":")
        return list(range(int(lo), int(hi) + 1, int(step or 1)))
    return _parse_list(text, int)


def _color_count(item: str, n: int) -> int:
    item = item.strip()
    if item.endswith("n"):
        return int(float(item[:-1]) * n)
    return int(item)


def _suite_from_args(args) -> bench.SuiteSpec:
    if args.suite:
        data = json.loads(Path(args.suite).read_text())
        if "cells" in data:
            data["cells"] = [tuple(c) for c in data["cells"]]
        if "algorithms" in data:
            data["algorithms"] = tuple(data["algorithms"])
    else:
        data = {}
        if args.nodes:
            nodes = _parse_list(args.nodes, int)
            dens = _parse_list(args.densities, float)
            colors = args.colors.split(",")
            data["cells"] = [(n, d, _color_count(c, n)) for n in nodes for d in dens for c in colors]
    for key, val in (
        ("instances", args.instances),
        ("seed", args.seed),
        ("time_limit_ms", args.time_limit),
        ("clock", args.clock),
        ("workers", args.workers),
    ):
        if val is not None:
            data[key] = val
    if args.algos:
        data["algorithms"] = tuple(_parse_list(args.algos, str.strip))
    try:
        return bench.SuiteSpec(**data)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def cmd_bench(args) -> int:
    spec = _suite_from_args(args)
    report = bench.run_suite(spec)
    _write(args.out, report.to_csv())
    # keep stdout clean when the CSV goes there
    (sys.stderr if args.out in (None, "-") else sys.stdout).write(report.summary_text())
    if args.sweep:
        sizes = _parse_sizes(args.sweep)
        graphs = [generate_random(ispec) for _, _, ispec in spec.instance_specs()]
        sweep = bench.population_size_sweep(
            graphs, sizes, seed=spec.seed, clock=spec.clock, time_limit_ms=spec.time_limit_ms, bb_time_limit_ms=spec.time_limit_ms
        )
        if args.sweep_out:
            Path(args.sweep_out).write_text(sweep.to_csv())
        else:
            sys.stdout.write(sweep.to_csv())
    degraded = any(r.status == "error" for r in report.runs)
    return EXIT_DEGRADED if degraded else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mlst", description="Minimum labeling Steiner tree solvers")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a random instance")
    g.add_argument("--nodes", type=int, required=True)
    g.add_argument("--density", type=float, required=True)
    g.add_argument("--colors", type=int, required=True)
    g.add_argument("--terminal-ratio", type=float, default=0.25)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve an instance")
    s.add_argument("instance")
    s.add_argument("--algo", choices=bench.ALGORITHMS, default="dga")
    s.add_argument("--pop-size", type=int, default=None)
    s.add_argument("--feasible-target", type=int, default=3)
    s.add_argument("--generations", type=int, default=50)
    s.add_argument("--mutation-rate", type=float, default=0.1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--time-limit", type=float, default=None, help="milliseconds")
    s.add_argument("--link-mode", choices=(LINK_PER_EDGE, LINK_AGGREGATED), default=None)
    s.add_argument("--inherit", choices=(INHERIT_UNION, INHERIT_STRONGER), default=INHERIT_UNION)
    s.add_argument("--mutation-choice", choices=(MUTATE_LP_WEIGHTED, MUTATE_UNIFORM), default=MUTATE_LP_WEIGHTED)
    s.add_argument("--clock", choices=("wall", "ticks"), default="wall")
    s.add_argument("--stats", default=None, help="write DGA per-generation records here")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="check a solution document against an instance")
    v.add_argument("instance")
    v.add_argument("solution")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="run a benchmark suite")
    b.add_argument("--suite", default=None, help="JSON file with suite fields")
    b.add_argument("--nodes", default=None, help="comma list, e.g. 12,25")
    b.add_argument("--densities", default="0.25,0.5,0.8")
    b.add_argument("--colors", default="0.25n,0.5n,1n", help="counts or fractions of n like 0.5n")
    b.add_argument("--instances", type=int, default=None)
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--algos", default=None)
    b.add_argument("--time-limit", type=float, default=None, help="milliseconds per run")
    b.add_argument("--clock", choices=("wall", "ticks"), default=None)
    b.add_argument("--workers", type=int, default=None)
    b.add_argument("--sweep", default=None, help="population sizes, e.g. 2..12")
    b.add_argument("--sweep-out", default=None)
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, InstanceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
