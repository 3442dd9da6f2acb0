"""Benchmark driver: instance suites, per-run records, summaries, the
rank-sum comparison and the population-size sweep."""
from __future__ import annotations

import csv
import io
import logging
import math
import random
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .clock import TickClock, WallClock
from .devo import DevoConfig, Devolver
from .exact import branch_and_bound, brute_force
from .graph import InstanceSpec, LabeledGraph, generate_random, validate_solution
from .heuristics import mvca, pilot

log = logging.getLogger(__name__)

ALGORITHMS = ("brute", "bb", "mvca", "pilot", "dga")
CSV_HEADER = ["n", "d", "c", "instance", "seed", "algo", "value", "time_to_best_ms", "total_ms", "status"]
SWEEP_HEADER = ["size", "mean_gap_pct", "mean_time_var_pct"]


def default_cells() -> list[tuple[int, float, int]]:
    return [(n, d, c) for n in (12, 25, 50) for d in (0.25, 0.5, 0.8) for c in (n // 4, n // 2, n)]


@dataclass
class SuiteSpec:
    cells: list = field(default_factory=default_cells)  # (n, d, c)
    instances: int = 5
    seed: int = 0
    algorithms: tuple = ("mvca", "pilot", "dga", "bb")
    # per-run budget; on the tick clock one LP solve or greedy step is 1 ms
    time_limit_ms: float | None = 100.0
    clock: str = "ticks"  # "ticks" keeps timing columns reproducible
    terminal_ratio: float = 0.25
    devo: dict = field(default_factory=dict)  # DevoConfig overrides
    workers: int = 1

    def __post_init__(self):
        for name in self.algorithms:
            if name not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS)}")
        for n, d, c in self.cells:
            spec = InstanceSpec(n, d, c, self.terminal_ratio, 0)
            if spec.m < n - 1:
                raise ValueError(f"cell (n={n}, d={d}) gives m={spec.m} < n-1")
            if c < 1:
                raise ValueError(f"cell (n={n}, d={d}) needs at least one color")

    def instance_specs(self):
        """(cell, instance index, InstanceSpec) in report order."""
        for n, d, c in self.cells:
            for i in range(self.instances):
                seed = random.Random(f"{self.seed}/{n}/{d}/{c}/{i}").getrandbits(63)
                yield (n, d, c), i, InstanceSpec(n, d, c, self.terminal_ratio, seed)


@dataclass
class RunRecord:
    n: int
    d: float
    c: int
    instance: int
    seed: int
    algo: str
    value: int | None
    time_to_best_ms: float
    total_ms: float
    status: str  # ok | optimal | timeout | fallback | error
    meta: dict = field(default_factory=dict)

    @property
    def succeeded(self) -> bool:
        return self.value is not None and self.status not in ("error", "fallback")

    def csv_row(self) -> list[str]:
        return [
            str(self.n), repr(self.d), str(self.c), str(self.instance), str(self.seed), self.algo,
            "" if self.value is None else str(self.value),
            f"{self.time_to_best_ms:.3f}", f"{self.total_ms:.3f}", self.status,
        ]


@dataclass
class BenchReport:
    runs: list[RunRecord] = field(default_factory=list)
    comparisons: dict = field(default_factory=dict)  # other algo -> WilcoxonResult (dga vs other)

    def summary(self) -> list[dict]:
        """Per cell and algorithm: mean value and time-to-best over
        successful runs, with success and failure counts."""
        groups: dict[tuple, list[RunRecord]] = {}
        for r in self.runs:
            groups.setdefault((r.n, r.d, r.c, r.algo), []).append(r)
        out = []
        for (n, d, c, algo), rs in groups.items():
            ok = [r for r in rs if r.succeeded]
            out.append({
                "n": n, "d": d, "c": c, "algo": algo,
                "mean_value": sum(r.value for r in ok) / len(ok) if ok else None,
                "mean_time_to_best_ms": sum(r.time_to_best_ms for r in ok) / len(ok) if ok else None,
                "ok": len(ok),
                "failed": len(rs) - len(ok),
            })
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.runs:
            w.writerow(r.csv_row())
        return buf.getvalue()

    def summary_text(self) -> str:
        lines = [f"{'n':>4} {'d':>5} {'c':>4} {'algo':>6} {'mean':>7} {'ttb_ms':>12} {'ok':>3} {'fail':>4}"]
        for s in self.summary():
            mv = "-" if s["mean_value"] is None else f"{s['mean_value']:.2f}"
            mt = "-" if s["mean_time_to_best_ms"] is None else f"{s['mean_time_to_best_ms']:.1f}"
            lines.append(f"{s['n']:>4} {s['d']:>5} {s['c']:>4} {s['algo']:>6} {mv:>7} {mt:>12} {s['ok']:>3} {s['failed']:>4}")
        for other, res in self.comparisons.items():
            flag = " (degenerate)" if res.degenerate else ""
            lines.append(f"wilcoxon dga < {other}: W={res.statistic:.1f} p={res.p_value:.4g}{flag}")
        return "\n".join(lines) + "\n"


# -- running ------------------------------------------------------------------------


def _clock(kind: str):
    return TickClock() if kind == "ticks" else WallClock()


def run_algorithm(
    algo: str,
    g: LabeledGraph,
    seed: int = 0,
    time_limit_ms: float | None = None,
    clock: str = "ticks",
    devo: dict | None = None,
):
    """(SteinerTree, time_to_best_ms, total_ms, status, meta) for one run."""
    clk = _clock(clock)
    t0 = clk.now_ms()
    meta: dict = {}
    if algo == "brute":
        _, tree = brute_force(g, clock=clk)
        total = clk.now_ms() - t0
        return tree, total, total, "optimal", meta
    if algo == "mvca":
        _, tree = mvca(g, clock=clk)
        total = clk.now_ms() - t0
        return tree, total, total, "ok", meta
    if algo == "pilot":
        _, tree = pilot(g, clock=clk)
        total = clk.now_ms() - t0
        return tree, total, total, "ok", meta
    if algo == "bb":
        res = branch_and_bound(g, time_limit_ms=time_limit_ms, clock=clk)
        total = clk.now_ms() - t0
        meta = {"nodes": res.nodes, "root_bound": res.root_bound}
        return res.tree, min(res.time_to_best_ms, total), total, "optimal" if res.proven else "timeout", meta
    if algo == "dga":
        cfg = DevoConfig(**{"seed": seed, "time_limit_ms": time_limit_ms, **(devo or {})})
        tree, st, fallback = Devolver(g, cfg, clk).run()
        total = clk.now_ms() - t0
        margins = [c["child_objective"] - max(c["parent_objectives"]) for c in st.crossovers if c["child_objective"] is not None]
        meta = {
            "generations": len(st.generations),
            "lp_solves": st.lp_solves,
            "stop": st.stop_reason,
            "crossovers": len(margins),
            # child objective minus the stronger parent's, worst case
            "min_crossover_margin": min(margins) if margins else None,
        }
        return tree, min(st.time_to_best_ms, total), total, "fallback" if fallback else "ok", meta
    raise ValueError(f"unknown algorithm {algo!r}")


def _run_one(args) -> RunRecord:
    cell, i, ispec, algo, time_limit_ms, clock, devo = args
    n, d, c = cell
    try:
        g = generate_random(ispec)
        tree, ttb, total, status, meta = run_algorithm(algo, g, ispec.seed % (1 << 31), time_limit_ms, clock, devo)
        validate_solution(g, tree.edges)
        return RunRecord(n, d, c, i, ispec.seed, algo, tree.value, ttb, total, status, meta)
    except Exception as exc:  # a failed run is recorded, the suite goes on
        log.warning("run %s on %s #%d failed: %s", algo, cell, i, exc)
        return RunRecord(n, d, c, i, ispec.seed, algo, None, 0.0, 0.0, "error", {"error": str(exc)})


def run_suite(spec: SuiteSpec) -> BenchReport:
    jobs = [
        (cell, i, ispec, algo, spec.time_limit_ms, spec.clock, spec.devo)
        for cell, i, ispec in spec.instance_specs()
        for algo in spec.algorithms
    ]
    if spec.workers > 1 and jobs:
        with ProcessPoolExecutor(spec.workers) as pool:
            runs = list(pool.map(_run_one, jobs))
    else:
        runs = [_run_one(j) for j in jobs]
    report = BenchReport(runs)
    if "dga" in spec.algorithms:
        for other in spec.algorithms:
            if other == "dga":
                continue
            a, b = _paired_values(runs, "dga", other)
            if a:
                report.comparisons[other] = wilcoxon_rank_sum(a, b)
    return report


def _paired_values(runs, algo_a, algo_b):
    by_key: dict[tuple, dict[str, RunRecord]] = {}
    for r in runs:
        by_key.setdefault((r.n, r.d, r.c, r.instance), {})[r.algo] = r
    a, b = [], []
    for recs in by_key.values():
        ra, rb = recs.get(algo_a), recs.get(algo_b)
        if ra and rb and ra.succeeded and rb.succeeded:
            a.append(ra.value)
            b.append(rb.value)
    return a, b


# -- rank-sum test --------------------------------------------------------------------


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # rank sum of the first sample
    p_value: float  # one-sided: first sample stochastically smaller
    degenerate: bool = False
    small_sample: bool = False


def wilcoxon_rank_sum(sample_a, sample_b) -> WilcoxonResult:
    """Rank-sum test with mid-ranks, normal approximation, tie and
    continuity corrections."""
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    ranks = stats.rankdata(np.concatenate([a, b]))
    w = float(ranks[: a.size].sum())
    small = min(a.size, b.size) < 2
    if small:
        warnings.warn("rank-sum test on a single-element sample", RuntimeWarning, stacklevel=2)
    if np.all(np.concatenate([a, b]) == a[0]):
        return WilcoxonResult(w, 0.5, degenerate=True, small_sample=small)
    res = stats.mannwhitneyu(a, b, alternative="less", method="asymptotic", use_continuity=True)
    return WilcoxonResult(w, float(res.pvalue), small_sample=small)


# -- population size sweep ---------------------------------------------------------


@dataclass
class SweepRow:
    size: int
    mean_gap_pct: float
    mean_time_var_pct: float
    excluded: int = 0  # instances without a proven optimum


@dataclass
class SweepReport:
    rows: list[SweepRow]
    runs: list[dict]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for r in self.rows:
            w.writerow([r.size, f"{r.mean_gap_pct:.4f}", f"{r.mean_time_var_pct:.4f}"])
        return buf.getvalue()


def population_size_sweep(
    graphs: list[LabeledGraph],
    sizes,
    seed: int = 0,
    clock: str = "ticks",
    time_limit_ms: float | None = None,
    bb_time_limit_ms: float | None = None,
    devo: dict | None = None,
) -> SweepReport:
    """Mean % gap of the DGA value to the branch-and-bound optimum and mean
    % change of DGA run time relative to population size 2."""
    sizes = sorted(set(sizes))
    if not sizes or sizes[0] < 2:
        raise ValueError("population sizes must be at least 2")
    run_sizes = sizes if 2 in sizes else [2, *sizes]
    optimum: list[int | None] = []
    for g in graphs:
        res = branch_and_bound(g, time_limit_ms=bb_time_limit_ms, clock=_clock(clock))
        optimum.append(res.value if res.proven else None)
    runs = []
    for k, g in enumerate(graphs):
        for size in run_sizes:
            cfg = {**(devo or {}), "pop_size": size}
            tree, _, total, status, meta = run_algorithm("dga", g, seed + k, time_limit_ms, clock, cfg)
            runs.append({"instance": k, "size": size, "value": tree.value, "total_ms": total, "status": status,
                         "min_crossover_margin": meta["min_crossover_margin"]})
    base_time = {r["instance"]: r["total_ms"] for r in runs if r["size"] == 2}
    rows = []
    for size in sizes:
        gaps, tvars = [], []
        excluded = 0
        for r in (r for r in runs if r["size"] == size):
            opt = optimum[r["instance"]]
            if opt is None:
                excluded += 1
            else:
                gaps.append(100.0 * (r["value"] - opt) / opt)
            t2 = base_time[r["instance"]]
            tvars.append(100.0 * (r["total_ms"] - t2) / t2 if t2 > 0 else 0.0)
        rows.append(SweepRow(size, float(np.mean(gaps)) if gaps else math.nan, float(np.mean(tvars)), excluded))
    return SweepReport(rows, runs)
