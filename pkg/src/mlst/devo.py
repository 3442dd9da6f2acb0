"""Devolutionary genetic algorithm for MLST.

Individuals are LP relaxations restricted by a genome of variable fixings
and valid cuts. Their phenotype is the cutting-plane fixpoint of that LP,
which stays super-optimal until enough restrictions have accumulated to
make it integral. Crossover passes on edges and labels both parents agree
on around each terminal and adds cycle/triangle cuts through fractional
edges; mutation fixes an unused label at a terminal.
"""
from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field

from . import lp as lpmod
from .clock import WallClock
from .graph import AugmentedGraph, LabeledGraph, SteinerTree, augment, dfs_path, edge_key, prune_tree
from .heuristics import mvca
from .model import (
    LINK_PER_EDGE,
    Cut,
    CutError,
    MlstModel,
    SubtourPool,
    build_relaxation,
    cutting_plane_solve,
    make_cycle_cut,
    make_triangle_cut,
)

log = logging.getLogger(__name__)


INHERIT_UNION = "union"  # child restricted by every fixing of both parents
INHERIT_STRONGER = "stronger"  # stronger parent's fixings plus the shared ones

MUTATE_UNIFORM = "uniform"
MUTATE_LP_WEIGHTED = "lp-weighted"  # fractional terminal, label weighted by its y value


@dataclass
class DevoConfig:
    pop_size: int | None = None  # None: min(|Q|, 12)
    feasible_target: int = 3
    generations: int = 50
    mutation_rate: float = 0.1
    selection_fraction: float = 0.5
    seed: int = 0
    time_limit_ms: float | None = None
    link_mode: str = LINK_PER_EDGE
    max_targets: int = 4
    stall_mutation: bool = True  # also mutate children that gained no integrality
    inherit: str = INHERIT_UNION
    mutation_choice: str = MUTATE_LP_WEIGHTED
    backend: str | None = None

    def __post_init__(self):
        if self.pop_size is not None and self.pop_size < 2:
            raise ValueError("population size must be at least 2")
        if self.feasible_target < 1:
            raise ValueError("feasible target must be at least 1")
        if self.inherit not in (INHERIT_UNION, INHERIT_STRONGER):
            raise ValueError(f"unknown inheritance mode {self.inherit!r}")
        if self.mutation_choice not in (MUTATE_UNIFORM, MUTATE_LP_WEIGHTED):
            raise ValueError(f"unknown mutation choice {self.mutation_choice!r}")


@dataclass(frozen=True)
class Genome:
    q0: int
    fixings: frozenset  # of ((kind, ref), value)
    cuts: frozenset  # of cut keys

    def fixing_dict(self) -> dict:
        return dict(self.fixings)


@dataclass
class Individual:
    """Genome plus phenotype. Only the solution vectors are kept, the LP
    itself is dropped after evaluation."""

    genome: Genome
    x: dict
    y: dict
    fitness: int
    objective: float
    feasible: bool
    tree: SteinerTree | None
    index: int
    generation: int

    def rank_key(self):
        return (-self.fitness, round(self.objective, 9), self.index)


@dataclass
class RunStats:
    generations: list[dict] = field(default_factory=list)
    crossovers: list[dict] = field(default_factory=list)
    lp_solves: int = 0
    total_ms: float = 0.0
    time_to_best_ms: float = 0.0
    fallback: bool = False
    short_population: bool = False
    stop_reason: str = ""

    def to_jsonl(self, timing: bool = True) -> str:
        lines = []
        for rec in self.generations:
            rec = dict(rec)
            if not timing:
                rec.pop("elapsed_ms", None)
            lines.append(json.dumps(rec, sort_keys=True))
        return "\n".join(lines) + ("\n" if lines else "")


def fitness(x: dict) -> int:
    """Number of edge variables of G' at an integral value."""
    return sum(1 for v in x.values() if lpmod.is_integral(v))


class Devolver:
    """State for one run: instance, config, RNG, shared cut registry."""

    def __init__(self, g: LabeledGraph, cfg: DevoConfig, clock=None):
        self.g = g
        self.cfg = cfg
        self.rng = random.Random(cfg.seed)
        self.clock = clock or WallClock()
        self._bases: dict[int, MlstModel] = {}
        self.cuts: dict[tuple, Cut] = {}
        self.subtours = SubtourPool(g.n + 1)
        self._count = 0
        self.lp_solves = 0
        self.stats = RunStats()
        self.t0 = self.clock.now_ms()

    def out_of_time(self) -> bool:
        limit = self.cfg.time_limit_ms
        return limit is not None and self.clock.now_ms() - self.t0 >= limit

    # -- phenotype ----------------------------------------------------------------

    def base(self, q0: int) -> MlstModel:
        if q0 not in self._bases:
            model, _ = build_relaxation(augment(self.g, q0), self.cfg.link_mode, backend=self.cfg.backend)
            model.clock = self.clock
            self._bases[q0] = model
        return self._bases[q0]

    def register(self, cut: Cut) -> tuple:
        self.cuts.setdefault(cut.key, cut)
        return cut.key

    def evaluate(self, genome: Genome, generation: int) -> Individual | None:
        """Cutting-plane phenotype of ``genome``; None if its LP is infeasible."""
        model = self.base(genome.q0).copy()
        try:
            for (kind, ref), val in sorted(genome.fixings, key=_fix_order):
                model.fix(kind, ref, val)
        except CutError:
            return None
        for key in sorted(genome.cuts, key=repr):
            model.add_cut(self.cuts[key])
        # tree-size rows live in the run-level pool, not in genomes
        sol = cutting_plane_solve(model, pool=self.subtours)
        self.lp_solves += model.lp_solves
        if not sol.optimal:
            return None
        x = model.edge_values(sol)
        fit = fitness(x)
        tree = None
        if fit == model.num_edges:
            chosen = [e for e, v in x.items() if v > 0.5 and not model.graph.is_colorless(e)]
            try:
                tree = prune_tree(self.g, chosen)
            except ValueError:
                tree = None
        ind = Individual(genome, x, model.label_values(sol), fit, sol.objective, tree is not None, tree, self._count, generation)
        self._count += 1
        return ind

    # -- operators ------------------------------------------------------------------

    def init_population(self) -> list[Individual]:
        cfg = self.cfg
        terms = sorted(self.g.terminals)
        size = cfg.pop_size or min(len(terms), 12)
        pop: list[Individual] = []
        for q0 in terms[:size]:
            if self.out_of_time():
                self.stats.short_population = True
                return pop
            ind = self.evaluate(Genome(q0, frozenset(), frozenset()), 0)
            if ind is not None:
                pop.append(ind)
        branched: set[tuple[int, int]] = set()
        while len(pop) < size:
            if self.out_of_time():
                self.stats.short_population = True
                break
            pick = None
            for ind in pop:
                fixed = {ref for (kind, ref), _ in ind.genome.fixings if kind == "y"}
                best = None
                for lab, v in sorted(ind.y.items()):
                    frac = abs(v - round(v))
                    if frac > lpmod.INT_TOL and lab not in fixed and (ind.index, lab) not in branched:
                        if best is None or frac > best[0] + 1e-12:
                            best = (frac, lab)
                if best is not None:
                    pick = (ind, best[1])
                    break
            if pick is None:
                log.warning("branching exhausted at population %d < %d", len(pop), size)
                self.stats.short_population = True
                break
            ind, lab = pick
            branched.add((ind.index, lab))
            for val in (0, 1):
                if len(pop) >= size:
                    break
                g2 = Genome(ind.genome.q0, ind.genome.fixings | {(("y", lab), val)}, ind.genome.cuts)
                child = self.evaluate(g2, 0)
                if child is not None:
                    pop.append(child)
        return pop

    def select(self, pop: list[Individual]):
        """(pairs, idle, unselected) among the infeasible individuals."""
        pool = sorted((p for p in pop if not p.feasible), key=Individual.rank_key)
        if len(pool) < 2:
            return [], pool, []
        k = max(2, math.ceil(self.cfg.selection_fraction * len(pool)))
        chosen, rest = pool[:k], pool[k:]
        self.rng.shuffle(chosen)
        pairs = [(chosen[i], chosen[i + 1]) for i in range(0, len(chosen) - 1, 2)]
        idle = chosen[-1:] if len(chosen) % 2 else []
        return pairs, idle, rest

    def crossover(self, a: Individual, b: Individual, generation: int) -> Individual | None:
        g = self.g
        strong, weak = (b, a) if b.objective > a.objective else (a, b)
        fix = dict(strong.genome.fixings)
        if self.cfg.inherit == INHERIT_UNION:
            for ref, val in weak.genome.fixings:
                if fix.get(ref, val) != val:
                    log.info("crossover %d x %d: conflicting fixings", a.index, b.index)
                    return None
                fix[ref] = val
        cuts = set(a.genome.cuts) | set(b.genome.cuts)
        xa, xb, ya, yb = a.x, b.x, a.y, b.y

        def one(v):
            return abs(v - 1.0) <= lpmod.INT_TOL

        # pass on labels (and edges) common to both parents around each terminal
        for t in sorted(g.terminals):
            for e in g.incident(t):
                lab = g.label_of(*e)
                if one(ya[lab]) and one(yb[lab]):
                    if fix.get(("y", lab), 1) != 1:
                        return None
                    fix[("y", lab)] = 1
                    if one(xa.get(e, 0.0)) and one(xb.get(e, 0.0)):
                        if fix.get(("x", e), 1) != 1:
                            return None
                        fix[("x", e)] = 1

        # cut off fractional edges next to Steiner nodes
        ga = self.base(strong.genome.q0).graph
        vp = ga.virtual
        steiner = g.steiner_nodes
        frac = sorted({e for e in set(xa) | set(xb) if not ga.is_colorless(e)
                       and (not lpmod.is_integral(xa.get(e, 0.0)) or not lpmod.is_integral(xb.get(e, 0.0)))})
        for e in frac:
            u, v = e
            su, sv = ga.is_steiner(u), ga.is_steiner(v)
            if su and sv:
                cuts.add(self.register(make_triangle_cut(ga, u, v)))
            elif su or sv:
                v1, v2 = (u, v) if su else (v, u)
                made = 0
                for s in steiner:
                    if s == v1 or made >= self.cfg.max_targets:
                        continue
                    path = dfs_path(ga, v2, s, forbidden_nodes={v1}, forbidden_edges={e})
                    if path is None:
                        continue
                    cycle = [edge_key(vp, v1), e, *path, edge_key(s, vp)]
                    try:
                        cuts.add(self.register(make_cycle_cut(ga, cycle, v1, s)))
                        made += 1
                    except CutError as exc:
                        log.debug("no cycle cut for %s -> %s: %s", e, s, exc)
                if not made:
                    log.debug("edge %s contributes no cycle cut", e)

        # the child keeps the anchor and fixings of the stronger parent, so its
        # LP is a restriction of that parent's and cannot fall below it
        q0 = strong.genome.q0
        child = self.evaluate(Genome(q0, frozenset(fix.items()), frozenset(cuts)), generation)
        self.stats.crossovers.append({
            "generation": generation,
            "parents": [a.index, b.index],
            "parent_objectives": [a.objective, b.objective],
            "child_objective": None if child is None else child.objective,
        })
        return child

    def mutate(self, child: Individual, generation: int, force: bool = False) -> Individual:
        if child.feasible:
            return child
        # draw even when forced so the random stream does not depend on it
        if self.rng.random() >= self.cfg.mutation_rate and not force:
            return child
        g = self.g
        terms = sorted(g.terminals)
        if self.cfg.mutation_choice != MUTATE_UNIFORM:
            # only terminals the phenotype does not yet connect integrally
            terms = [t for t in terms if any(not lpmod.is_integral(child.x.get(e, 0.0)) for e in g.incident(t))]
            if not terms:
                log.info("mutation: every terminal already integrally connected")
                return child
        t = self.rng.choice(terms)
        fixed = {ref for (kind, ref), _ in child.genome.fixings if kind == "y"}
        labels = sorted({g.label_of(*e) for e in g.incident(t)} - fixed)
        if not labels:
            log.info("mutation: terminal %d has no unfixed label", t)
            return child
        if self.cfg.mutation_choice == MUTATE_LP_WEIGHTED:
            weights = [child.y.get(l, 0.0) + 1e-3 for l in labels]
            lab = self.rng.choices(labels, weights=weights)[0]
        else:
            lab = self.rng.choice(labels)
        genome = Genome(child.genome.q0, child.genome.fixings | {(("y", lab), 1)}, child.genome.cuts)
        out = self.evaluate(genome, generation)
        return out if out is not None else child

    # -- main loop --------------------------------------------------------------------

    def run(self) -> tuple[SteinerTree, RunStats, bool]:
        cfg = self.cfg
        t0 = self.t0 = self.clock.now_ms()
        stats = self.stats
        archive: list[Individual] = []
        best_at = [None, 0.0]

        def elapsed():
            return self.clock.now_ms() - t0

        def archive_add(ind):
            archive.append(ind)
            if best_at[0] is None or ind.tree.value < best_at[0]:
                best_at[0] = ind.tree.value
                best_at[1] = elapsed()

        pop = self.init_population()
        size = cfg.pop_size or min(len(self.g.terminals), 12)
        for ind in pop:
            if ind.feasible:
                archive_add(ind)
        generation = 0
        while True:
            infeasible = [p for p in pop if not p.feasible]
            stats.generations.append({
                "generation": generation,
                "population": len(pop),
                "archive": len(archive),
                "best_fitness": max((p.fitness for p in pop), default=0),
                "mean_fitness": round(sum(p.fitness for p in pop) / len(pop), 6) if pop else 0.0,
                "objectives": [round(p.objective, 9) for p in sorted(pop, key=lambda p: p.index)],
                "best_value": best_at[0],
                "cuts": len(self.cuts),
                "lp_solves": self.lp_solves,
                "elapsed_ms": round(elapsed(), 3),
            })
            if len(archive) >= cfg.feasible_target:
                stats.stop_reason = "feasible_target"
                break
            if generation >= cfg.generations:
                stats.stop_reason = "generation_cap"
                break
            if self.out_of_time():
                stats.stop_reason = "time_limit"
                break
            if len(infeasible) < 2:
                stats.stop_reason = "pool_exhausted"
                break
            generation += 1
            pairs, idle, rest = self.select(pop)
            # parents stay in the pool; the rank truncation below retires them
            nxt: list[Individual] = list(infeasible)
            for a, b in pairs:
                if self.out_of_time():
                    break
                child = self.crossover(a, b, generation)
                if child is None:
                    continue
                stalled = child.fitness <= max(a.fitness, b.fitness)
                child = self.mutate(child, generation, force=self.cfg.stall_mutation and stalled)
                if child.feasible:
                    archive_add(child)
                else:
                    nxt.append(child)
            seen = set()
            uniq = []
            for ind in sorted(nxt, key=Individual.rank_key):
                key = (ind.genome.q0, ind.genome.fixings, ind.genome.cuts)
                if key not in seen:
                    seen.add(key)
                    uniq.append(ind)
            pop = uniq[:size]

        stats.lp_solves = self.lp_solves
        stats.total_ms = elapsed()
        if archive:
            best = min(archive, key=lambda i: (i.tree.value, i.generation, i.index))
            stats.time_to_best_ms = best_at[1]
            return best.tree, stats, False
        _, tree = mvca(self.g)
        stats.fallback = True
        stats.time_to_best_ms = stats.total_ms
        return tree, stats, True


def _fix_order(item):
    (kind, ref), val = item
    return (kind, repr(ref), val)


def init_population(g: LabeledGraph, cfg: DevoConfig, clock=None) -> list[Individual]:
    return Devolver(g, cfg, clock).init_population()


def run(g: LabeledGraph, cfg: DevoConfig | None = None, clock=None) -> tuple[SteinerTree, RunStats]:
    tree, stats, _ = Devolver(g, cfg or DevoConfig(), clock).run()
    return tree, stats
