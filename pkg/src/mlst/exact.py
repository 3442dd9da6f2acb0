"""Exact solvers: label-subset enumeration and LP-based branch and bound."""
from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field

from . import lp as lpmod
from .clock import WallClock
from .graph import LabeledGraph, SteinerTree, UnionFind, augment, prune_tree, spanning_tree_for_labels
from .heuristics import mvca
from .model import LINK_PER_EDGE, CutError, build_relaxation, cutting_plane_solve

log = logging.getLogger(__name__)

BRUTE_MAX_LABELS = 20


def brute_force(g: LabeledGraph, clock=None) -> tuple[int, SteinerTree]:
    if g.num_labels > BRUTE_MAX_LABELS:
        raise ValueError(f"brute force guard: |L|={g.num_labels} > {BRUTE_MAX_LABELS}")
    by_label = g.edges_by_label()
    terms = list(g.terminals)
    used = [lab for lab in range(g.num_labels) if by_label[lab]]
    for k in range(1, len(used) + 1):
        for subset in itertools.combinations(used, k):
            if clock is not None:
                clock.tick()
            uf = UnionFind(g.n)
            for lab in subset:
                for u, v in by_label[lab]:
                    uf.union(u, v)
            root = uf.find(terms[0])
            if all(uf.find(t) == root for t in terms):
                tree = spanning_tree_for_labels(g, subset)
                return tree.value, tree
    raise AssertionError("connected instance has no feasible label set")


@dataclass
class BnbNode:
    fixings: dict = field(default_factory=dict)  # ("x", edge) | ("y", label) -> 0/1
    depth: int = 0
    parent_bound: float = 0.0


@dataclass
class BnbResult:
    value: int
    tree: SteinerTree
    nodes: int
    proven: bool
    root_bound: float
    incumbents: list[tuple[float, int]]  # (elapsed ms, value)

    @property
    def time_to_best_ms(self) -> float:
        return self.incumbents[-1][0] if self.incumbents else 0.0


def _most_fractional(values: dict, tol=lpmod.INT_TOL):
    best = None
    for ref, v in sorted(values.items()):
        frac = abs(v - round(v))
        if frac > tol and (best is None or frac > best[0] + 1e-12):
            best = (frac, ref)
    return None if best is None else best[1]


def branch_and_bound(
    g: LabeledGraph,
    time_limit_ms: float | None = None,
    link_mode: str = LINK_PER_EDGE,
    clock=None,
    backend: str | None = None,
) -> BnbResult:
    """Depth-first dives with best-bound restarts. Bounds come from the
    cutting-plane relaxation under the node's fixings; branching takes the
    most fractional label variable, then the most fractional edge variable."""
    clock = clock or WallClock()
    t_start = clock.now_ms()

    def elapsed():
        return clock.now_ms() - t_start

    _, inc_tree = mvca(g, clock=clock)
    incumbents = [(elapsed(), inc_tree.value)]
    ga = augment(g)
    base, _ = build_relaxation(ga, link_mode, backend=backend)
    base.clock = clock

    def offer(tree: SteinerTree):
        nonlocal inc_tree
        if tree.value < inc_tree.value:
            inc_tree = tree
            incumbents.append((elapsed(), tree.value))

    def can_improve(bound: float) -> bool:
        return bound < inc_tree.value - (1 - 1e-6)

    def evaluate(node: BnbNode):
        model = base.copy()
        try:
            for (kind, ref), val in sorted(node.fixings.items(), key=lambda kv: (kv[0][0], kv[0][1])):
                model.fix(kind, ref, val)
        except CutError:
            return None, None
        sol = cutting_plane_solve(model)
        # tree-size rows are globally valid: share them with later nodes
        for c in model.cut_pool[len(base.cut_pool):]:
            base.add_cut(c)
        return model, sol

    nodes = 0
    root_bound = None
    heap: list = []
    counter = itertools.count()
    stack = [BnbNode()]
    proven = True
    while stack or heap:
        if time_limit_ms is not None and elapsed() > time_limit_ms:
            proven = False
            break
        if stack:
            node = stack.pop()
        else:
            bound, _, node = heapq.heappop(heap)
            if not can_improve(bound):
                continue
        if not can_improve(node.parent_bound):
            continue
        nodes += 1
        model, sol = evaluate(node)
        if sol is None or not sol.optimal:
            continue
        bound = sol.objective
        if root_bound is None:
            root_bound = bound
        x = model.edge_values(sol)
        y = model.label_values(sol)
        # primal heuristic: labels carrying any LP weight
        support = [lab for lab, v in y.items() if v > lpmod.INT_TOL]
        tree = spanning_tree_for_labels(g, support)
        if tree is not None:
            offer(tree)
        if all(lpmod.is_integral(v) for v in x.values()):
            chosen = [e for e, v in x.items() if v > 0.5 and not ga.is_colorless(e)]
            offer(prune_tree(g, chosen))
        if not can_improve(bound):
            continue
        ref = _most_fractional(y)
        kind = "y"
        if ref is None:
            ref = _most_fractional({e: v for e, v in x.items()})
            kind = "x"
        if ref is None:
            continue
        kids = [BnbNode({**node.fixings, (kind, ref): val}, node.depth + 1, bound) for val in (0, 1)]
        # dive into the up-branch first; the sibling waits in the heap
        stack.append(kids[1])
        heapq.heappush(heap, (bound, next(counter), kids[0]))
    if root_bound is None:
        root_bound = float(inc_tree.value)
    return BnbResult(inc_tree.value, inc_tree, nodes, proven, root_bound, incumbents)
