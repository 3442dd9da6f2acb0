"""Greedy label-addition (MVCA style) and the one-step Pilot Method."""
from __future__ import annotations

from typing import Iterable

from .graph import LabeledGraph, SteinerTree, UnionFind, spanning_tree_for_labels


def _state(g: LabeledGraph, labels: Iterable[int]) -> UnionFind:
    uf = UnionFind(g.n)
    by_label = g.edges_by_label()
    for lab in labels:
        for u, v in by_label[lab]:
            uf.union(u, v)
    return uf


def _score(g: LabeledGraph, uf: UnionFind) -> tuple[int, int]:
    """(components holding a terminal, total components)."""
    return len({uf.find(t) for t in g.terminals}), uf.count


def _with_label(g: LabeledGraph, uf: UnionFind, lab: int) -> UnionFind:
    trial = UnionFind.__new__(UnionFind)
    trial.parent = uf.parent[:]
    trial.count = uf.count
    for u, v in g.edges_by_label()[lab]:
        trial.union(u, v)
    return trial


def _connects(g: LabeledGraph, labels: Iterable[int]) -> bool:
    return _score(g, _state(g, labels))[0] == 1


def mvca(g: LabeledGraph, fixed: Iterable[int] = (), clock=None) -> tuple[frozenset[int], SteinerTree]:
    """Greedy: add the label leaving the fewest terminal-bearing components
    (then fewest components, then lowest id) until the terminals are joined;
    then drop redundant labels in reverse order of addition.

    ``fixed`` labels are taken as already chosen and are never dropped.
    """
    fixed = list(dict.fromkeys(fixed))
    chosen = set(fixed)
    order: list[int] = []
    uf = _state(g, chosen)
    while _score(g, uf)[0] > 1:
        best = None
        for lab in range(g.num_labels):
            if lab in chosen or not g.edges_by_label()[lab]:
                continue
            trial = _with_label(g, uf, lab)
            if clock is not None:
                clock.tick()
            key = (*_score(g, trial), lab)
            if best is None or key < best[0]:
                best = (key, lab, trial)
        _, lab, uf = best
        chosen.add(lab)
        order.append(lab)
    for lab in reversed(order):
        if _connects(g, chosen - {lab}):
            chosen.discard(lab)
    tree = spanning_tree_for_labels(g, chosen)
    return frozenset(tree.labels), tree


def pilot(g: LabeledGraph, clock=None) -> tuple[frozenset[int], SteinerTree]:
    """For every unfixed label, fix it tentatively and complete greedily;
    commit the label whose completion is smallest (ties: lowest id)."""
    fixed: list[int] = []
    best_tree: SteinerTree | None = None
    while not _connects(g, fixed):
        pick = None
        for lab in range(g.num_labels):
            if lab in fixed or not g.edges_by_label()[lab]:
                continue
            _, tree = mvca(g, fixed + [lab], clock=clock)
            if pick is None or tree.value < pick[0]:
                pick = (tree.value, lab, tree)
        value, lab, tree = pick
        if best_tree is None or value < best_tree.value:
            best_tree = tree
        fixed.append(lab)
    final = spanning_tree_for_labels(g, fixed)
    if best_tree is None or final.value < best_tree.value:
        best_tree = final
    return frozenset(best_tree.labels), best_tree
