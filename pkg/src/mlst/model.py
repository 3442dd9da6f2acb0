"""MLST integer program over G', its relaxation, and valid inequalities.

Columns: one ``x_e`` per edge of G' (original edges first, then colorless
ones) followed by one ``y_l`` per label.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import networkx as nx
import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import breadth_first_order, maximum_flow

from . import lp as lpmod
from .graph import AugmentedGraph, Edge, UnionFind, edge_key
from .lp import EQ, GE, LE, LinearProgram, LpSolution, Row

log = logging.getLogger(__name__)

LINK_PER_EDGE = "edge"  # y_l(e) >= x_e for every edge
LINK_AGGREGATED = "aggregated"  # sum_{S_l} x_e <= min(|S_l|, n-1) y_l
VIOLATION_TOL = 1e-6
ROUND_CAP = 500
MAX_CUTS_PER_ROUND = 60
ENUM_MAX_NODES = 18
ENUM_MAX_SIZE = 8


class CutError(ValueError):
    pass


@dataclass(frozen=True)
class Cut:
    """A valid inequality stated over edge keys so that it can be
    materialised in any G' built on the same base graph."""

    kind: str  # "subtour" | "cycle" | "triangle"
    key: tuple
    nodes: tuple[int, ...] = ()  # W for subtours
    cycle: tuple[Edge, ...] = ()
    si: int = -1
    sj: int = -1
    chord: bool = False

    def terms(self, ga: AugmentedGraph) -> tuple[list[tuple[Edge, float]], float]:
        """(edge coefficient list, rhs) of the ``<=`` row in graph ``ga``."""
        if self.kind == "subtour":
            ends = _edge_ends(ga)
            mask = np.zeros(ga.num_nodes, dtype=bool)
            mask[list(self.nodes)] = True
            inside = np.flatnonzero(mask[ends[:, 0]] & mask[ends[:, 1]])
            coefs = [(ga.edges[i], 1.0) for i in inside]
            return coefs, float(len(self.nodes) - 1)
        vp = ga.virtual
        chord = edge_key(self.si, self.sj)
        if self.kind == "cycle":
            coefs = [(e, 1.0) for e in self.cycle]
            if ga.has_edge(*chord):
                coefs.append((chord, 1.0))
            return coefs, float(len(self.cycle) - 2)
        return [(edge_key(vp, self.si), 0.5), (edge_key(vp, self.sj), 0.5), (chord, 1.0)], 1.0

    def row(self, model: "MlstModel") -> Row:
        ga = model.graph
        idx = ga.index
        if self.kind == "subtour":
            ends = _edge_ends(ga)
            mask = np.zeros(ga.num_nodes, dtype=bool)
            mask[list(self.nodes)] = True
            inside = mask[ends[:, 0]] & mask[ends[:, 1]]
            if 2 * inside.sum() > len(inside):
                # same row in the sparser complement form: with sum x = n,
                # x(E(W)) <= |W|-1  <=>  x(E' \ E(W)) >= n - |W| + 1
                outside = np.flatnonzero(~inside)
                return Row.make([(idx[ga.edges[i]], 1.0) for i in outside], GE,
                                float(ga.base.n - len(self.nodes) + 1), self.kind)
        coefs, rhs = self.terms(ga)
        return Row.make([(idx[e], a) for e, a in coefs if e in idx], LE, rhs, self.kind)

    def evaluate(self, ga: AugmentedGraph, x: dict[Edge, float]) -> tuple[float, float]:
        """(lhs, rhs) of the cut in its as-stated form: for cycles
        ``sum_C x`` against ``|C|-2-x_chord``, for triangles the half-sum
        against ``1-x_{si,sj}``."""
        if self.kind == "subtour":
            coefs, rhs = self.terms(ga)
            return sum(a * x.get(e, 0.0) for e, a in coefs), rhs
        if self.kind == "cycle":
            lhs = sum(x.get(e, 0.0) for e in self.cycle)
            chord = edge_key(self.si, self.sj)
            return lhs, len(self.cycle) - 2 - x.get(chord, 0.0)
        vp = ga.virtual
        lhs = (x.get(edge_key(vp, self.si), 0.0) + x.get(edge_key(vp, self.sj), 0.0)) / 2
        return lhs, 1.0 - x.get(edge_key(self.si, self.sj), 0.0)


def subtour_cut(nodes: Iterable[int]) -> Cut:
    w = tuple(sorted(set(nodes)))
    if len(w) < 2:
        raise CutError("subtour set needs at least two nodes")
    return Cut("subtour", ("subtour", w), nodes=w)


@dataclass
class MlstModel:
    graph: AugmentedGraph
    link_mode: str
    lp: LinearProgram
    edge_var: dict[Edge, int]
    label_var: dict[int, int]
    label_edges: list[list[Edge]]
    cut_pool: list[Cut] = field(default_factory=list)
    cut_keys: set = field(default_factory=set)
    fixings: dict[tuple[str, object], int] = field(default_factory=dict)
    rounds: int = 0
    lp_solves: int = 0
    backend: str | None = None
    clock: object = None
    # materialized rows by cut key; shared by copies over the same G'
    row_cache: dict = field(default_factory=dict)

    @property
    def num_edges(self) -> int:
        return len(self.graph.edges)

    def add_cut(self, cut: Cut) -> bool:
        if cut.key in self.cut_keys:
            return False
        self.cut_keys.add(cut.key)
        self.cut_pool.append(cut)
        row = self.row_cache.get(cut.key)
        if row is None:
            row = self.row_cache[cut.key] = cut.row(self)
        self.lp.add_constraint(row)
        return True

    def fix(self, kind: str, ref, value: int) -> None:
        """Fix ``x`` (ref = edge key) or ``y`` (ref = label) to 0/1.
        Fixing an edge to 1 also fixes its label to 1."""
        prev = self.fixings.get((kind, ref))
        if prev is not None and prev != value:
            raise CutError(f"conflicting fixing for {kind}{ref}")
        if kind == "x":
            if ref not in self.edge_var:
                if value == 0:
                    return
                raise CutError(f"edge {ref} not in G'")
            col = self.edge_var[ref]
        else:
            col = self.label_var[ref]
        if not self.lp.lower[col] <= value <= self.lp.upper[col]:
            raise CutError(f"fixing {kind}{ref}={value} outside current bounds")
        self.fixings[(kind, ref)] = value
        self.lp.fix_variable(col, value)
        if kind == "x" and value == 1:
            lab = self.graph.label(ref)
            if lab is not None:
                self.fix("y", lab, 1)

    def copy(self) -> "MlstModel":
        return MlstModel(
            self.graph,
            self.link_mode,
            self.lp.copy(),
            self.edge_var,
            self.label_var,
            self.label_edges,
            list(self.cut_pool),
            set(self.cut_keys),
            dict(self.fixings),
            backend=self.backend,
            clock=self.clock,
            row_cache=self.row_cache,
        )

    def edge_ends(self) -> np.ndarray:
        """(|E'|, 2) endpoint array aligned with the edge columns."""
        return _edge_ends(self.graph)

    def edge_values(self, sol: LpSolution) -> dict[Edge, float]:
        return {e: float(sol.values[j]) for e, j in self.edge_var.items()}

    def label_values(self, sol: LpSolution) -> dict[int, float]:
        return {lab: float(sol.values[j]) for lab, j in self.label_var.items()}

    def solve(self) -> LpSolution:
        self.lp_solves += 1
        if self.clock is not None:
            self.clock.tick()
        return lpmod.solve(self.lp, self.backend)

    def debug_text(self) -> str:
        lines = [f"# G' anchor q0={self.graph.q0}, link={self.link_mode}, cuts={len(self.cut_pool)}"]
        lines.extend(f"# cut {c.kind} {c.key[1:]}" for c in self.cut_pool)
        return "\n".join(lines) + "\n" + self.lp.to_lp_text()


def _edge_ends(ga: AugmentedGraph) -> np.ndarray:
    arr = ga.__dict__.get("_ends_cache")
    if arr is None:
        arr = np.array(ga.edges, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(ga, "_ends_cache", arr)
    return arr


def build_relaxation(ga: AugmentedGraph, link_mode: str = LINK_AGGREGATED, backend: str | None = None):
    if link_mode not in (LINK_PER_EDGE, LINK_AGGREGATED):
        raise ValueError(f"unknown link mode {link_mode!r}")
    g = ga.base
    ne = len(ga.edges)
    nv = ne + g.num_labels
    edge_var = {e: i for i, e in enumerate(ga.edges)}
    label_var = {lab: ne + lab for lab in range(g.num_labels)}
    names = [f"x_{u}_{v}" for u, v in ga.edges] + [f"y_{lab}" for lab in range(g.num_labels)]
    obj = np.zeros(nv)
    obj[ne:] = 1.0
    lp = LinearProgram(nv, objective=obj, names=names)

    lp.add_constraint(Row.make({j: 1.0 for j in range(ne)}, EQ, g.n, "tree_size"))

    label_edges = g.edges_by_label()
    if link_mode == LINK_PER_EDGE:
        for u, v, lab in g.edges:
            e = edge_key(u, v)
            lp.add_constraint(Row.make({label_var[lab]: 1.0, edge_var[e]: -1.0}, GE, 0.0, "link"))
    else:
        for lab, es in enumerate(label_edges):
            if not es:
                continue
            coefs = {edge_var[e]: 1.0 for e in es}
            coefs[label_var[lab]] = -float(min(len(es), g.n - 1))
            lp.add_constraint(Row.make(coefs, LE, 0.0, "link"))

    vp = ga.virtual
    for k in g.steiner_nodes:
        hub = edge_var[edge_key(vp, k)]
        for e in g.incident(k):
            lp.add_constraint(Row.make({hub: 1.0, edge_var[e]: 1.0}, LE, 1.0, "degree"))

    model = MlstModel(ga, link_mode, lp, edge_var, label_var, label_edges, backend=backend)
    return model, lp


# -- separation -----------------------------------------------------------------


def _excess(w: Sequence[int], ends: np.ndarray, xe: np.ndarray, nv: int) -> float:
    """x(E(W)) - (|W| - 1) for edge values ``xe`` aligned with ``ends``."""
    mask = np.zeros(nv, dtype=bool)
    mask[list(w)] = True
    return float(xe[mask[ends[:, 0]] & mask[ends[:, 1]]].sum()) - (len(w) - 1)


def _components(nodes: int, edges: Iterable[Edge]) -> list[list[int]]:
    uf = UnionFind(nodes)
    for u, v in edges:
        uf.union(u, v)
    comps: dict[int, list[int]] = {}
    for k in range(nodes):
        comps.setdefault(uf.find(k), []).append(k)
    return [c for c in comps.values() if len(c) >= 2]


def _enumerate_subsets(nv: int, x: dict[Edge, float], max_size: int) -> list[tuple[int, ...]]:
    support = [(e, v) for e, v in x.items() if v > 1e-9]
    masks = np.arange(1 << nv, dtype=np.int64)
    pop = np.zeros(masks.shape, dtype=np.int64)
    for b in range(nv):
        pop += (masks >> b) & 1
    keep = (pop >= 2) & (pop <= max_size)
    masks, pop = masks[keep], pop[keep]
    total = np.zeros(masks.shape)
    for (u, v), val in support:
        em = (1 << u) | (1 << v)
        total += np.where((masks & em) == em, val, 0.0)
    viol = total - (pop - 1) > VIOLATION_TOL
    out = []
    order = np.argsort(-(total - pop)[viol], kind="stable")
    for mk in masks[viol][order][:MAX_CUTS_PER_ROUND]:
        out.append(tuple(b for b in range(nv) if (int(mk) >> b) & 1))
    return out


_FLOW_SCALE = 1 << 20
_FLOW_BIG = 1 << 30


def _mincut_subsets(nv: int, ends: np.ndarray, xe: np.ndarray) -> list[tuple[int, ...]]:
    """For each node k, a node set W containing k that maximises
    x(E(W)) - |W| + 1, found by one max-flow per node.

    Writing x(E(W)) - |W| = sum_W (deg/2 - 1) - x(delta(W))/2 turns the
    maximisation into a minimum s-t cut. Capacities are scaled to
    integers, so the sets are candidates to be re-checked exactly."""
    keep = xe > 1e-9
    u, v, val = ends[keep, 0], ends[keep, 1], xe[keep]
    deg = np.bincount(u, val, nv) + np.bincount(v, val, nv)
    w = deg / 2 - 1
    src, snk = nv, nv + 1
    half = np.rint(val / 2 * _FLOW_SCALE).astype(np.int64)
    neg = np.flatnonzero(w < 0)
    # every node gets a source arc (zero capacity unless w > 0) so the
    # network is built once and only the forced node's arc changes
    src_cap = np.where(w > 0, np.rint(w * _FLOW_SCALE), 0)
    rows = np.concatenate([u, v, np.full(nv, src), neg])
    cols = np.concatenate([v, u, np.arange(nv), np.full(len(neg), snk)])
    caps = np.concatenate([half, half, src_cap + 1, np.rint(-w[neg] * _FLOW_SCALE)]).astype(np.int32)
    graph = sparse.csr_array((caps, (rows, cols)), shape=(nv + 2, nv + 2))
    graph.sum_duplicates()
    start, stop = graph.indptr[src], graph.indptr[src + 1]
    slot = dict(zip(graph.indices[start:stop].tolist(), range(start, stop)))
    graph.data[start:stop] -= 1  # the +1 above only kept explicit zeros in place
    out = []
    covered = np.zeros(nv, dtype=bool)
    for k in range(nv):
        # a node inside a set already found violated rarely yields a new one
        if covered[k]:
            continue
        saved = graph.data[slot[k]]
        graph.data[slot[k]] = _FLOW_BIG
        res = maximum_flow(graph, src, snk)
        graph.data[slot[k]] = saved
        resid = (graph - res.flow).tocsr()
        resid.data[resid.data < 0] = 0
        resid.eliminate_zeros()
        reach = breadth_first_order(resid, src, directed=True, return_predecessors=False)
        w = tuple(sorted(int(i) for i in reach if i < nv))
        out.append(w)
        if len(w) >= 2 and _excess(w, ends, xe, nv) > VIOLATION_TOL:
            covered[list(w)] = True
    return out


def separate_subtour(model: MlstModel, solution: LpSolution, exact_small: bool = True) -> list[Cut]:
    """Violated tree-size (subtour elimination) rows for ``solution``.

    Exact on integral points; on fractional points this tries, in order,
    components of the x >= 0.5 support, the cycle basis of the positive
    support, for small G' explicit subset enumeration, and finally one
    min-cut per node, which finds every row violated by more than the
    capacity rounding of that step.
    """
    if not solution.optimal:
        return []
    x = model.edge_values(solution)
    nv = model.graph.num_nodes
    ends = model.edge_ends()
    xe = solution.values[: model.num_edges]
    found: dict[tuple, float] = {}
    seen: set = set()

    def consider(w):
        w = tuple(sorted(set(w)))
        if len(w) >= 2 and w not in seen:
            seen.add(w)
            ex = _excess(w, ends, xe, nv)
            if ex > VIOLATION_TOL:
                found[w] = ex

    for thr in (0.5, 1e-6):
        sel = ends[xe >= thr]
        for comp in _components(nv, map(tuple, sel)):
            consider(comp)
    heavy = ends[xe >= 0.5]
    supp = nx.Graph()
    supp.add_edges_from(map(tuple, ends[xe > 1e-6].tolist()))
    for cyc in nx.cycle_basis(supp):
        consider(cyc)
        # widen a cycle by its heavy neighbourhood
        mask = np.zeros(nv, dtype=bool)
        mask[cyc] = True
        cross = heavy[mask[heavy[:, 0]] != mask[heavy[:, 1]]]
        consider(set(cyc) | set(cross.ravel().tolist()))
    fractional = not _integral(x)
    if not found and fractional and exact_small and nv <= ENUM_MAX_NODES:
        for w in _enumerate_subsets(nv, x, ENUM_MAX_SIZE):
            consider(w)
    if not found and fractional:
        for w in _mincut_subsets(nv, ends, xe):
            consider(w)
    ranked = sorted(found.items(), key=lambda kv: (-kv[1], kv[0]))
    return [subtour_cut(w) for w, _ in ranked[:MAX_CUTS_PER_ROUND]]


def _integral(x: dict[Edge, float]) -> bool:
    return all(lpmod.is_integral(v) for v in x.values())


class SubtourPool:
    """Shared store of tree-size rows, checked in bulk against LP points.

    Rows are kept as node-membership masks so that one pool serves
    models over different anchors."""

    def __init__(self, num_nodes: int):
        self.num_nodes = num_nodes
        self.cuts: list[Cut] = []
        self._keys: set = set()
        self._masks: list[np.ndarray] = []
        self._stack: np.ndarray | None = None
        self._float: np.ndarray | None = None
        self._sizes: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.cuts)

    def add(self, cut: Cut) -> bool:
        if cut.kind != "subtour" or cut.key in self._keys:
            return False
        mask = np.zeros(self.num_nodes, dtype=bool)
        mask[list(cut.nodes)] = True
        self._keys.add(cut.key)
        self.cuts.append(cut)
        self._masks.append(mask)
        self._stack = None
        return True

    def violated(self, model: MlstModel, sol: LpSolution, limit: int = MAX_CUTS_PER_ROUND) -> list[Cut]:
        if not self.cuts:
            return []
        if self._stack is None:
            self._stack = np.vstack(self._masks)
            self._float = self._stack.astype(float)
            self._sizes = self._stack.sum(axis=1)
        ends = model.edge_ends()
        x = sol.values[: len(ends)]
        # x(E(W)) = m^T X m / 2 with X the weighted adjacency matrix
        adj = np.zeros((self.num_nodes, self.num_nodes))
        np.add.at(adj, (ends[:, 0], ends[:, 1]), x)
        adj += adj.T
        mf = self._float
        excess = 0.5 * np.einsum("ij,ij->i", mf @ adj, mf) - (self._sizes - 1)
        out = []
        for i in np.argsort(-excess, kind="stable"):
            if excess[i] <= VIOLATION_TOL or len(out) >= limit:
                break
            if self.cuts[i].key not in model.cut_keys:
                out.append(self.cuts[i])
        return out


def cutting_plane_solve(model: MlstModel, round_cap: int = ROUND_CAP, pool: SubtourPool | None = None) -> LpSolution:
    """Solve, separate tree-size rows, add them, repeat to a fixpoint.

    With a shared ``pool``, stored rows are tried before fresh separation
    and every new row is stored; the fixpoint then satisfies every row in
    the pool."""
    sol = model.solve()
    for _ in range(round_cap):
        if not sol.optimal:
            return sol
        new = pool.violated(model, sol) if pool is not None else []
        if not new:
            new = separate_subtour(model, sol)
            if pool is not None:
                for c in new:
                    pool.add(c)
        new = [c for c in new if model.add_cut(c)]
        if not new:
            return sol
        model.rounds += 1
        sol = model.solve()
    log.warning("cutting-plane round cap %d reached", round_cap)
    return sol


# -- cycle and triangle cuts ----------------------------------------------------------


def make_cycle_cut(model_or_graph, cycle: Sequence[Edge], si: int, sj: int) -> Cut:
    """Cycle through v' via {v',si} and {v',sj}: sum_C x <= |C| - 2 - x_{si,sj}."""
    ga = _graph(model_or_graph)
    vp = ga.virtual
    edges = [edge_key(*e) for e in cycle]
    if len(set(edges)) != len(edges):
        raise CutError("cycle repeats an edge")
    if len(edges) == 3:
        raise CutError("triangles must use make_triangle_cut")
    if len(edges) < 4:
        raise CutError("cycle must have at least 4 edges")
    for e in edges:
        if not ga.has_edge(*e):
            raise CutError(f"edge {e} not in G'")
    if not (ga.is_steiner(si) and ga.is_steiner(sj)) or si == sj:
        raise CutError("cycle endpoints at v' must be distinct Steiner nodes")
    if edge_key(vp, si) not in edges or edge_key(vp, sj) not in edges:
        raise CutError("cycle must contain {v',si} and {v',sj}")
    if edge_key(si, sj) in edges:
        raise CutError("chord {si,sj} must not lie on the cycle")
    deg: dict[int, int] = {}
    for e in edges:
        for k in e:
            deg[k] = deg.get(k, 0) + 1
    if any(d != 2 for d in deg.values()) or len(_components(ga.num_nodes, edges)) != 1:
        raise CutError("edges do not form an elementary cycle")
    a, b = sorted((si, sj))
    return Cut("cycle", ("cycle", tuple(sorted(edges)), a, b), cycle=tuple(edges), si=a, sj=b,
               chord=ga.has_edge(a, b))


def make_triangle_cut(model_or_graph, si: int, sj: int) -> Cut:
    """(x_{v',si} + x_{v',sj}) / 2 <= 1 - x_{si,sj}."""
    ga = _graph(model_or_graph)
    if not (ga.is_steiner(si) and ga.is_steiner(sj)) or si == sj:
        raise CutError("triangle endpoints must be distinct Steiner nodes")
    if not ga.has_edge(si, sj):
        raise CutError(f"edge ({si}, {sj}) does not exist")
    a, b = sorted((si, sj))
    return Cut("triangle", ("triangle", a, b), si=a, sj=b, chord=True)


def check_cut_against_tree(cut: Cut, ga: AugmentedGraph, x: dict[Edge, float], tol: float = 1e-9) -> bool:
    lhs, rhs = cut.evaluate(ga, x)
    return lhs <= rhs + tol


def _graph(obj) -> AugmentedGraph:
    return obj.graph if isinstance(obj, MlstModel) else obj


def random_degree_rule_tree(ga: AugmentedGraph, rng) -> dict[Edge, float]:
    """Incidence vector of a random spanning tree of G' in which every
    Steiner node adjacent to v' is a leaf.

    Random subset of Steiner nodes hang off v'; the remaining nodes get a
    random spanning tree over original edges (Kruskal on shuffled edges),
    and v' attaches to q0.
    """
    g = ga.base
    vp = ga.virtual
    while True:
        leaves = {k for k in g.steiner_nodes if rng.random() < 0.5}
        rest = [k for k in range(g.n) if k not in leaves]
        edges = [edge_key(u, v) for u, v, _ in g.edges if u not in leaves and v not in leaves]
        rng.shuffle(edges)
        uf = UnionFind(g.n)
        chosen = []
        for u, v in edges:
            if uf.union(u, v):
                chosen.append((u, v))
        root = uf.find(rest[0])
        if all(uf.find(k) == root for k in rest):
            break
    x = {e: 0.0 for e in ga.edges}
    for e in chosen:
        x[e] = 1.0
    for k in leaves:
        x[edge_key(vp, k)] = 1.0
    x[edge_key(vp, ga.q0)] = 1.0
    return x


def all_candidate_cuts(ga: AugmentedGraph, max_cycle_len: int = 7, limit: int = 400) -> list[Cut]:
    """Every triangle cut plus cycle cuts from elementary Steiner-to-Steiner
    paths, for property testing."""
    g = ga.base
    steiner = g.steiner_nodes
    vp = ga.virtual
    cuts: list[Cut] = []
    for a, b in itertools.combinations(steiner, 2):
        if ga.has_edge(a, b):
            cuts.append(make_triangle_cut(ga, a, b))
    G = nx.Graph()
    G.add_nodes_from(range(g.n))
    G.add_edges_from((u, v) for u, v, _ in g.edges)
    for a, b in itertools.combinations(steiner, 2):
        for path in nx.all_simple_paths(G, a, b, cutoff=max_cycle_len - 2):
            if len(path) == 2:
                continue
            cyc = [edge_key(vp, a)] + [edge_key(p, q) for p, q in zip(path, path[1:])] + [edge_key(b, vp)]
            cuts.append(make_cycle_cut(ga, cyc, a, b))
            if len(cuts) >= limit:
                return cuts
    return cuts
