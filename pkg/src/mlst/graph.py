"""Labeled graphs, instance I/O, random generation, v' augmentation and validation."""
from __future__ import annotations

import json
import random
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable

Edge = tuple[int, int]


class InstanceError(ValueError):
    """Raised for malformed or invalid instances."""


def edge_key(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.count = n

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        self.count -= 1
        return True


@dataclass(frozen=True)
class LabeledGraph:
    n: int
    edges: tuple[tuple[int, int, int], ...]
    num_labels: int
    terminals: frozenset[int]

    def __post_init__(self):
        if self.n < 1:
            raise InstanceError("node count must be positive")
        if self.num_labels < 1:
            raise InstanceError("label count must be positive")
        seen = set()
        for u, v, lab in self.edges:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise InstanceError(f"node id out of range in edge ({u}, {v})")
            if u == v:
                raise InstanceError(f"self-loop on node {u}")
            if not 0 <= lab < self.num_labels:
                raise InstanceError(f"label out of range: {lab}")
            k = edge_key(u, v)
            if k in seen:
                raise InstanceError(f"duplicate edge {k}")
            seen.add(k)
        if len(self.terminals) < 2:
            raise InstanceError("at least two terminals required")
        for t in self.terminals:
            if not 0 <= t < self.n:
                raise InstanceError(f"terminal {t} out of range")
        if not self.is_connected():
            raise InstanceError("graph is disconnected")

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def steiner_nodes(self) -> list[int]:
        return [k for k in range(self.n) if k not in self.terminals]

    def label_of(self, u: int, v: int) -> int:
        return self._labels[edge_key(u, v)]

    @property
    def _labels(self) -> dict[Edge, int]:
        cache = self.__dict__.get("_label_cache")
        if cache is None:
            cache = {edge_key(u, v): lab for u, v, lab in self.edges}
            object.__setattr__(self, "_label_cache", cache)
        return cache

    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Neighbour lists of (neighbour, label), sorted by neighbour id."""
        cache = self.__dict__.get("_adj_cache")
        if cache is None:
            cache = [[] for _ in range(self.n)]
            for u, v, lab in self.edges:
                cache[u].append((v, lab))
                cache[v].append((u, lab))
            for lst in cache:
                lst.sort()
            object.__setattr__(self, "_adj_cache", cache)
        return cache

    def incident(self, k: int) -> list[Edge]:
        return [edge_key(k, v) for v, _ in self.adjacency()[k]]

    def edges_by_label(self) -> list[list[Edge]]:
        cache = self.__dict__.get("_by_label_cache")
        if cache is None:
            cache = [[] for _ in range(self.num_labels)]
            for u, v, lab in self.edges:
                cache[lab].append(edge_key(u, v))
            object.__setattr__(self, "_by_label_cache", cache)
        return cache

    def is_connected(self) -> bool:
        uf = UnionFind(self.n)
        for u, v, _ in self.edges:
            uf.union(u, v)
        return uf.count == 1


@dataclass(frozen=True)
class AugmentedGraph:
    """G' = G plus a virtual node ``n`` joined by colorless edges to every
    Steiner node and to the anchor terminal ``q0``."""

    base: LabeledGraph
    q0: int
    edges: tuple[Edge, ...] = field(init=False)
    colorless: tuple[Edge, ...] = field(init=False)

    def __post_init__(self):
        if self.q0 not in self.base.terminals:
            raise InstanceError(f"anchor {self.q0} is not a terminal")
        vp = self.base.n
        hubs = sorted(self.base.steiner_nodes + [self.q0])
        colorless = tuple((k, vp) for k in hubs)
        original = tuple(edge_key(u, v) for u, v, _ in self.base.edges)
        object.__setattr__(self, "colorless", colorless)
        object.__setattr__(self, "edges", original + colorless)

    @property
    def virtual(self) -> int:
        return self.base.n

    @property
    def num_nodes(self) -> int:
        return self.base.n + 1

    def is_colorless(self, e: Edge) -> bool:
        return e[1] == self.base.n

    def is_steiner(self, k: int) -> bool:
        return k < self.base.n and k not in self.base.terminals

    def is_terminal(self, k: int) -> bool:
        return k in self.base.terminals

    def label(self, e: Edge) -> int | None:
        if self.is_colorless(e):
            return None
        return self.base.label_of(*e)

    def has_edge(self, u: int, v: int) -> bool:
        return edge_key(u, v) in self.index

    @property
    def index(self) -> dict[Edge, int]:
        cache = self.__dict__.get("_index_cache")
        if cache is None:
            cache = {e: i for i, e in enumerate(self.edges)}
            object.__setattr__(self, "_index_cache", cache)
        return cache

    def strip(self) -> LabeledGraph:
        """Drop v' and its colorless edges."""
        return self.base


def augment(g: LabeledGraph, q0: int | None = None) -> AugmentedGraph:
    if q0 is None:
        q0 = min(g.terminals)
    return AugmentedGraph(g, q0)


@dataclass(frozen=True)
class SteinerTree:
    edges: tuple[Edge, ...]
    labels: frozenset[int]

    @property
    def value(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class InstanceSpec:
    n: int
    density: float
    colors: int
    terminal_ratio: float = 0.25
    seed: int = 0

    @property
    def m(self) -> int:
        return int(self.density * self.n * (self.n - 1) / 2 + 1e-9)


# -- instance text format --------------------------------------------------


def parse_instance(text: str) -> LabeledGraph:
    header = None
    terminals: list[int] = []
    edges: list[tuple[int, int, int]] = []
    seen: dict[Edge, int] = {}

    def fail(lineno: int, msg: str):
        raise InstanceError(f"line {lineno}: {msg}")

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "p":
            if header is not None:
                fail(lineno, "duplicate header")
            if len(tok) != 6 or tok[1] != "mlst":
                fail(lineno, "malformed header, expected 'p mlst <n> <m> <L> <|Q|>'")
            try:
                header = tuple(int(x) for x in tok[2:])
            except ValueError:
                fail(lineno, "malformed header, non-integer field")
            if min(header) < 0 or header[0] < 1 or header[2] < 1:
                fail(lineno, "malformed header, bad sizes")
            continue
        if header is None:
            fail(lineno, "record before header")
        n, m, num_labels, nq = header
        try:
            vals = [int(x) for x in tok[1:]]
        except ValueError:
            fail(lineno, "non-integer field")
        if tok[0] == "t":
            if len(vals) != 1:
                fail(lineno, "terminal record needs one node id")
            if not 0 <= vals[0] < n:
                fail(lineno, f"node id out of range: {vals[0]}")
            if vals[0] in terminals:
                fail(lineno, f"duplicate terminal {vals[0]}")
            terminals.append(vals[0])
        elif tok[0] == "e":
            if len(vals) != 3:
                fail(lineno, "edge record needs 'e <u> <v> <label>'")
            u, v, lab = vals
            if not (0 <= u < n and 0 <= v < n):
                fail(lineno, f"node id out of range in edge ({u}, {v})")
            if u == v:
                fail(lineno, f"self-loop on node {u}")
            if not 0 <= lab < num_labels:
                fail(lineno, f"label out of range: {lab} (|L|={num_labels})")
            k = edge_key(u, v)
            if k in seen:
                fail(lineno, f"duplicate edge {k}, first seen on line {seen[k]}")
            seen[k] = lineno
            edges.append((u, v, lab))
        else:
            fail(lineno, f"unknown record type {tok[0]!r}")
    if header is None:
        raise InstanceError("line 1: missing header")
    n, m, num_labels, nq = header
    last = len(text.splitlines())
    if len(terminals) != nq:
        raise InstanceError(f"line {last}: expected {nq} terminals, found {len(terminals)}")
    if len(edges) != m:
        raise InstanceError(f"line {last}: expected {m} edges, found {len(edges)}")
    try:
        return LabeledGraph(n, tuple(edges), num_labels, frozenset(terminals))
    except InstanceError as exc:
        raise InstanceError(f"line {last}: {exc}") from None


def format_instance(g: LabeledGraph, comment: str | None = None) -> str:
    lines = []
    if comment:
        lines.extend(f"# {c}" for c in comment.splitlines())
    lines.append(f"p mlst {g.n} {g.m} {g.num_labels} {len(g.terminals)}")
    lines.extend(f"t {t}" for t in sorted(g.terminals))
    lines.extend(f"e {u} {v} {lab}" for u, v, lab in g.edges)
    return "\n".join(lines) + "\n"


def read_instance(path) -> LabeledGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


# -- random instances -------------------------------------------------------


def generate_random(spec: InstanceSpec) -> LabeledGraph:
    n = spec.n
    m = spec.m
    if n < 2:
        raise InstanceError("need at least two nodes")
    if m < n - 1:
        raise InstanceError(f"density too low to connect: m={m} < n-1={n - 1}")
    nq = int(spec.terminal_ratio * n + 1e-9)
    if nq < 2:
        raise InstanceError(f"terminal ratio yields {nq} terminals, need >= 2")
    rng = random.Random(spec.seed)

    # uniform random spanning tree via a random walk (Aldous-Broder)
    chosen: set[Edge] = set()
    visited = [False] * n
    cur = rng.randrange(n)
    visited[cur] = True
    remaining = n - 1
    while remaining:
        nxt = rng.randrange(n - 1)
        if nxt >= cur:
            nxt += 1
        if not visited[nxt]:
            visited[nxt] = True
            chosen.add(edge_key(cur, nxt))
            remaining -= 1
        cur = nxt

    extra = m - (n - 1)
    if extra:
        pool = [(u, v) for u in range(n) for v in range(u + 1, n) if (u, v) not in chosen]
        chosen.update(rng.sample(pool, extra))

    edges = tuple((u, v, rng.randrange(spec.colors)) for u, v in sorted(chosen))
    terminals = frozenset(rng.sample(range(n), nq))
    return LabeledGraph(n, edges, spec.colors, terminals)


# -- path search -------------------------------------------------------------


def dfs_path(
    ga: AugmentedGraph,
    source: int,
    target: int,
    forbidden_nodes: Iterable[int] = (),
    forbidden_edges: Iterable[Edge] = (),
) -> list[Edge] | None:
    """Elementary path over original edges from ``source`` to ``target``.

    Neighbours are explored in id order, except that ``target`` is taken
    first whenever it is adjacent to the current node.
    """
    if source == target:
        raise ValueError("source and target must differ")
    g = ga.base
    if not (0 <= source < g.n and 0 <= target < g.n):
        return None
    blocked = set(forbidden_nodes)
    if source in blocked or target in blocked:
        return None
    bad_edges = {edge_key(*e) for e in forbidden_edges}
    adj = g.adjacency()

    def options(u):
        nbrs = [v for v, _ in adj[u] if v not in blocked and edge_key(u, v) not in bad_edges]
        if target in nbrs:
            return [target]
        return nbrs

    visited = {source}
    parent: dict[int, int] = {}
    stack = [(source, iter(options(source)))]
    while stack:
        u, it = stack[-1]
        for v in it:
            if v in visited:
                continue
            visited.add(v)
            parent[v] = u
            if v == target:
                nodes = [v]
                while nodes[-1] != source:
                    nodes.append(parent[nodes[-1]])
                nodes.reverse()
                return [edge_key(a, b) for a, b in zip(nodes, nodes[1:])]
            stack.append((v, iter(options(v))))
            break
        else:
            stack.pop()
    return None


# -- validation ----------------------------------------------------------------


class SolutionViolation(ValueError):
    def __init__(self, kind: str, detail):
        self.kind = kind
        self.detail = detail
        super().__init__(f"{kind}: {detail}")


def validate_solution(g: LabeledGraph, edge_set: Iterable[Edge]) -> SteinerTree:
    """Check that ``edge_set`` is a forest connecting all terminals.

    Raises :class:`SolutionViolation` with kind ``"unknown edge"``,
    ``"cycle"`` (detail: the cycle's edges) or ``"disconnected"`` (detail: a
    terminal pair).
    """
    edges = sorted({edge_key(*e) for e in edge_set})
    labels_of = g._labels
    for e in edges:
        if e not in labels_of:
            raise SolutionViolation("unknown edge", e)
    uf = UnionFind(g.n)
    adj: dict[int, list[int]] = defaultdict(list)
    for u, v in edges:
        if not uf.union(u, v):
            raise SolutionViolation("cycle", _tree_path(adj, u, v) + [(u, v)])
        adj[u].append(v)
        adj[v].append(u)
    terms = sorted(g.terminals)
    root = uf.find(terms[0])
    for t in terms[1:]:
        if uf.find(t) != root:
            raise SolutionViolation("disconnected", (terms[0], t))
    return SteinerTree(tuple(edges), frozenset(labels_of[e] for e in edges))


def _tree_path(adj, u, v) -> list[Edge]:
    prev = {u: None}
    q = deque([u])
    while q:
        a = q.popleft()
        if a == v:
            break
        for b in adj[a]:
            if b not in prev:
                prev[b] = a
                q.append(b)
    out = []
    while prev.get(v) is not None:
        out.append(edge_key(v, prev[v]))
        v = prev[v]
    return out


def prune_tree(g: LabeledGraph, edge_set: Iterable[Edge]) -> SteinerTree:
    """Strip non-terminal leaves repeatedly, then validate."""
    edges = {edge_key(*e) for e in edge_set}
    deg: dict[int, int] = defaultdict(int)
    inc: dict[int, set[Edge]] = defaultdict(set)
    for e in edges:
        for k in e:
            deg[k] += 1
            inc[k].add(e)
    stack = [k for k, d in deg.items() if d == 1 and k not in g.terminals]
    while stack:
        k = stack.pop()
        if deg[k] != 1:
            continue
        (e,) = inc[k]
        edges.discard(e)
        for a in e:
            deg[a] -= 1
            inc[a].discard(e)
            if deg[a] == 1 and a not in g.terminals:
                stack.append(a)
    return validate_solution(g, edges)


def spanning_tree_for_labels(g: LabeledGraph, labels: Iterable[int]) -> SteinerTree | None:
    """Pruned spanning tree of the terminal component using only ``labels``,
    or None when those labels leave the terminals disconnected."""
    allowed = set(labels)
    uf = UnionFind(g.n)
    picked = []
    for u, v, lab in g.edges:
        if lab in allowed and uf.union(u, v):
            picked.append((u, v))
    terms = list(g.terminals)
    root = uf.find(terms[0])
    if any(uf.find(t) != root for t in terms):
        return None
    comp = [e for e in picked if uf.find(e[0]) == root]
    return prune_tree(g, comp)


# -- solution document -------------------------------------------------------


def solution_document(
    tree: SteinerTree,
    algorithm: str,
    elapsed_ms: float,
    seed: int | None = None,
    **extra,
) -> dict:
    doc = {
        "value": tree.value,
        "labels": sorted(tree.labels),
        "edges": [list(e) for e in sorted(tree.edges)],
        "algorithm": algorithm,
        "elapsed_ms": round(elapsed_ms, 3),
        "seed": seed,
    }
    doc.update(extra)
    return doc


def dump_solution(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def load_solution(text: str) -> dict:
    doc = json.loads(text)
    for key in ("value", "labels", "edges"):
        if key not in doc:
            raise InstanceError(f"solution document missing field {key!r}")
    return doc
