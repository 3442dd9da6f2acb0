import random

import pytest

from conftest import S1, S2, S3, T1, T2, T3
from mlst.graph import (
    InstanceError,
    InstanceSpec,
    LabeledGraph,
    SolutionViolation,
    augment,
    dfs_path,
    edge_key,
    format_instance,
    generate_random,
    parse_instance,
    prune_tree,
    validate_solution,
)


def test_smallest_instance():
    g = parse_instance("p mlst 2 1 1 2\nt 0\nt 1\ne 0 1 0\n")
    assert (g.n, g.m, g.num_labels) == (2, 1, 1)
    assert g.terminals == {0, 1}


def test_toy_parses(toy):
    assert (toy.n, toy.m, toy.num_labels) == (6, 8, 4)
    assert toy.terminals == {T1, T2, T3}
    tree = validate_solution(toy, [(T1, T2), (T2, S3), (S3, S1), (S1, S2), (S2, T3)])
    assert tree.value == 2


@pytest.mark.parametrize(
    "text, needle",
    [
        ("p mlst 2 1 4 2\nt 0\nt 1\ne 0 1 7\n", "label out of range"),
        ("t 0\n", "record before header"),
        ("p mlst 2 1 1 2\nt 0\nt 1\ne 0 1 0\ne 1 0 0\n", "duplicate edge"),
        ("p mlst 3 1 1 2\nt 0\nt 1\ne 0 1 0\n", "disconnected"),
        ("p mlst 2 1 1 2\nt 0\nt 1\ne 0 0 0\n", "self-loop"),
        ("p mlst 2 1 1 2\nt 0\nt 5\ne 0 1 0\n", "out of range"),
        ("p mlst 2 2 1 2\nt 0\nt 1\ne 0 1 0\n", "expected 2 edges"),
        ("p mlst 2 1 1 2\nt 0\nt 1\nx 0 1 0\n", "unknown record"),
        ("", "missing header"),
    ],
)
def test_parse_errors(text, needle):
    with pytest.raises(InstanceError, match=needle):
        parse_instance(text)


def test_parse_error_reports_line():
    with pytest.raises(InstanceError, match="line 4"):
        parse_instance("p mlst 2 1 4 2\nt 0\nt 1\ne 0 1 7\n")


def test_format_roundtrip(toy):
    assert parse_instance(format_instance(toy, "toy")) == toy


def test_generate_edge_and_terminal_counts():
    g = generate_random(InstanceSpec(50, 0.25, 12, 0.25, 3))
    assert g.m == 306
    assert len(g.terminals) == 12


def test_generate_deterministic():
    spec = InstanceSpec(25, 0.5, 6, 0.25, 11)
    assert generate_random(spec) == generate_random(spec)


def test_generate_always_connected():
    rng = random.Random(5)
    for _ in range(1000):
        n = rng.randint(4, 30)
        dmin = 2 / n
        d = rng.uniform(dmin, 1.0)
        spec = InstanceSpec(n, d, rng.randint(1, n), 0.25 if n >= 8 else 0.5, rng.getrandbits(32))
        if spec.m < n - 1:
            continue
        g = generate_random(spec)
        assert g.is_connected() and g.m == spec.m


def test_generate_rejects_sparse():
    with pytest.raises(InstanceError):
        generate_random(InstanceSpec(3, 0.1, 2, 0.7, 0))


def test_augment_toy(toy):
    ga = augment(toy, T2)
    vp = ga.virtual
    colorless = [e for e in ga.edges if vp in e]
    assert sorted(colorless) == sorted(edge_key(vp, k) for k in (T2, S1, S2, S3))
    assert len(ga.edges) == toy.m + 4
    assert all(ga.is_colorless(e) for e in colorless)
    assert ga.label(edge_key(T1, T2)) == 1


def test_augment_all_terminals():
    g = LabeledGraph(3, ((0, 1, 0), (1, 2, 0)), 1, frozenset({0, 1, 2}))
    ga = augment(g, 1)
    assert [e for e in ga.edges if ga.virtual in e] == [(1, 3)]


def test_augment_rejects_steiner_anchor(toy):
    with pytest.raises(ValueError):
        augment(toy, S1)


def test_dfs_builds_first_cycle(toy):
    # from the terminal end of {s3,t3} to another Steiner node
    ga = augment(toy, T2)
    assert dfs_path(ga, T3, S2, forbidden_nodes={S3}, forbidden_edges={(T3, S3)}) == [edge_key(T3, S2)]


def test_dfs_none_cases(toy):
    ga = augment(toy, T2)
    # t1 only reaches the rest through t2
    assert dfs_path(ga, T1, S1, forbidden_nodes={T2}) is None
    blocked = {v for e in toy.incident(T3) for v in e if v != T3}
    assert dfs_path(ga, T3, T1, forbidden_nodes=blocked) is None
    with pytest.raises(ValueError):
        dfs_path(ga, T1, T1)


def test_dfs_path_is_elementary(toy):
    ga = augment(toy, T1)
    path = dfs_path(ga, T1, T3)
    nodes = [path[0][0] if path[0][0] == T1 else path[0][1]]
    for u, v in path:
        assert ga.has_edge(u, v) and not ga.is_colorless(edge_key(u, v))
        nodes.append(v if u == nodes[-1] else u)
    assert nodes[0] == T1 and nodes[-1] == T3
    assert len(set(nodes)) == len(nodes)


def test_validate_rejections(toy):
    with pytest.raises(SolutionViolation) as err:
        validate_solution(toy, [])
    assert err.value.kind == "disconnected"
    with pytest.raises(SolutionViolation) as err:
        validate_solution(toy, [(T3, S2), (S2, S3), (T3, S3), (T1, T2), (T2, S3)])
    assert err.value.kind == "cycle"
    assert sorted(err.value.detail) == [(T3, S2), (T3, S3), (S2, S3)]
    with pytest.raises(SolutionViolation) as err:
        validate_solution(toy, [(T1, T3)])
    assert err.value.kind == "unknown edge"


def test_prune_drops_steiner_leaves(toy):
    tree = prune_tree(toy, [(T1, T2), (T2, S3), (S3, T3), (S3, S1)])
    assert tree.edges == (edge_key(T1, T2), edge_key(T2, S3), edge_key(T3, S3))
    assert tree.value == 3
