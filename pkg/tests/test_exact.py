import pytest

from conftest import mvca_trap
from mlst.clock import TickClock
from mlst.exact import branch_and_bound, brute_force
from mlst.graph import InstanceSpec, LabeledGraph, generate_random, validate_solution
from mlst.heuristics import mvca
from mlst.model import LINK_AGGREGATED


def test_toy(toy):
    value, tree = brute_force(toy)
    assert value == 2 and validate_solution(toy, tree.edges).value == 2
    res = branch_and_bound(toy)
    assert res.proven and res.value == 2
    assert res.root_bound == pytest.approx(1.5, abs=1e-6)


def test_single_label(single_label):
    assert brute_force(single_label)[0] == 1
    res = branch_and_bound(single_label)
    assert res.proven and res.value == 1 and res.nodes == 1


def test_alternating_path():
    g = LabeledGraph(5, tuple((i, i + 1, i % 2) for i in range(4)), 2, frozenset({0, 4}))
    assert brute_force(g)[0] == 2
    assert branch_and_bound(g).value == 2


def test_trap():
    g = mvca_trap()
    assert brute_force(g)[0] == 2
    res = branch_and_bound(g)
    assert res.proven and res.value == 2


def test_brute_force_guard():
    g = generate_random(InstanceSpec(30, 0.5, 25, 0.25, 0))
    with pytest.raises(ValueError, match="guard"):
        brute_force(g)


@pytest.mark.parametrize("link_mode", [None, LINK_AGGREGATED])
def test_matches_oracle(link_mode):
    kwargs = {} if link_mode is None else {"link_mode": link_mode}
    for seed in range(15):
        g = generate_random(InstanceSpec(10, 0.4, 6, 0.3, seed))
        opt = brute_force(g)[0]
        res = branch_and_bound(g, **kwargs)
        assert res.proven and res.value == opt
        validate_solution(g, res.tree.edges)
        assert res.root_bound <= opt + 1e-6 <= mvca(g)[1].value + 1e-6


def test_incumbents_non_increasing():
    g = generate_random(InstanceSpec(14, 0.5, 7, 0.25, 3))
    res = branch_and_bound(g)
    values = [v for _, v in res.incumbents]
    assert values == sorted(values, reverse=True)
    assert res.time_to_best_ms <= res.incumbents[-1][0] + 1e-9


def test_node_count_deterministic():
    g = generate_random(InstanceSpec(14, 0.5, 7, 0.25, 9))
    a = branch_and_bound(g, clock=TickClock())
    b = branch_and_bound(g, clock=TickClock())
    assert (a.nodes, a.value, a.tree) == (b.nodes, b.value, b.tree)


def test_timeout_returns_incumbent():
    g = generate_random(InstanceSpec(50, 0.25, 12, 0.25, 7))
    res = branch_and_bound(g, time_limit_ms=1)
    assert not res.proven
    validate_solution(g, res.tree.edges)
