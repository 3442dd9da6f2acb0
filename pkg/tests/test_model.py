import random

import numpy as np
import pytest

from conftest import S1, S2, S3, T1, T2, T3
from mlst.exact import brute_force
from mlst.graph import InstanceSpec, LabeledGraph, augment, dfs_path, edge_key, generate_random
from mlst.lp import GE, LE, LpSolution
from mlst.model import (
    LINK_AGGREGATED,
    LINK_PER_EDGE,
    CutError,
    SubtourPool,
    all_candidate_cuts,
    build_relaxation,
    check_cut_against_tree,
    cutting_plane_solve,
    make_cycle_cut,
    make_triangle_cut,
    random_degree_rule_tree,
    separate_subtour,
    subtour_cut,
)

# hexagon graph: terminals t1..t4, Steiner s1, s2, v' joined to s1, s2 and t1
H_T1, H_T2, H_T3, H_T4, H_S1, H_S2 = range(6)


@pytest.fixture
def hexagon():
    edges = (
        (H_T1, H_T2, 0), (H_S2, H_T2, 1), (H_T2, H_T3, 0),
        (H_T3, H_T4, 2), (H_T4, H_S1, 1), (H_S1, H_S2, 2),
    )
    g = LabeledGraph(6, edges, 3, frozenset({H_T1, H_T2, H_T3, H_T4}))
    return augment(g, H_T1)


def hexagon_cycle(ga):
    vp = ga.virtual
    cyc = [(vp, H_S2), (H_S2, H_T2), (H_T2, H_T3), (H_T3, H_T4), (H_T4, H_S1), (H_S1, vp)]
    return make_cycle_cut(ga, cyc, H_S2, H_S1)


def hexagon_tree(ga):
    vp = ga.virtual
    x = {e: 0.0 for e in ga.edges}
    for e in [(H_S1, vp), (vp, H_T1), (H_T1, H_T2), (H_S2, H_T2), (H_T2, H_T3), (H_T3, H_T4)]:
        x[edge_key(*e)] = 1.0
    return x


def hexagon_fractional(ga):
    x = hexagon_tree(ga)
    x[edge_key(H_T1, H_T2)] = 0.5
    x[edge_key(H_S1, H_S2)] = 0.5
    return x


def test_hexagon_cycle_row(hexagon):
    cut = hexagon_cycle(hexagon)
    coefs, rhs = cut.terms(hexagon)
    vp = hexagon.virtual
    expected = {edge_key(*e) for e in [(vp, H_S2), (H_S2, H_T2), (H_T2, H_T3), (H_T3, H_T4), (H_T4, H_S1), (H_S1, vp), (H_S1, H_S2)]}
    assert {e for e, _ in coefs} == expected
    assert all(a == 1.0 for _, a in coefs)
    assert rhs == 4.0


def test_hexagon_tree_tight(hexagon):
    cut = hexagon_cycle(hexagon)
    assert cut.evaluate(hexagon, hexagon_tree(hexagon)) == (4.0, 4.0)
    assert check_cut_against_tree(cut, hexagon, hexagon_tree(hexagon))


def test_hexagon_fractional_violated(hexagon):
    cut = hexagon_cycle(hexagon)
    assert cut.evaluate(hexagon, hexagon_fractional(hexagon)) == (4.0, 3.5)
    assert not check_cut_against_tree(cut, hexagon, hexagon_fractional(hexagon))


def test_hexagon_fractional_separation(hexagon):
    # the half-edges do not make any node set too dense
    model, _ = build_relaxation(hexagon)
    x = hexagon_fractional(hexagon)
    vals = np.zeros(model.lp.num_vars)
    for e, j in model.edge_var.items():
        vals[j] = x[e]
    assert separate_subtour(model, LpSolution("optimal", vals, 0.0)) == []


def test_cycle_cut_preconditions(hexagon):
    vp = hexagon.virtual
    with pytest.raises(CutError):
        make_cycle_cut(hexagon, [(vp, H_S1), (H_S1, H_S2), (H_S2, vp)], H_S1, H_S2)
    with pytest.raises(CutError):  # t1 is not Steiner
        make_cycle_cut(hexagon, [(vp, H_T1), (H_T1, H_T2), (H_T2, H_S2), (H_S2, vp)], H_T1, H_S2)
    with pytest.raises(CutError):  # chord on the cycle
        make_cycle_cut(hexagon, [(vp, H_S1), (H_S1, H_S2), (H_S2, H_T2), (H_T2, vp)], H_S1, H_S2)


# -- toy cuts -------------------------------------------------------------------


def toy_cycle(ga, e, target):
    """Cycle cut the way crossover builds it from a fractional edge ``e``
    with a Steiner end."""
    v1, v2 = (e[0], e[1]) if ga.is_steiner(e[0]) else (e[1], e[0])
    path = dfs_path(ga, v2, target, forbidden_nodes={v1}, forbidden_edges={e})
    vp = ga.virtual
    return make_cycle_cut(ga, [edge_key(vp, v1), edge_key(*e), *path, edge_key(target, vp)], v1, target)


def test_toy_first_cut(toy):
    ga = augment(toy, T2)
    vp = ga.virtual
    cut = toy_cycle(ga, edge_key(S3, T3), S2)
    assert set(cut.cycle) == {edge_key(vp, S3), edge_key(S3, T3), edge_key(T3, S2), edge_key(S2, vp)}
    x1 = {edge_key(vp, S3): 0.0, edge_key(S3, T3): 0.5, edge_key(T3, S2): 1.0, edge_key(S2, vp): 0.0, edge_key(S3, S2): 1.0}
    assert cut.evaluate(ga, x1) == (1.5, 1.0)


def test_toy_second_cut(toy):
    ga = augment(toy, T2)
    vp = ga.virtual
    cut = toy_cycle(ga, edge_key(S1, T3), S2)
    assert set(cut.cycle) == {edge_key(vp, S1), edge_key(S1, T3), edge_key(T3, S2), edge_key(S2, vp)}
    x2 = {edge_key(vp, S1): 0.5, edge_key(S1, T3): 0.5, edge_key(T3, S2): 1.0, edge_key(S2, vp): 0.0, edge_key(S1, S2): 0.5}
    assert cut.evaluate(ga, x2) == (2.0, 1.5)


def test_triangle_cut_cases(toy):
    ga = augment(toy, T2)
    vp = ga.virtual
    cut = make_triangle_cut(ga, S1, S2)
    on, a, b = edge_key(S1, S2), edge_key(vp, S1), edge_key(vp, S2)
    assert cut.evaluate(ga, {on: 0.0, a: 1.0, b: 1.0}) == (1.0, 1.0)
    assert cut.evaluate(ga, {on: 0.0, a: 0.0, b: 0.0}) == (0.0, 1.0)
    # chord used: both hub edges must be off
    for xa in (0.0, 1.0):
        for xb in (0.0, 1.0):
            lhs, rhs = cut.evaluate(ga, {on: 1.0, a: xa, b: xb})
            assert (lhs <= rhs) == (xa == xb == 0.0)
    with pytest.raises(CutError):
        make_triangle_cut(ga, S1, T3)
    with pytest.raises(CutError):
        make_triangle_cut(ga, S1, S1)


# -- relaxation -----------------------------------------------------------------


@pytest.mark.parametrize("mode", [LINK_AGGREGATED, LINK_PER_EDGE])
def test_toy_relaxation(toy, mode):
    model, _ = build_relaxation(augment(toy, T2), mode)
    sol = cutting_plane_solve(model)
    assert sol.objective == pytest.approx(1.5, abs=1e-6)
    assert sol.objective <= brute_force(toy)[0]


def test_single_label_path_relaxation():
    g = LabeledGraph(3, ((0, 1, 0), (1, 2, 0)), 1, frozenset({0, 2}))
    for mode in (LINK_AGGREGATED, LINK_PER_EDGE):
        model, _ = build_relaxation(augment(g), mode)
        sol = cutting_plane_solve(model)
        assert sol.objective == pytest.approx(1.0)
        assert all(abs(v - round(v)) < 1e-6 for v in sol.values)


def test_single_label_with_steiner_nodes_is_weak(single_label):
    # hub edges to v' let the LP spread the tree, so the bound drops below 1
    bounds = {}
    for mode in (LINK_AGGREGATED, LINK_PER_EDGE):
        model, _ = build_relaxation(augment(single_label), mode)
        bounds[mode] = cutting_plane_solve(model).objective
    assert bounds[LINK_AGGREGATED] == pytest.approx(2 / 3)
    assert bounds[LINK_PER_EDGE] == pytest.approx(0.5)


def test_aggregated_link_coefficient():
    edges = ((0, 1, 0), (1, 2, 0), (2, 3, 0), (3, 4, 1), (4, 5, 1))
    g = LabeledGraph(6, edges, 2, frozenset({0, 5}))
    model, lp = build_relaxation(augment(g), LINK_AGGREGATED)
    link = [r for r in lp.rows if r.name == "link"]
    y0 = model.label_var[0]
    row = next(r for r in link if any(j == y0 for j, _ in r.coefs))
    assert dict(row.coefs)[y0] == -3.0
    assert row.sense == LE and row.rhs == 0.0


def test_fix_edge_sets_label(toy):
    model, _ = build_relaxation(augment(toy, T2))
    model.fix("x", edge_key(T1, T2), 1)
    assert model.fixings[("y", 1)] == 1
    with pytest.raises(CutError):
        model.fix("y", 1, 0)


def test_bound_below_oracle():
    for seed in range(8):
        g = generate_random(InstanceSpec(10, 0.5, 5, 0.3, seed))
        model, _ = build_relaxation(augment(g))
        sol = cutting_plane_solve(model)
        assert sol.objective <= brute_force(g)[0] + 1e-6


# -- separation -----------------------------------------------------------------


def solution_from(model, x):
    vals = np.zeros(model.lp.num_vars)
    for e, v in x.items():
        vals[model.edge_var[edge_key(*e)]] = v
    return LpSolution("optimal", vals, 0.0)


def test_separation_finds_integral_cycle(toy):
    model, _ = build_relaxation(augment(toy, T2))
    x = {(T1, T2): 1, (T3, S2): 1, (S2, S3): 1, (T3, S3): 1}
    cuts = separate_subtour(model, solution_from(model, x))
    assert (T3, S2, S3) in [c.nodes for c in cuts]
    lhs, rhs = subtour_cut((T3, S2, S3)).evaluate(model.graph, {edge_key(*e): v for e, v in x.items()})
    assert (lhs, rhs) == (3.0, 2.0)


def test_separation_accepts_tree(toy):
    ga = augment(toy, T2)
    model, _ = build_relaxation(ga)
    rng = random.Random(1)
    for _ in range(20):
        assert separate_subtour(model, solution_from(model, random_degree_rule_tree(ga, rng))) == []


def test_complement_row_equivalent():
    g = generate_random(InstanceSpec(12, 0.8, 4, 0.25, 2))
    ga = augment(g)
    model, _ = build_relaxation(ga)
    big = subtour_cut(range(10))
    row = big.row(model)
    assert row.sense == GE
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.random(len(ga.edges))
        x *= g.n / x.sum()
        vals = np.zeros(model.lp.num_vars)
        vals[: len(x)] = x
        lhs, rhs = big.evaluate(ga, dict(zip(ga.edges, x)))
        assert row.violation(vals) == pytest.approx(lhs - rhs, abs=1e-9)
    assert subtour_cut([0, 1]).row(model).sense == LE


def test_pool_reports_stored_violations(toy):
    model, _ = build_relaxation(augment(toy, T2))
    pool = SubtourPool(toy.n + 1)
    pool.add(subtour_cut((T3, S2, S3)))
    pool.add(subtour_cut((T1, T2)))
    x = {(T1, T2): 1, (T3, S2): 1, (S2, S3): 1, (T3, S3): 1}
    out = pool.violated(model, solution_from(model, x))
    assert [c.nodes for c in out] == [(T3, S2, S3)]


def test_cutting_plane_fixpoint_satisfies_pool():
    g = generate_random(InstanceSpec(15, 0.5, 5, 0.25, 4))
    pool = SubtourPool(g.n + 1)
    for q0 in sorted(g.terminals):
        model, _ = build_relaxation(augment(g, q0), LINK_PER_EDGE)
        sol = cutting_plane_solve(model, pool=pool)
        assert sol.optimal
        assert pool.violated(model, sol) == []
        assert separate_subtour(model, sol) == []


# -- soundness of the cycle and triangle cuts ---------------------------------


def test_cuts_hold_on_degree_rule_trees():
    rng = random.Random(7)
    checked = 0
    for seed in range(20):
        g = generate_random(InstanceSpec(9, 0.5, 4, 0.34, seed))
        ga = augment(g)
        cuts = all_candidate_cuts(ga)
        for _ in range(25):
            x = random_degree_rule_tree(ga, rng)
            assert sum(x.values()) == g.n
            for cut in cuts:
                assert check_cut_against_tree(cut, ga, x), (seed, cut)
            checked += 1
    assert checked == 500
