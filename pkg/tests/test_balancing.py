import time
from fractions import Fraction

import pytest

from models.instance import Instance
from models.weighted_graph import WeightedEdge, WeightedGraph, balance_violations, in_weight
from tools.balancing import (
    brute_force_orientation,
    classify_items,
    config_lp_problems,
    find_cycle,
    graph_to_instance,
    orient,
    solve_balance,
    solve_config_lp,
    to_graph,
)
from tools.generators import (
    gen_hardness_instance,
    gen_random_cnf,
    gen_random_graph,
    gen_random_restricted,
)
from tools.oracles import brute_force_opt, value
from utils.errors import PreconditionError

EPS = Fraction(1, 20)


def triangle() -> WeightedGraph:
    """Every vertex values its outgoing edge 3 and its incoming edge 1"""
    return WeightedGraph(
        3,
        (
            WeightedEdge(0, 0, 1, 3, 1),
            WeightedEdge(1, 1, 2, 3, 1),
            WeightedEdge(2, 2, 0, 3, 1),
        ),
    )


def shared_edge() -> WeightedGraph:
    # one contested item and a private item each
    return WeightedGraph(
        2,
        (
            WeightedEdge(0, 0, 1, 1, 1),
            WeightedEdge(1, 0, 0, 1, 1),
            WeightedEdge(2, 1, 1, 1, 1),
        ),
    )


def test_graph_round_trip():
    inst = gen_random_restricted(3, 6, 6, 0)
    back = graph_to_instance(to_graph(inst))
    assert (back.m, back.n) == (inst.m, inst.n)
    for a in range(inst.m):
        for i in range(inst.n):
            assert back.u(a, i) == inst.u(a, i)


def test_to_graph_needs_two_restricted():
    inst = Instance(3, 1, {(0, 0): 1, (1, 0): 1, (2, 0): 1})
    with pytest.raises(PreconditionError):
        to_graph(inst)


def test_find_cycle_follows_heaviest_edges():
    g = triangle()
    cycle = find_cycle(g)
    assert {eid: head for _, eid, head in cycle} == {0: 0, 1: 1, 2: 2}
    with pytest.raises(PreconditionError):
        find_cycle(shared_edge())


def test_orient_cycle():
    g = triangle()
    orientation = orient(g)
    assert orientation == {0: 0, 1: 1, 2: 2}
    assert all(in_weight(g, orientation, v) == 3 for v in range(3))


@pytest.mark.parametrize("seed", range(6))
def test_orient_is_balanced(seed):
    g = gen_random_graph(8 + seed, 20 + 5 * seed, 50, seed)
    orientation = orient(g)
    assert set(orientation) == {e.id for e in g.edges}
    assert balance_violations(g, orientation) == []


def test_find_cycle_with_ranked_edges():
    g = triangle()
    ranked = {0: [0, 2], 1: [1, 0], 2: [2, 1]}
    cycle = find_cycle(g, start=1, ranked=ranked)
    assert {eid: head for _, eid, head in cycle} == {0: 0, 1: 1, 2: 2}
    with pytest.raises(PreconditionError, match="degree 1"):
        find_cycle(g, start=0, ranked={0: [0, 2], 1: [0]})


@pytest.mark.slow
def test_orient_thousand_graphs():
    spent = 0.0
    for s in range(1000):
        g = gen_random_graph(2 + s % 49, 1 + s % 200, 100, s)
        began = time.perf_counter()
        orientation = orient(g)
        spent += time.perf_counter() - began
        assert len(orientation) == len(g.edges)
        assert balance_violations(g, orientation) == []
    assert spent < 5


def test_brute_force_orientation():
    g = WeightedGraph(2, (WeightedEdge(0, 0, 1, 3, 5), WeightedEdge(1, 0, 0, 2, 2)))
    best, orientation = brute_force_orientation(g)
    assert best == 2
    assert orientation == {0: 1, 1: 0}


def test_config_lp():
    g = shared_edge()
    # both agents need the shared item to reach 19/10
    assert solve_config_lp(g, Fraction(2), Fraction(1, 20)) is None
    sol = solve_config_lp(g, Fraction(1), Fraction(1, 20))
    assert sol is not None
    assert sol.target == Fraction(19, 20)
    assert config_lp_problems(g, sol) == []
    split = classify_items(g, sol)
    assert 1 in split.integral[0]
    assert 2 in split.integral[1]
    with pytest.raises(PreconditionError, match="strictly between"):
        solve_config_lp(g, Fraction(1), Fraction(0))


@pytest.mark.parametrize("seed", range(5))
def test_balance_against_brute_force(seed):
    inst = gen_random_restricted(3, 6, 6, seed)
    res = solve_balance(inst, EPS)
    assert value(inst, res.allocation) == res.value
    opt, _ = brute_force_opt(inst)
    assert res.value * (2 + EPS) >= opt
    assert res.grid is None


def test_balance_on_a_grid():
    inst = Instance(
        3,
        6,
        {
            (0, 0): 7, (1, 0): 3, (1, 1): 11, (2, 1): 5, (2, 2): 13,
            (0, 2): 2, (0, 3): 17, (1, 4): 19, (2, 5): 23, (0, 5): 4,
        },
    )
    res = solve_balance(inst, EPS, subset_sum_cap=4)
    assert res.grid is not None
    opt, _ = brute_force_opt(inst)
    assert res.value * (2 + EPS) >= opt


def test_balance_needs_positive_epsilon():
    with pytest.raises(PreconditionError):
        solve_balance(gen_random_restricted(2, 3, 4, 0), Fraction(0))


@pytest.mark.slow
def test_balance_suite():
    for seed in range(200):
        inst = gen_random_restricted(2 + seed % 3, 3 + seed % 8, 10, seed)
        res = solve_balance(inst, EPS)
        assert value(inst, res.allocation) == res.value
        opt, _ = brute_force_opt(inst)
        assert res.value * (2 + EPS) >= opt, f"seed {seed}"
        # at most twice below the largest feasible configuration LP guess
        assert 2 * res.value >= (1 - EPS) * res.M, f"seed {seed}"


CNF_SHAPES = [(3, 2), (3, 3), (4, 3)]


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(20))
def test_satisfiable_hardness_graph(seed):
    n_vars, n_clauses = CNF_SHAPES[seed % len(CNF_SHAPES)]
    formula = gen_random_cnf(n_vars, n_clauses, seed)
    g = gen_hardness_instance(formula, n_vars)
    best, orientation = brute_force_orientation(g)
    assert best == 1
    assert min(in_weight(g, orientation, v) for v in range(g.n_vertices)) == 1
    res = solve_balance(graph_to_instance(g), EPS)
    assert res.value * (2 + EPS) >= 1
