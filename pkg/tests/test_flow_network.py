from fractions import Fraction

import pytest

from models.canonical import CanonicalInstance, LightAgent, PrivateAssignment
from models.instance import Allocation
from models.paths import SimplePath, agent_node, item_node
from tools.flow_network import (
    allocation_from_paths,
    assign_private_items,
    build_network,
    check_alpha_feasible,
    extract_allocation,
    forest_from_allocation,
    good_assignment_problems,
    layerize,
    matching_certificate,
    restore_terminal_minimality,
    tree_heights,
)
from utils.errors import InvariantViolation, PreconditionError

A = agent_node
I = item_node

TERMINAL_PATH = SimplePath((A(1), I(0), A(0)))
FEED_1 = SimplePath((I(1), A(1)))
FEED_2 = SimplePath((I(2), A(1)))


def test_private_items_and_terminals(tiny_canonical):
    pa = assign_private_items(tiny_canonical)
    assert pa.P == {1: 0}
    assert pa.T == frozenset({0})
    assert good_assignment_problems(tiny_canonical, pa) == []
    assert matching_certificate(tiny_canonical, pa) == set()


def test_matching_is_maximum():
    ci = CanonicalInstance(
        Fraction(1),
        Fraction(0),
        3,
        {0: frozenset({0, 1}), 1: frozenset({0}), 2: frozenset({0, 2})},
    )
    pa = assign_private_items(ci)
    assert len(pa.T) == 0
    assert len(matching_certificate(ci, pa)) == 3


def test_bad_private_assignment(tiny_canonical):
    pa = PrivateAssignment({1: 2}, frozenset({0}))
    problems = good_assignment_problems(tiny_canonical, pa)
    assert any("instead of h(A)" in p for p in problems)
    with pytest.raises(PreconditionError):
        build_network(tiny_canonical, pa)


def test_network_edges(tiny_canonical):
    net = build_network(tiny_canonical, assign_private_items(tiny_canonical))
    assert net.S == frozenset({1, 2})
    assert net.graph.has_edge(A(1), I(0))
    assert net.graph.has_edge(I(0), A(0))
    assert net.graph.has_edge(I(1), A(1))
    assert not net.graph.has_edge(I(0), A(1))


def test_alpha_feasibility(tiny_canonical):
    net = build_network(tiny_canonical, assign_private_items(tiny_canonical))
    ok, problems = check_alpha_feasible(net, [TERMINAL_PATH, FEED_1, FEED_2], Fraction(1))
    assert ok, problems

    ok, problems = check_alpha_feasible(net, [TERMINAL_PATH, FEED_1], Fraction(1))
    assert not ok
    assert "light agent 1 gets 1 paths" in problems[0]
    ok, _ = check_alpha_feasible(net, [TERMINAL_PATH, FEED_1], Fraction(2))
    assert ok


def test_alpha_feasibility_reports_sharing(tiny_canonical):
    net = build_network(tiny_canonical, assign_private_items(tiny_canonical))
    ok, problems = check_alpha_feasible(net, [TERMINAL_PATH, FEED_1, FEED_1], Fraction(1))
    assert not ok
    assert any("shared" in p for p in problems)

    ok, problems = check_alpha_feasible(net, [FEED_1, FEED_2], Fraction(1))
    assert not ok
    assert any("terminal 0 ends 0 paths" in p for p in problems)


def test_extract_allocation(tiny_canonical):
    net = build_network(tiny_canonical, assign_private_items(tiny_canonical))
    alloc = extract_allocation(net, [TERMINAL_PATH, FEED_1, FEED_2], Fraction(1))
    assert alloc.owner == {0: 0, 1: 1, 2: 1}
    with pytest.raises(PreconditionError):
        extract_allocation(net, [FEED_1], Fraction(1))


def test_allocation_from_paths_keeps_private_items():
    alloc = allocation_from_paths({3: 5, 4: 6}, [SimplePath((I(1), A(3)))])
    assert alloc.owner == {1: 3, 5: 3, 6: 4}


def test_forest_from_allocation(tiny_canonical):
    pa = assign_private_items(tiny_canonical)
    forest, paths = forest_from_allocation(tiny_canonical, pa, Allocation({0: 0, 1: 1, 2: 1}))
    assert forest.roots == {0}
    assert forest.parent[A(1)] == I(0)
    assert paths == [TERMINAL_PATH, FEED_1, FEED_2]

    layered, level = layerize(tiny_canonical, forest, 1)
    assert level == {1: 1}
    assert tree_heights(tiny_canonical, layered, level) == {0: 1}


def test_forest_needs_everyone_satisfied(tiny_canonical):
    pa = assign_private_items(tiny_canonical)
    with pytest.raises(PreconditionError):
        forest_from_allocation(tiny_canonical, pa, Allocation({1: 1, 2: 1}))


def test_layerize_levels_a_chain():
    # light 2 feeds light 1 through h(2) = item 3, and light 1 feeds terminal 0
    ci = CanonicalInstance(
        Fraction(1),
        Fraction(0),
        5,
        {0: frozenset({0})},
        {
            1: LightAgent(0, 1, frozenset({3})),
            2: LightAgent(3, 1, frozenset({4})),
        },
    )
    pa = assign_private_items(ci)
    forest, paths = forest_from_allocation(ci, pa, Allocation({0: 0, 3: 1, 4: 2}))
    assert SimplePath((A(2), I(3), A(1))) in paths

    layered, level = layerize(ci, forest, 2)
    assert level == {1: 2, 2: 1}
    assert tree_heights(ci, layered, level) == {0: 2}
    with pytest.raises(InvariantViolation):
        layerize(ci, forest, 1)


def test_restore_terminal_minimality():
    # terminal 0 is reachable from S through item 1
    ci = CanonicalInstance(
        Fraction(1),
        Fraction(0),
        3,
        {0: frozenset({1, 2}), 1: frozenset({2})},
    )
    pa = PrivateAssignment({1: 2}, frozenset({0}))
    fixed = restore_terminal_minimality(ci, pa)
    assert fixed.T == frozenset()
    assert fixed.P == {0: 1, 1: 2}
