from fractions import Fraction

import pytest

from conftest import tiny
from models.canonical import CanonicalInstance, PrivateAssignment
from models.layered import FractionalSolution
from models.paths import SimplePath, agent_node, item_node
from tools.flow_network import assign_private_items, build_network
from tools.layered_lp import build_layered_graph, build_lp, decompose_paths, solve_lp
from tools.rounding import (
    almost_feasible,
    almost_feasible_problems,
    congestion_bound,
    default_alpha,
    randomized_round,
    route_to_terminals,
)
from tools.generators import gen_gap_instance
from utils.errors import PreconditionError, RetryExhausted

A = agent_node
I = item_node

TERMINAL_PATH = SimplePath((A(1), I(0), A(0)))


def tiny_lp():
    ci = tiny()
    pa = assign_private_items(ci)
    model = build_lp(build_layered_graph(ci, pa, 1))
    fsol = solve_lp(model)
    assert isinstance(fsol, FractionalSolution)
    return ci, pa, model, fsol


def test_alpha_defaults():
    assert default_alpha(2, 7) == 96
    assert default_alpha(1, 1) == 2
    assert congestion_bound(1, 2) == 32


def test_route_to_terminals():
    _, _, model, fsol = tiny_lp()
    routing = route_to_terminals(model, fsol, seed=0)
    assert routing.p1 == [TERMINAL_PATH]
    assert routing.selected == {1: 1}
    assert routing.decomposition.matched == {0: 0}
    assert routing.discarded == []


def test_randomized_round_keeps_every_source_path():
    _, _, model, fsol = tiny_lp()
    rounded = randomized_round(model, {1: 1}, fsol, decompose_paths(fsol), seed=3)
    assert sorted(rounded.paths, key=lambda p: p.nodes) == [
        SimplePath((I(1), A(1))),
        SimplePath((I(2), A(1))),
    ]
    assert rounded.receiver_agents() == [1]
    assert rounded.congestion == 1
    assert rounded.seed_used == 3


def test_randomized_round_gives_up():
    _, _, model, fsol = tiny_lp()
    with pytest.raises(RetryExhausted):
        randomized_round(
            model, {1: 1}, fsol, decompose_paths(fsol), seed=0, retry_cap=3, max_congestion=Fraction(1, 2)
        )


def test_almost_feasible():
    ci = tiny()
    pa = assign_private_items(ci)
    seen = []
    af = almost_feasible(ci, pa, 1, seed=0, alpha=Fraction(2), on_model=seen.append)
    assert len(seen) == 1
    assert af.p1 == [TERMINAL_PATH]
    assert len(af.p2) == 1
    assert af.p2[0].last == A(1)
    assert af.selected == frozenset({1})
    assert almost_feasible_problems(build_network(ci, pa), af.p1, af.p2, Fraction(2)) == []


def test_almost_feasible_problems_flags_missing_terminal():
    ci = tiny()
    pa = assign_private_items(ci)
    problems = almost_feasible_problems(build_network(ci, pa), [], [], Fraction(2))
    assert problems == ["terminal 0 ends 0 P1 paths"]


def test_almost_feasible_without_terminals():
    ci = CanonicalInstance(Fraction(1), Fraction(0), 1, {0: frozenset({0})})
    af = almost_feasible(ci, PrivateAssignment({0: 0}, frozenset()), 1, seed=0, alpha=Fraction(2))
    assert af.p1 == [] and af.p2 == []


def test_almost_feasible_rejects_small_alpha():
    ci = tiny()
    pa = assign_private_items(ci)
    with pytest.raises(PreconditionError, match="at least 2"):
        almost_feasible(ci, pa, 1, seed=0, alpha=Fraction(1))
    with pytest.raises(PreconditionError, match="at least 2"):
        almost_feasible(ci, pa, 1, seed=0, alpha=Fraction(3, 2))


@pytest.mark.parametrize("M", [2, 3])
def test_almost_feasible_on_gap_instance(M):
    ci, pa = gen_gap_instance(M)
    af = almost_feasible(ci, pa, 2, seed=0, alpha=Fraction(2))
    assert af.congestion == 1
    assert len(af.p1) == M * (M - 1) + 1
    assert len(af.p2) == len(set(af.p2))
    assert almost_feasible_problems(build_network(ci, pa), af.p1, af.p2, Fraction(2)) == []
