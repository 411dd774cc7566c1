from fractions import Fraction

import pytest

from models.paths import DUMMY, IterationState, SimplePath, agent_node, item_node
from tools.rerouting import (
    check_spiders,
    cleanup_bad_agents,
    reroute,
    spider_prefixes,
    state_problems,
)
from utils.errors import InvariantViolation, PreconditionError

A = agent_node
I = item_node

TERMINAL_PATH = SimplePath((A(1), I(0), A(0)))
FEED_1 = SimplePath((I(1), A(1)))


def start_state() -> IterationState:
    return IterationState(1, frozenset(), frozenset({0}), {1: 0}, [], Fraction(0))


def test_spider_prefixes_pick_the_earliest_meeting():
    q = [SimplePath((I(1), I(2), I(3)))]
    p = [SimplePath((A(10), I(3), A(11))), SimplePath((A(12), I(2), A(13)))]
    sp = spider_prefixes(p, q)
    assert sp.prefix == [3, 2, 2]
    assert sp.partner_of_p() == {1: 0}
    assert check_spiders(p, q, sp) == []


def test_untouched_paths_stay_whole():
    p = [SimplePath((A(10), I(4)))]
    q = [SimplePath((I(5), A(11)))]
    sp = spider_prefixes(p, q)
    assert sp.prefix == [2, 2]
    assert sp.components == [(0, None), (None, 0)]


def test_spider_prefixes_need_disjoint_families():
    p = [SimplePath((A(10), I(4))), SimplePath((A(11), I(4)))]
    with pytest.raises(PreconditionError):
        spider_prefixes(p, [])


def test_reroute_without_clash(tiny_canonical):
    rr = reroute(tiny_canonical, [TERMINAL_PATH], [FEED_1])
    assert rr.p1 == [TERMINAL_PATH]
    assert rr.q2 == [FEED_1]
    assert rr.responsibility == {}


def test_reroute_takes_over_a_merged_path(tiny_canonical):
    merged = SimplePath((A(1), I(0), A(5)))
    rr = reroute(tiny_canonical, [TERMINAL_PATH], [merged])
    assert rr.p1 == [TERMINAL_PATH]
    assert rr.q2 == []
    assert rr.responsibility == {0: 0}


def test_reroute_meeting_at_a_light_agent(tiny_canonical):
    merged = SimplePath((I(1), A(1), A(7)))
    rr = reroute(tiny_canonical, [TERMINAL_PATH], [merged])
    assert rr.p1 == [TERMINAL_PATH]
    assert rr.q2 == []


def test_reroute_refuses_to_start_at_an_item(tiny_canonical):
    with pytest.raises(InvariantViolation):
        reroute(tiny_canonical, [TERMINAL_PATH], [SimplePath((I(0), A(1)))])


def test_dummy_marks_merged_ends(tiny_canonical):
    merged = SimplePath((I(2), A(1)))
    rr = reroute(tiny_canonical, [TERMINAL_PATH], [merged])
    assert all(DUMMY not in {v[0] for v in p.nodes} for p in rr.p1 + rr.q2)


def test_cleanup_satisfies_the_terminal_path_origin(tiny_canonical):
    nxt, report = cleanup_bad_agents(
        tiny_canonical, start_state(), [TERMINAL_PATH], [FEED_1], Fraction(2)
    )
    assert report.bad == []
    assert nxt.j == 2
    assert nxt.satisfied == frozenset({1})
    assert nxt.terminals == frozenset()
    assert nxt.P == {0: 0}
    assert nxt.Q == [FEED_1]
    assert nxt.alpha_j == 4


def test_cleanup_removes_a_starved_agent(tiny_canonical):
    nxt, report = cleanup_bad_agents(
        tiny_canonical, start_state(), [TERMINAL_PATH], [FEED_1], Fraction(1, 2)
    )
    assert report.bad == [1]
    assert report.terminals == {1: [0]}
    assert nxt.satisfied == frozenset()
    assert nxt.terminals == frozenset({0})
    assert nxt.P == {1: 0}
    assert nxt.Q == []


def test_state_problems(tiny_canonical):
    good = IterationState(2, frozenset({1}), frozenset(), {0: 0}, [], Fraction(4))
    assert state_problems(tiny_canonical, good) == []

    short = IterationState(2, frozenset({1}), frozenset(), {0: 0}, [], Fraction(1))
    assert state_problems(tiny_canonical, short) == ["satisfied agent 1 gets 0 paths, needs 2"]

    missing = IterationState(1, frozenset(), frozenset({0}), {}, [], Fraction(0))
    assert state_problems(tiny_canonical, missing) == ["private items are off for agents [1]"]
