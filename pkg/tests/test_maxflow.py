from collections import Counter
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest

from models.canonical import CanonicalInstance, LightAgent, PrivateAssignment
from models.network import SOURCE
from models.paths import AGENT, SimplePath, agent_node, item_node
from tools.flow_network import assign_private_items, build_network
from tools.maxflow import flow_paths, merge_Q, merge_quota, rescue_flow, vertex_load
from utils.errors import PreconditionError

A = agent_node
I = item_node

TERMINAL_PATH = SimplePath((A(1), I(0), A(0)))
FEED_1 = SimplePath((I(1), A(1)))
FEED_2 = SimplePath((I(2), A(1)))


def test_flow_paths_splits_unit_flow():
    flow = {"s": {"a": 1, "b": 1}, "a": {"t": 1}, "b": {"c": 1}, "c": {"t": 1}, "t": {}}
    assert flow_paths(flow, "s", "t") == [["s", "a", "t"], ["s", "b", "c", "t"]]


def test_flow_paths_cancels_circulation():
    flow = {"s": {"a": 1}, "a": {"b": 1, "t": 1}, "b": {"a": 1}, "t": {}}
    assert flow_paths(flow, "s", "t") == [["s", "a", "t"]]


def test_vertex_load():
    load = vertex_load([TERMINAL_PATH, FEED_1, FEED_2])
    assert load == {A(1): 1, I(0): 1, I(1): 1, I(2): 1}


def test_merge_quota():
    assert merge_quota(5, Fraction(2), Fraction(1)) == 1
    assert merge_quota(5, Fraction(2), Fraction(4)) == 0


def test_rescue_flow(tiny_canonical):
    pa = assign_private_items(tiny_canonical)
    out = rescue_flow(tiny_canonical, pa.P, [FEED_1, FEED_2], [1], Fraction(1))
    assert len(out) == 1
    assert out[0].last == A(1)
    assert out[0].first in (I(1), I(2))


def test_rescue_flow_preconditions(tiny_canonical):
    pa = assign_private_items(tiny_canonical)
    with pytest.raises(PreconditionError):
        rescue_flow(tiny_canonical, pa.P, [FEED_1, FEED_2], [1], Fraction(0))
    with pytest.raises(PreconditionError, match="carries"):
        rescue_flow(tiny_canonical, pa.P, [FEED_1, FEED_2], [1], Fraction(1, 2))
    with pytest.raises(PreconditionError, match="needs"):
        rescue_flow(tiny_canonical, pa.P, [], [1], Fraction(1))


def test_merge_Q(tiny_canonical):
    pa = assign_private_items(tiny_canonical)
    merged, vacuous = merge_Q(
        tiny_canonical, pa.P, [TERMINAL_PATH], [FEED_1], [], frozenset(), Fraction(2), Fraction(0)
    )
    assert vacuous == []
    assert len(merged) == 1
    assert merged[0].last == A(1)
    assert merged[0].first[0] == "item"


def test_merge_Q_reports_zero_quota(tiny_canonical):
    pa = assign_private_items(tiny_canonical)
    merged, vacuous = merge_Q(
        tiny_canonical, pa.P, [TERMINAL_PATH], [FEED_1], [], frozenset(), Fraction(2), Fraction(4)
    )
    assert merged == []
    assert vacuous == [1]


def overlapping_family(seed: int):
    """Light agents 0..L-1 own item a, heavy agents L..L+H-1 own item a and
    want two free items; every light agent is fed by all the paths its S allows."""
    rng = np.random.default_rng(seed)
    L, H, F = 3 + seed % 4, seed % 3, 4 + seed % 7
    free = list(range(L + H, L + H + F))
    heavy = {
        b: frozenset({b, *(int(i) for i in rng.choice(free, size=2, replace=False))})
        for b in range(L, L + H)
    }
    S, family = {}, {}
    for a in range(L):
        owned = [b for b in range(L + H) if b != a]
        picked = rng.choice(owned, size=int(rng.integers(0, 3)), replace=False)
        fed = rng.choice(free, size=int(rng.integers(2, min(F, 5) + 1)), replace=False)
        S[a] = frozenset(int(i) for i in [*fed, *picked])
        paths = []
        for i in sorted(S[a]):
            if i in free:
                paths.append(SimplePath((I(i), A(a))))
            elif i < L:
                paths.append(SimplePath((A(i), I(i), A(a))))
            else:
                entry = min(heavy[i] - {i})
                paths.append(SimplePath((I(entry), A(i), I(i), A(a))))
        family[a] = paths
    light = {a: LightAgent(a, int(rng.integers(1, 2 * len(family[a]) + 1)), S[a]) for a in range(L)}
    ci = CanonicalInstance(Fraction(4), Fraction(0), L + H + F, heavy, light)
    pa = PrivateAssignment({b: b for b in range(L + H)}, frozenset())
    return ci, pa, [p for a in range(L) for p in family[a]]


def max_flow_oracle(ci, pa, senders, quotas) -> int:
    """Largest number of paths from s or a sender to the receivers, one unit
    per item and heavy agent, quotas[a] into receiver a"""
    net = build_network(ci, pa)
    g = nx.DiGraph()

    def tail(v):
        if v == SOURCE:
            return "s"
        return (v, "send") if net.is_light(v) else (v, "out")

    def head(v):
        return (v, "recv") if net.is_light(v) else (v, "in")

    for v in net.graph.nodes:
        if v != SOURCE and not net.is_light(v):
            g.add_edge((v, "in"), (v, "out"), capacity=1)
    for u, v in net.graph.edges:
        g.add_edge(tail(u), head(v), capacity=1)
    for b in senders:
        g.add_edge("s", (A(b), "send"), capacity=1)
    for a, q in quotas.items():
        if q > 0:
            g.add_edge((A(a), "recv"), "t", capacity=q)
    g.add_nodes_from(["s", "t"])
    return nx.maximum_flow_value(g, "s", "t")


def assert_disjoint_quota_paths(ci, pa, out, quotas):
    net = build_network(ci, pa)
    ends = Counter(p.last for p in out)
    assert {a: ends[A(a)] for a in quotas} == quotas
    assert max(vertex_load(out).values(), default=0) <= 1
    for p in out:
        assert all(net.graph.has_edge(u, v) for u, v in p.edges())
        assert not any(net.is_light(v) for v in p.interior)


@pytest.mark.slow
def test_rescue_and_merge_against_max_flow():
    for seed in range(100):
        ci, pa, paths = overlapping_family(seed)
        receivers = sorted(ci.light)
        beta = Fraction(max(vertex_load(paths).values()))
        senders = {p.first[1] for p in paths if p.first[0] == AGENT}

        rescued = rescue_flow(ci, pa.P, paths, receivers, beta)
        quotas = {a: int(Fraction(ci.light[a].N) / (2 * beta)) for a in receivers}
        assert_disjoint_quota_paths(ci, pa, rescued, quotas)
        assert len(rescued) == max_flow_oracle(ci, pa, senders, quotas) == sum(quotas.values())

        alpha, alpha_j = Fraction(2 + seed % 3), Fraction(2 * (seed % 2))
        p1 = [SimplePath((A(0), I(0)))] if seed % 2 == 0 else []
        origins = {p.first[1] for p in p1 + rescued if p.first[0] == AGENT}
        quotas = {a: merge_quota(ci.light[a].N, alpha, alpha_j) for a in origins}
        best = max_flow_oracle(ci, pa, origins, quotas)
        if best < sum(quotas.values()):
            with pytest.raises(PreconditionError, match="short"):
                merge_Q(ci, pa.P, p1, rescued, [], frozenset(), alpha, alpha_j)
            continue
        merged, vacuous = merge_Q(ci, pa.P, p1, rescued, [], frozenset(), alpha, alpha_j)
        assert vacuous == sorted(a for a, q in quotas.items() if q == 0)
        assert_disjoint_quota_paths(ci, pa, merged, quotas)
        assert len(merged) == best
