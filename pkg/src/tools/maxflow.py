#!/usr/bin/env python3

from collections import Counter
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

import networkx as nx
from networkx.algorithms.flow import edmonds_karp

from models.canonical import CanonicalInstance
from models.paths import AGENT, Node, SimplePath, agent_node, item_node
from utils.errors import PreconditionError
from utils.logger import LogLevel, Logger

FSOURCE = ("s",)
FSINK = ("t",)


def _quota_network(
    ci: CanonicalInstance,
    P: Dict[int, int],
    senders: Iterable[int],
    quotas: Dict[int, int],
    committed: FrozenSet[int] = frozenset(),
) -> nx.DiGraph:
    """Unit-capacity network: s feeds the free items and every sender, items
    are split into in/out copies, receiver A drains quotas[A] units into t.
    Sending costs 1 unless the sender is committed."""
    g = nx.DiGraph()
    used = set(P.values())
    for i in range(ci.n_items):
        g.add_edge(("in", i), ("out", i), capacity=1)
        if i not in used:
            g.add_edge(FSOURCE, ("in", i), capacity=1)
    for a in sorted(senders):
        if a not in P:
            raise PreconditionError(f"sender {a} has no private item")
        g.add_edge(FSOURCE, ("send", a), capacity=1, weight=0 if a in committed else 1)
        g.add_edge(("send", a), ("in", P[a]), capacity=1)
    for b, gamma in sorted(ci.heavy.items()):
        if b not in P:
            continue
        g.add_edge(("agent", b), ("in", P[b]), capacity=1)
        for i in sorted(gamma):
            if i != P[b]:
                g.add_edge(("out", i), ("agent", b), capacity=1)
    for a, quota in sorted(quotas.items()):
        if quota <= 0:
            continue
        for i in sorted(ci.light[a].S):
            g.add_edge(("out", i), ("recv", a), capacity=1)
        g.add_edge(("recv", a), FSINK, capacity=quota)
    g.add_node(FSOURCE)
    g.add_node(FSINK)
    return g


def flow_paths(flow: Dict, source=FSOURCE, sink=FSINK) -> List[List]:
    """Splits an integral flow into unit source-sink walks, cancelling any
    circulation met on the way"""
    left = {u: {v: int(round(f)) for v, f in nbrs.items() if f > 0} for u, nbrs in flow.items()}

    def dec(u, v) -> None:
        left[u][v] -= 1
        if left[u][v] == 0:
            del left[u][v]

    paths = []
    while left.get(source):
        walk = [source]
        pos = {source: 0}
        while walk[-1] != sink:
            u = walk[-1]
            v = min(left[u])
            if v in pos:
                loop = walk[pos[v]:] + [v]
                for a, b in zip(loop, loop[1:]):
                    dec(a, b)
                for w in walk[pos[v] + 1:]:
                    del pos[w]
                walk = walk[: pos[v] + 1]
                continue
            pos[v] = len(walk)
            walk.append(v)
        for a, b in zip(walk, walk[1:]):
            dec(a, b)
        paths.append(walk)
    return paths


def _to_path(walk: List) -> SimplePath:
    nodes: List[Node] = []
    for v in walk:
        kind = v[0]
        if kind in ("send", "recv", "agent"):
            nodes.append(agent_node(v[1]))
        elif kind == "in":
            nodes.append(item_node(v[1]))
    return SimplePath(tuple(nodes))


def _quota_paths(
    ci: CanonicalInstance,
    P: Dict[int, int],
    senders: Set[int],
    quotas: Dict[int, int],
    logging: Logger,
    committed: FrozenSet[int] = frozenset(),
) -> List[SimplePath]:
    """Integral paths meeting every quota exactly.

    With committed senders the flow is a cheapest maximum flow, so other
    senders only send when the committed ones cannot. A walk from a sender
    back to itself is no simple path; that sender is dropped and the flow
    recomputed.
    """
    want = sum(q for q in quotas.values() if q > 0)
    senders = set(senders)
    while True:
        g = _quota_network(ci, P, senders, quotas, committed)
        if committed:
            flow = nx.max_flow_min_cost(g, FSOURCE, FSINK)
            value = sum(flow[FSOURCE].values())
        else:
            value, flow = nx.maximum_flow(g, FSOURCE, FSINK, flow_func=edmonds_karp)
        if value < want:
            raise PreconditionError(f"max flow {value} is short of the {want} paths the quotas need")
        walks = flow_paths(flow)
        looped = sorted(
            w[1][1] for w in walks if w[1][0] == "send" and w[-2] == ("recv", w[1][1])
        )
        if not looped:
            return [_to_path(w) for w in walks]
        logging.log(LogLevel.Debug, f"senders {looped} route back to themselves, dropping them")
        senders -= set(looped)


def vertex_load(paths: Iterable[SimplePath]) -> Counter:
    """How often each vertex is a first or intermediate vertex"""
    load: Counter = Counter()
    for p in paths:
        load.update(p.head())
    return load


def rescue_flow(
    ci: CanonicalInstance,
    P: Dict[int, int],
    paths: List[SimplePath],
    receivers: Iterable[int],
    beta: Fraction,
    logging: Optional[Logger] = None,
) -> List[SimplePath]:
    """Turns congested paths into internally disjoint ones.

    Every receiver with at least N/2 incoming paths, each vertex used at most
    beta times as a first or intermediate vertex, ends with exactly
    floor(N/(2 beta)) disjoint paths. Light agents starting some input path
    are the senders.

    Args:
        ci (CanonicalInstance): the instance
        P (Dict[int, int]): private items
        paths (List[SimplePath]): the congested paths
        receivers (Iterable[int]): light agents to feed
        beta (Fraction): congestion of the input

    Returns:
        List[SimplePath]: paths whose first and intermediate vertices are all distinct
    """
    logging = logging or Logger.quiet()
    beta = Fraction(beta)
    if beta <= 0:
        raise PreconditionError("congestion bound must be positive")
    receivers = sorted(set(receivers))
    incoming = Counter(p.last for p in paths)
    for a in receivers:
        if 2 * incoming[agent_node(a)] < ci.light[a].N:
            raise PreconditionError(
                f"receiver {a} has {incoming[agent_node(a)]} paths, needs {ci.light[a].N}/2"
            )
    load = vertex_load(paths)
    worst = max(load.values(), default=0)
    if worst > beta:
        node = min(v for v, c in load.items() if c == worst)
        raise PreconditionError(f"vertex {node} carries {worst} paths, more than {beta}")
    senders = {p.first[1] for p in paths if p.first[0] == AGENT and ci.is_light(p.first[1])}
    quotas = {a: int(Fraction(ci.light[a].N) / (2 * beta)) for a in receivers}
    out = _quota_paths(ci, P, senders, quotas, logging)
    logging.log(LogLevel.Debug, f"rescue flow: {len(out)} paths for {len(receivers)} receivers")
    return out


def merge_quota(N: int, alpha: Fraction, alpha_j: Fraction) -> int:
    return int(Fraction(N) / (Fraction(alpha) + Fraction(alpha_j)))


def merge_Q(
    ci: CanonicalInstance,
    P: Dict[int, int],
    p1: List[SimplePath],
    p2: List[SimplePath],
    q_paths: List[SimplePath],
    satisfied: FrozenSet[int],
    alpha: Fraction,
    alpha_j: Fraction,
    logging: Optional[Logger] = None,
) -> Tuple[List[SimplePath], List[int]]:
    """Merges the fresh light paths with those of earlier iterations.

    Receivers are the origins of p1 and p2, the satisfied agents and the
    origins of q_paths; all of them but the satisfied ones may send. Each
    receiver gets floor(N/(alpha_j+alpha)) internally disjoint paths. Origins
    of p1 send first: their private item already leaves on a terminal path,
    and the rerouting settles the clash.

    Returns:
        Tuple[List[SimplePath], List[int]]: merged paths and the receivers whose quota is 0
    """
    logging = logging or Logger.quiet()
    origins = {
        p.first[1] for p in list(p1) + list(p2) + list(q_paths)
        if p.first[0] == AGENT and ci.is_light(p.first[1])
    }
    receivers = sorted(origins | set(satisfied))
    senders = set(receivers) - set(satisfied)
    quotas = {a: merge_quota(ci.light[a].N, alpha, alpha_j) for a in receivers}
    vacuous = sorted(a for a, q in quotas.items() if q == 0)
    if vacuous:
        logging.log(LogLevel.Warn, f"merge quota is 0 for light agents {vacuous}")
    committed = frozenset(p.first[1] for p in p1 if p.first[0] == AGENT)
    out = _quota_paths(ci, P, senders, quotas, logging, committed)
    logging.log(LogLevel.Debug, f"merged {len(out)} paths for {len(receivers)} receivers")
    return out, vacuous
