#!/usr/bin/env python3

from collections import deque
from fractions import Fraction
from typing import Dict, List, Optional, Set, Tuple

import networkx as nx

from models.canonical import CanonicalInstance
from models.paths import (
    AGENT,
    DUMMY,
    ITEM,
    CleanupReport,
    IterationState,
    Node,
    RerouteResult,
    SimplePath,
    SpiderPrefixes,
    agent_node,
    item_node,
)
from tools.maxflow import merge_quota
from utils.errors import InvariantViolation, PreconditionError
from utils.logger import LogLevel, Logger
from utils.rational import ceil_div


def _disjoint(paths: List[SimplePath], family: str) -> Dict[Node, Tuple[int, int]]:
    where: Dict[Node, Tuple[int, int]] = {}
    for k, p in enumerate(paths):
        for pos, v in enumerate(p.nodes):
            if v in where:
                raise PreconditionError(
                    f"{family} paths {where[v][0]} and {k} share vertex {v}"
                )
            where[v] = (k, pos)
    return where


def spider_prefixes(p_paths: List[SimplePath], q_paths: List[SimplePath]) -> SpiderPrefixes:
    """Cuts two families of vertex-disjoint paths to prefixes that meet in
    pairs at their last vertex only.

    Every p walks forward and, at each vertex of some q, asks that q to
    stop there; q agrees when the vertex comes earlier on q than the place
    it currently stops at, and the p it drops walks on. Paths nobody stops
    stay whole.
    """
    _disjoint(p_paths, "P")
    on_q = _disjoint(q_paths, "Q")
    n_p = len(p_paths)
    next_pos = [0] * n_p
    meet_p: Dict[int, int] = {}
    # q -> (position on q, p)
    stop_q: Dict[int, Tuple[int, int]] = {}
    free = deque(range(n_p))
    while free:
        p = free.popleft()
        nodes = p_paths[p].nodes
        k = next_pos[p]
        while k < len(nodes):
            hit = on_q.get(nodes[k])
            if hit is not None:
                q, qpos = hit
                current = stop_q.get(q)
                if current is None or qpos < current[0]:
                    if current is not None:
                        del meet_p[current[1]]
                        free.append(current[1])
                    stop_q[q] = (qpos, p)
                    meet_p[p] = k
                    next_pos[p] = k + 1
                    break
            k += 1
        else:
            next_pos[p] = len(nodes)

    prefix = [meet_p[p] + 1 if p in meet_p else len(p_paths[p]) for p in range(n_p)]
    prefix += [stop_q[q][0] + 1 if q in stop_q else len(q_paths[q]) for q in range(len(q_paths))]
    components: List[Tuple[Optional[int], Optional[int]]] = []
    for p in range(n_p):
        if p not in meet_p:
            components.append((p, None))
    for q in range(len(q_paths)):
        components.append((stop_q[q][1], q) if q in stop_q else (None, q))
    out = SpiderPrefixes(prefix, n_p, components)
    spider_problems = check_spiders(p_paths, q_paths, out)
    if spider_problems:
        raise InvariantViolation(f"prefix components have a bad shape: {spider_problems[0]}")
    return out


def check_spiders(
    p_paths: List[SimplePath], q_paths: List[SimplePath], sp: SpiderPrefixes
) -> List[str]:
    """Scans the union of prefixes; each component must be one whole path,
    or one p-prefix and one q-prefix sharing only their last vertex."""
    paths = list(p_paths) + list(q_paths)
    g = nx.Graph()
    owners: Dict[Node, List[int]] = {}
    for k in range(len(paths)):
        nodes = sp.gamma(paths, k)
        g.add_nodes_from(nodes)
        g.add_edges_from(zip(nodes, nodes[1:]))
        for v in nodes:
            owners.setdefault(v, []).append(k)
    problems = []
    for comp in nx.connected_components(g):
        members = sorted({k for v in comp for k in owners[v]})
        if len(members) == 1:
            k = members[0]
            if sp.prefix[k] != len(paths[k]):
                problems.append(f"lone prefix of path {k} is not the whole path")
            continue
        if len(members) != 2 or not (members[0] < sp.n_p <= members[1]):
            problems.append(f"component joins paths {members}")
            continue
        a, b = (sp.gamma(paths, k) for k in members)
        shared = set(a) & set(b)
        if len(shared) != 1 or a[-1] != b[-1]:
            problems.append(f"paths {members} meet at {sorted(shared)}")
    return problems


def reroute(
    ci: CanonicalInstance, p1: List[SimplePath], q_star: List[SimplePath]
) -> RerouteResult:
    """Lets every terminal path clash with at most one merged path.

    Terminal paths are reversed and the last vertex of every merged path is
    replaced by a dummy, then both are cut to spider prefixes. A terminal
    path that meets a merged path q at a light agent stays as it is;
    otherwise it becomes q's prefix followed by its own prefix reversed. In
    both cases q is dropped and the terminal answers for it.
    """
    reversed_p = [p.reversed() for p in p1]
    dummied = [SimplePath(q.nodes[:-1] + ((DUMMY, k),)) for k, q in enumerate(q_star)]
    sp = spider_prefixes(reversed_p, dummied)
    both = reversed_p + dummied
    partner = sp.partner_of_p()

    out: List[SimplePath] = []
    responsibility: Dict[int, int] = {}
    for k, p in enumerate(p1):
        q = partner.get(k)
        if q is None:
            out.append(p)
            continue
        responsibility[q] = p.last[1]
        gp = sp.gamma(both, k)
        gq = sp.gamma(both, sp.n_p + q)
        v = gp[-1]
        if v[0] == AGENT and ci.is_light(v[1]):
            out.append(p)
            continue
        if gq[0][0] == ITEM:
            raise InvariantViolation(
                f"rerouting terminal {p.last[1]} would start at item {gq[0][1]} of S"
            )
        out.append(SimplePath(tuple(gq) + tuple(reversed(gp))[1:]))
    q2 = [q for k, q in enumerate(q_star) if k not in responsibility]
    return RerouteResult(out, q2, responsibility)


def cleanup_bad_agents(
    ci: CanonicalInstance,
    state: IterationState,
    p1: List[SimplePath],
    q2: List[SimplePath],
    alpha: Fraction,
    logging: Optional[Logger] = None,
) -> Tuple[IterationState, CleanupReport]:
    """Removes bad light agents and builds the input of the next iteration.

    A light agent is bad when it is satisfied already or starts a path, yet
    fewer than N/alpha_next merged paths end at it, with alpha_next =
    alpha_j + 2 alpha; the count never has to exceed the merge quota
    floor(N/(alpha_j+alpha)). Lowest id first: its incoming paths go; an unsatisfied
    one also loses its outgoing path, a satisfied one takes h(A) back and
    drops the path through h(A). Removed terminal paths put their terminal
    back into T, as does a heavy agent losing h(A).

    Returns:
        Tuple[IterationState, CleanupReport]: next input and who was bad
    """
    logging = logging or Logger.quiet()
    alpha_next = Fraction(state.alpha_j) + 2 * Fraction(alpha)
    satisfied: Set[int] = set(state.satisfied)
    P = dict(state.P)
    terminals_next: Set[int] = set()
    live_p1 = [True] * len(p1)
    live_q = [True] * len(q2)
    report = CleanupReport()

    def need(a: int) -> int:
        N = ci.light[a].N
        return min(ceil_div(N, alpha_next), merge_quota(N, alpha, state.alpha_j))

    def incoming(a: int) -> int:
        node = agent_node(a)
        return sum(1 for k, q in enumerate(q2) if live_q[k] and q.last == node)

    def outgoing(a: int) -> Optional[Tuple[str, int]]:
        node = agent_node(a)
        for k, p in enumerate(p1):
            if live_p1[k] and p.first == node:
                return ("p1", k)
        for k, q in enumerate(q2):
            if live_q[k] and q.first == node:
                return ("q2", k)
        return None

    def drop(kind: str, k: int, culprit: int) -> None:
        report.paths[culprit] = report.paths.get(culprit, 0) + 1
        if kind == "p1":
            live_p1[k] = False
            t = p1[k].last[1]
            terminals_next.add(t)
            report.terminals.setdefault(culprit, []).append(t)
        else:
            live_q[k] = False

    while True:
        candidates = sorted(
            a for a in ci.light if a in satisfied or outgoing(a) is not None
        )
        bad = [a for a in candidates if incoming(a) < need(a)]
        if not bad:
            break
        a = bad[0]
        report.bad.append(a)
        node = agent_node(a)
        for k, q in enumerate(q2):
            if live_q[k] and q.last == node:
                live_q[k] = False
        if a not in satisfied:
            drop(*outgoing(a), a)
            continue
        i = ci.light[a].h
        holder = next((b for b, it in P.items() if it == i), None)
        if holder is not None:
            del P[holder]
            terminals_next.add(holder)
            report.terminals.setdefault(a, []).append(holder)
        P[a] = i
        satisfied.discard(a)
        target = item_node(i)
        for k, p in enumerate(p1):
            if live_p1[k] and target in p.nodes:
                drop("p1", k, a)
        for k, q in enumerate(q2):
            if live_q[k] and target in q.nodes:
                drop("q2", k, a)

    for k, p in enumerate(p1):
        if not live_p1[k]:
            continue
        origin = p.first[1]
        satisfied.add(origin)
        P.pop(origin, None)
        for u, v in p.edges():
            if u[0] == ITEM and v[0] == AGENT:
                P[v[1]] = u[1]

    nxt = IterationState(
        state.j + 1,
        frozenset(satisfied),
        frozenset(terminals_next),
        P,
        [q for k, q in enumerate(q2) if live_q[k]],
        alpha_next,
    )
    problems = state_problems(ci, nxt)
    if problems:
        raise InvariantViolation(f"next iteration input is invalid: {problems[0]}")
    logging.log(
        LogLevel.Info,
        f"cleanup: {len(report.bad)} bad light agents, {len(terminals_next)} terminals left",
    )
    return nxt, report


def state_problems(ci: CanonicalInstance, state: IterationState) -> List[str]:
    """Private items exactly off the satisfied agents and terminals, and the
    merged paths alpha_j-satisfying every satisfied agent"""
    problems = []
    expected = set(ci.agents) - set(state.satisfied) - set(state.terminals)
    if set(state.P) != expected:
        extra = sorted(set(state.P) ^ expected)
        problems.append(f"private items are off for agents {extra}")
    owners: Dict[int, int] = {}
    for a, i in sorted(state.P.items()):
        if i in owners:
            problems.append(f"item {i} is private for {owners[i]} and {a}")
        owners[i] = a
    for a in sorted(state.terminals):
        if a not in ci.heavy:
            problems.append(f"terminal {a} is not a heavy agent")
    for a in sorted(state.satisfied):
        if state.alpha_j <= 0:
            break
        got = sum(1 for q in state.Q if q.last == agent_node(a))
        need = int(Fraction(ci.light[a].N) / state.alpha_j)
        if got < need:
            problems.append(f"satisfied agent {a} gets {got} paths, needs {need}")
        if any(q.first == agent_node(a) for q in state.Q):
            problems.append(f"satisfied agent {a} starts a path")
    return problems
