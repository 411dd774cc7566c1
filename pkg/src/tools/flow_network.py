#!/usr/bin/env python3

from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

import networkx as nx

from models.canonical import CanonicalInstance, PrivateAssignment
from models.instance import Allocation
from models.network import SOURCE, FlowNetwork
from models.paths import (
    AGENT,
    ITEM,
    Node,
    SimplePath,
    SolutionForest,
    agent_node,
    item_node,
)
from utils.errors import InvariantViolation, PreconditionError
from utils.logger import LogLevel, Logger


def assign_private_items(ci: CanonicalInstance) -> PrivateAssignment:
    """Light agents keep h(A); heavy agents get a maximum matching into the
    remaining items. Terminals are the unmatched heavy agents.
    """
    g = nx.Graph()
    heavy_nodes = [agent_node(a) for a in sorted(ci.heavy)]
    g.add_nodes_from(heavy_nodes, bipartite=0)
    reserved = ci.heavy_items
    for a in sorted(ci.heavy):
        for i in sorted(ci.heavy[a]):
            if i not in reserved:
                g.add_edge(agent_node(a), item_node(i))
    matching = nx.bipartite.hopcroft_karp_matching(g, top_nodes=heavy_nodes)

    P: Dict[int, int] = {a: la.h for a, la in ci.light.items()}
    for a in sorted(ci.heavy):
        node = agent_node(a)
        if node in matching:
            P[a] = matching[node][1]
    T = frozenset(a for a in ci.heavy if a not in P)
    return PrivateAssignment(P, T)


def matching_certificate(ci: CanonicalInstance, pa: PrivateAssignment) -> Set[Node]:
    """A vertex cover of the heavy-agent matching graph of the same size as
    the matching, so the matching (and hence |T|) is optimal by König.
    """
    g = nx.Graph()
    heavy_nodes = [agent_node(a) for a in sorted(ci.heavy)]
    g.add_nodes_from(heavy_nodes, bipartite=0)
    reserved = ci.heavy_items
    for a in sorted(ci.heavy):
        for i in sorted(ci.heavy[a]):
            if i not in reserved:
                g.add_edge(agent_node(a), item_node(i))
    matching: Dict[Node, Node] = {}
    for a in ci.heavy:
        if a in pa.P:
            matching[agent_node(a)] = item_node(pa.P[a])
            matching[item_node(pa.P[a])] = agent_node(a)
    return set(nx.bipartite.to_vertex_cover(g, matching, top_nodes=heavy_nodes))


def good_assignment_problems(ci: CanonicalInstance, pa: PrivateAssignment) -> List[str]:
    problems = []
    seen: Dict[int, int] = {}
    for a, i in sorted(pa.P.items()):
        if a not in ci.heavy and a not in ci.light:
            problems.append(f"private item for unknown agent {a}")
            continue
        if i in seen:
            problems.append(f"item {i} is private for agents {seen[i]} and {a}")
        seen[i] = a
        if a in ci.light and i != ci.light[a].h:
            problems.append(f"light agent {a} has private item {i} instead of h(A)")
        if a in ci.heavy and i not in ci.heavy[a]:
            problems.append(f"heavy agent {a} has inadmissible private item {i}")
    for a in sorted(ci.light):
        if a not in pa.P:
            problems.append(f"light agent {a} has no private item")
    expected_T = frozenset(a for a in ci.heavy if a not in pa.P)
    if expected_T != pa.T:
        problems.append(f"terminal set {sorted(pa.T)} differs from {sorted(expected_T)}")
    return problems


def build_network(ci: CanonicalInstance, pa: PrivateAssignment) -> FlowNetwork:
    problems = good_assignment_problems(ci, pa)
    if problems:
        raise PreconditionError(f"private assignment is not good: {problems[0]}")
    S = pa.free_items(ci.n_items)
    g = nx.DiGraph()
    g.add_node(SOURCE)
    for a in ci.agents:
        g.add_node(agent_node(a))
    for i in range(ci.n_items):
        g.add_node(item_node(i))
    for i in sorted(S):
        g.add_edge(SOURCE, item_node(i))
    for a, i in sorted(pa.P.items()):
        g.add_edge(agent_node(a), item_node(i))
    for a, gamma in sorted(ci.heavy.items()):
        for i in sorted(gamma):
            if i != pa.P.get(a):
                g.add_edge(item_node(i), agent_node(a))
    for a, la in sorted(ci.light.items()):
        for i in sorted(la.S):
            g.add_edge(item_node(i), agent_node(a))
    return FlowNetwork(ci, pa, g, S)


def _occupied(net: FlowNetwork, path: SimplePath) -> Tuple[Node, ...]:
    """Vertices a path uses exclusively: everything but agent endpoints"""
    start = 0 if path.from_source() else 1
    return path.nodes[start:-1]


def check_alpha_feasible(
    net: FlowNetwork, paths: Iterable[SimplePath], alpha: Fraction
) -> Tuple[bool, List[str]]:
    """Checks that the paths are simple, internally disjoint, that every
    terminal ends exactly one of them and that a light agent starting a
    path ends at least N_A/alpha of them.

    Returns:
        Tuple[bool, List[str]]: verdict and one line per violation
    """
    alpha = Fraction(alpha)
    paths = list(paths)
    problems: List[str] = []
    users: Dict[Node, int] = {}
    ending: Dict[Node, int] = {}
    starting: Dict[Node, int] = {}
    for k, p in enumerate(paths):
        if p.from_source():
            if p.first[1] not in net.S:
                problems.append(f"path {k} starts at item {p.first[1]} which is not in S")
        elif not net.is_light(p.first):
            problems.append(f"path {k} starts at {p.first}, neither S nor a light agent")
        else:
            starting[p.first] = starting.get(p.first, 0) + 1
        if not (net.is_light(p.last) or net.is_terminal(p.last)):
            problems.append(f"path {k} ends at {p.last}, neither a light agent nor a terminal")
        if p.from_source() and net.is_terminal(p.last):
            problems.append(f"path {k} joins s to terminal {p.last[1]} directly")
        for u, v in p.edges():
            if not net.graph.has_edge(u, v):
                problems.append(f"path {k} uses missing edge {u} -> {v}")
        for v in p.interior:
            if net.is_light(v):
                problems.append(f"path {k} passes through light agent {v[1]}")
        if len(set(p.nodes)) != len(p.nodes):
            problems.append(f"path {k} repeats a vertex")
        for v in _occupied(net, p):
            if v in users:
                problems.append(f"vertex {v} is shared by paths {users[v]} and {k}")
            else:
                users[v] = k
        ending[p.last] = ending.get(p.last, 0) + 1

    for t in sorted(net.pa.T):
        count = ending.get(agent_node(t), 0)
        if count != 1:
            problems.append(f"terminal {t} ends {count} paths")
    for node, count in sorted(starting.items()):
        if count > 1:
            problems.append(f"light agent {node[1]} starts {count} paths")
        N = net.ci.light[node[1]].N
        got = ending.get(node, 0)
        if got * alpha < N:
            problems.append(f"light agent {node[1]} gets {got} paths, needs {N}/{alpha}")
    return not problems, problems


def _trim(ci: CanonicalInstance, pa: PrivateAssignment, agent: int, bundle: Set[int]) -> Set[int]:
    """Smallest satisfying part of a bundle, preferring the private item"""
    own = pa.P.get(agent)
    if own is not None and own in bundle:
        return {own}
    if agent in ci.heavy:
        usable = sorted(bundle & ci.heavy[agent])
        return {usable[0]} if usable else set()
    la = ci.light[agent]
    return set(sorted(bundle & la.S)[: la.N])


def forest_from_allocation(
    ci: CanonicalInstance, pa: PrivateAssignment, alloc: Allocation
) -> Tuple[SolutionForest, List[SimplePath]]:
    """Flow-carrying edges of an integral solution and its simple paths.

    Bundles are first trimmed to minimal satisfying sets; private items
    nobody uses go back to their owners, and rotations of private items
    along a cycle are undone, so every flow chain ends at a terminal.
    """
    bundles: Dict[int, Set[int]] = {a: set() for a in ci.agents}
    for item, agent in alloc.owner.items():
        if agent in bundles:
            bundles[agent].add(item)
    used = {a: _trim(ci, pa, a, b) for a, b in bundles.items()}

    while True:
        holder = {i: a for a, b in used.items() for i in b}
        changed = False
        for a, i in sorted(pa.P.items()):
            if i not in holder:
                used[a] = {i}
                changed = True
                break
        if changed:
            continue
        g = nx.DiGraph()
        for a, i in pa.P.items():
            if holder[i] != a:
                g.add_edge(a, holder[i])
        try:
            cycle = nx.find_cycle(g)
        except nx.NetworkXNoCycle:
            break
        for a, _ in cycle:
            used[a] = {pa.P[a]}

    for a in ci.agents:
        if not used[a]:
            raise PreconditionError(f"agent {a} is not satisfied by the allocation")

    forest = SolutionForest()
    for a in ci.agents:
        if pa.P.get(a) in used[a]:
            continue
        for i in sorted(used[a]):
            forest.parent[item_node(i)] = agent_node(a)
        if a in pa.P:
            forest.parent[agent_node(a)] = item_node(pa.P[a])
        else:
            forest.roots.add(a)
    return forest, forest_paths(ci, forest)


def forest_paths(ci: CanonicalInstance, forest: SolutionForest) -> List[SimplePath]:
    """Cuts every leaf-to-root path at light agents into simple paths"""
    children = forest.children()
    starts = [n for n in forest.parent if n not in children and n[0] == ITEM]
    starts += [n for n in forest.parent if n[0] == AGENT and ci.is_light(n[1])]
    out = []
    for start in sorted(starts):
        nodes = [start]
        cur = start
        while cur in forest.parent:
            cur = forest.parent[cur]
            nodes.append(cur)
            if cur[0] == AGENT and ci.is_light(cur[1]):
                break
        out.append(SimplePath(tuple(nodes)))
    return out


def _direct_origin(ci: CanonicalInstance, forest: SolutionForest, children, node: Node) -> Node:
    """Walks down a chain of heavy agents and items to a light agent or a leaf"""
    cur = node
    while True:
        if cur[0] == AGENT and ci.is_light(cur[1]):
            return cur
        below = children.get(cur, [])
        if not below:
            return cur
        cur = below[0]


def _remove_subtree(forest: SolutionForest, children, node: Node) -> None:
    stack = [node]
    while stack:
        cur = stack.pop()
        stack.extend(children.get(cur, []))
        forest.parent.pop(cur, None)


def layerize(
    ci: CanonicalInstance,
    forest: SolutionForest,
    h: int,
    logging: Optional[Logger] = None,
) -> Tuple[SolutionForest, Dict[int, int]]:
    """Prunes a solution forest into an h-layered one.

    A light agent is level 1 when at least N_A/(h+1) of its children are fed
    directly from S, and level j when that many are fed directly by level
    j-1 agents; children of a leveled agent that are not fed that way are
    cut off with their subtree.

    Returns:
        Tuple[SolutionForest, Dict[int, int]]: the pruned forest and the level of each light agent
    """
    logging = logging or Logger.quiet()
    if h < 1:
        raise PreconditionError("the number of layers must be at least 1")
    forest = forest.copy()
    level: Dict[int, int] = {}
    for j in range(1, h + 1):
        children = forest.children()
        present = sorted(
            n[1] for n in forest.nodes() if n[0] == AGENT and ci.is_light(n[1])
        )
        newly: List[int] = []
        for a in present:
            if a in level:
                continue
            feeders = children.get(agent_node(a), [])
            good = []
            for child in feeders:
                origin = _direct_origin(ci, forest, children, child)
                if j == 1 and origin[0] == ITEM:
                    good.append(child)
                elif j > 1 and origin[0] == AGENT and level.get(origin[1]) == j - 1:
                    good.append(child)
            if len(good) * (h + 1) >= ci.light[a].N:
                newly.append(a)
                for child in feeders:
                    if child not in good:
                        _remove_subtree(forest, children, child)
                children = forest.children()
        for a in newly:
            level[a] = j
        logging.log(LogLevel.Debug, f"layerize: {len(newly)} light agents on level {j}")

    remaining = sorted(
        n[1] for n in forest.nodes() if n[0] == AGENT and ci.is_light(n[1])
    )
    for a in remaining:
        if a not in level:
            raise InvariantViolation(
                f"light agent {a} has no level after {h} rounds; the instance is too small for {h} layers"
            )
    tree_heights(ci, forest, level)
    return forest, level


def tree_heights(
    ci: CanonicalInstance, forest: SolutionForest, level: Dict[int, int]
) -> Dict[int, int]:
    """h(tau) per root terminal; raises if some tree is not uniformly layered"""
    children = forest.children()
    heights: Dict[int, int] = {}
    for root in sorted(forest.roots):
        node = agent_node(root)
        if node not in children:
            continue
        top = _direct_origin(ci, forest, children, children[node][0])
        if top[0] != AGENT:
            raise InvariantViolation(f"terminal {root} is fed without any light agent")
        heights[root] = level[top[1]]

    def check(node: Node, expect: int) -> None:
        for child in children.get(node, []):
            origin = _direct_origin(ci, forest, children, child)
            if origin[0] == ITEM:
                if expect != 1:
                    raise InvariantViolation(f"leaf under {node} skips {expect - 1} levels")
                continue
            if level.get(origin[1]) != expect - 1:
                raise InvariantViolation(f"light agent {origin[1]} breaks the layering")
            check(origin, expect - 1)

    for root, height in heights.items():
        node = agent_node(root)
        top = _direct_origin(ci, forest, children, children[node][0])
        check(top, height)
    return heights


def extract_allocation(
    net: FlowNetwork, paths: Iterable[SimplePath], alpha: Optional[Fraction] = None
) -> Allocation:
    """Each agent on a path takes the item before it; everyone else keeps P(A).

    With alpha given the path set is checked first.
    """
    paths = list(paths)
    if alpha is not None:
        ok, problems = check_alpha_feasible(net, paths, alpha)
        if not ok:
            raise PreconditionError(f"infeasible path set: {problems[0]}")
    return allocation_from_paths(net.pa.P, paths)


def allocation_from_paths(P: Dict[int, int], paths: Iterable[SimplePath]) -> Allocation:
    alloc = Allocation()
    for p in paths:
        for u, v in p.edges():
            if u[0] == ITEM and v[0] == AGENT:
                alloc.assign(u[1], v[1])
    for a, i in sorted(P.items()):
        if i not in alloc.owner:
            alloc.assign(i, a)
    return alloc


def restore_terminal_minimality(
    ci: CanonicalInstance,
    pa: PrivateAssignment,
    avoid: FrozenSet[Node] = frozenset(),
    logging: Optional[Logger] = None,
) -> PrivateAssignment:
    """Re-augments private items until no terminal is reachable from S
    without crossing a light agent; augmenting paths avoid the given vertices.
    """
    logging = logging or Logger.quiet()
    while True:
        net = build_network(ci, pa)
        _, direct_heavy = net.direct_reach
        stuck = sorted(direct_heavy & pa.T)
        if not stuck:
            return pa
        t = stuck[0]
        blocked = {
            n for n in net.graph if n in avoid or net.is_light(n)
        } - {agent_node(t)}
        sub = net.graph.subgraph(n for n in net.graph if n not in blocked)
        try:
            route = nx.shortest_path(sub, SOURCE, agent_node(t))
        except nx.NetworkXNoPath:
            raise InvariantViolation(
                f"terminal {t} is fed directly from S but every augmenting path is in use"
            ) from None
        P = dict(pa.P)
        for prev, node in zip(route[1:], route[2:]):
            if node[0] == AGENT:
                P[node[1]] = prev[1]
        logging.log(LogLevel.Debug, f"augmented terminal {t} along {len(route) - 1} edges")
        pa = PrivateAssignment(P, frozenset(a for a in ci.heavy if a not in P))
