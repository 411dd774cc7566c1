#!/usr/bin/env python3

from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Optional, Set, Tuple

import networkx as nx

from models.trees import Tree, TreeDecomposition
from utils.errors import InvariantViolation, PreconditionError

Edge = Tuple[int, int]
StepHook = Callable[[str, Dict[int, Fraction], Dict[Edge, Fraction]], None]


def bs_row_problems(
    agents: Iterable[int],
    items: Iterable[int],
    x: Dict[int, Fraction],
    y: Dict[Edge, Fraction],
    tol: Fraction = Fraction(0),
) -> List[str]:
    """Checks sum_A y(A,i) <= 1, sum_i y(A,i) = 1 - x_A and 0 <= y <= 1"""
    problems = []
    per_item: Dict[int, Fraction] = {i: Fraction(0) for i in items}
    per_agent: Dict[int, Fraction] = {a: Fraction(0) for a in agents}
    for (a, i), v in y.items():
        if v < -tol or v > 1 + tol:
            problems.append(f"y({a},{i}) = {v} is outside [0, 1]")
        if a not in per_agent or i not in per_item:
            problems.append(f"y({a},{i}) names an unknown agent or item")
            continue
        per_item[i] += v
        per_agent[a] += v
    for i, total in sorted(per_item.items()):
        if total > 1 + tol:
            problems.append(f"item {i} is assigned {total} > 1")
    for a, total in sorted(per_agent.items()):
        want = 1 - Fraction(x.get(a, 0))
        if abs(total - want) > tol:
            problems.append(f"agent {a} is assigned {total}, expected {want}")
    return problems


def _a(agent: int) -> Tuple[str, int]:
    return ("a", agent)


def _i(item: int) -> Tuple[str, int]:
    return ("i", item)


def bs_decompose(
    agents: Iterable[int],
    items: Iterable[int],
    x: Dict[int, Fraction],
    y: Dict[Edge, Fraction],
    tol: Fraction = Fraction(0),
    on_step: Optional[StepHook] = None,
) -> TreeDecomposition:
    """Restructures a fractional heavy-item assignment into disjoint trees.

    Cycles are cancelled by shifting the smallest value around them, items
    of degree 1 are fixed to their agent, and items of degree 3 or more are
    split off below a child edge carrying less than 1/2. Every remaining
    tree has items of degree 2 and agents of total x above 1/2.

    Args:
        agents (Iterable[int]): agent ids
        items (Iterable[int]): item ids
        x (Dict[int, Fraction]): light-satisfaction extent per agent
        y (Dict[Edge, Fraction]): fractional assignment per (agent, item)
        tol (Fraction): slack allowed on the input rows
        on_step (Optional[StepHook]): called with (step, x, y) after every change

    Returns:
        TreeDecomposition: trees and fixed edges
    """
    agents = sorted(set(agents))
    items = sorted(set(items))
    x = {a: Fraction(x.get(a, 0)) for a in agents}
    y = {e: min(Fraction(1), Fraction(v)) for e, v in sorted(y.items()) if v > 0}
    problems = bs_row_problems(agents, items, x, y, tol)
    if problems:
        raise PreconditionError(f"fractional assignment breaks its rows: {problems[0]}")

    out = TreeDecomposition(x=dict(x))
    g = nx.Graph()
    g.add_nodes_from(_a(a) for a in agents)
    g.add_nodes_from(_i(i) for i in items)
    g.add_edges_from((_a(a), _i(i)) for a, i in y)

    def notify(step: str) -> None:
        if on_step is not None:
            on_step(step, x, y)

    def fix(a: int, i: int) -> None:
        for _, other in list(g.edges(_a(a))):
            if other[1] != i:
                y[(a, other[1])] = Fraction(0)
        y[(a, i)] = Fraction(1)
        x[a] = Fraction(0)
        out.matched[a] = i
        g.remove_node(_a(a))
        g.remove_node(_i(i))

    def settle() -> None:
        for a, i in sorted(y):
            if not g.has_edge(_a(a), _i(i)):
                continue
            if y[(a, i)] <= 0:
                y[(a, i)] = Fraction(0)
                g.remove_edge(_a(a), _i(i))
            elif y[(a, i)] >= 1:
                fix(a, i)

    settle()
    notify("start")

    # Step 1: cancel cycles
    while True:
        try:
            cycle = nx.find_cycle(g)
        except nx.NetworkXNoCycle:
            break
        keys = [(u[1], v[1]) if u[0] == "a" else (v[1], u[1]) for u, v in cycle]
        smallest = min(range(len(keys)), key=lambda k: (y[keys[k]], k))
        down = [keys[k] for k in range(len(keys)) if k % 2 == smallest % 2]
        up = [keys[k] for k in range(len(keys)) if k % 2 != smallest % 2]
        delta = y[keys[smallest]]
        for e in down:
            y[e] -= delta
        for e in up:
            y[e] += delta
        settle()
        notify("cycle")

    # Steps 2 and 3
    while True:
        leaf = sorted(n[1] for n in g if n[0] == "i" and g.degree(n) == 1)
        if leaf:
            i = leaf[0]
            (_, agent_n), = list(g.edges(_i(i)))
            fix(agent_n[1], i)
            notify("fix")
            continue
        split = None
        for comp in sorted(nx.connected_components(g), key=min):
            if any(n[0] == "i" and g.degree(n) >= 3 for n in comp):
                split = comp
                break
        if split is None:
            break
        tree = _split_off(g, split, y)
        out.trees.append(tree)
        notify("split")

    for comp in sorted(nx.connected_components(g), key=min):
        comp_agents = frozenset(n[1] for n in comp if n[0] == "a")
        if not comp_agents:
            continue
        edges = frozenset(
            (u[1], v[1]) if u[0] == "a" else (v[1], u[1]) for u, v in g.subgraph(comp).edges
        )
        out.trees.append(
            Tree(comp_agents, frozenset(n[1] for n in comp if n[0] == "i"), edges)
        )

    for tree in out.trees:
        slack = tol * (len(tree.agents) + len(tree.items))
        if 2 * tree.x_mass(out.x) <= 1 - 2 * slack:
            raise InvariantViolation(
                f"tree over agents {sorted(tree.agents)} carries x mass {tree.x_mass(out.x)}"
            )
        for i in tree.items:
            if sum(1 for a, j in tree.edges if j == i) != 2:
                raise InvariantViolation(f"item {i} does not have degree 2 in its tree")
    return out


def _split_off(g: nx.Graph, comp: Set, y: Dict[Edge, Fraction]) -> Tree:
    """Cuts the subtree hanging below the lightest child edge of a deepest
    item of degree >= 3 and removes it from g"""
    root = min(n for n in comp if n[0] == "i")
    parent = {root: None}
    order = []
    for u, v in nx.dfs_edges(g, root):
        parent[v] = u
    for n in nx.dfs_postorder_nodes(g, root):
        order.append(n)
    target = next(n for n in order if n[0] == "i" and g.degree(n) >= 3)
    kids = sorted(n for n in g.neighbors(target) if n != parent[target])
    child = min(kids, key=lambda a: (y[(a[1], target[1])], a))
    g.remove_edge(child, target)
    below = nx.node_connected_component(g, child)
    edges = frozenset(
        (u[1], v[1]) if u[0] == "a" else (v[1], u[1]) for u, v in g.subgraph(below).edges
    )
    tree = Tree(
        frozenset(n[1] for n in below if n[0] == "a"),
        frozenset(n[1] for n in below if n[0] == "i"),
        edges,
    )
    g.remove_nodes_from(below)
    return tree


def assign_tree(tree: Tree, root: int) -> Dict[int, int]:
    """Every agent of the tree but root gets the item above it"""
    if root not in tree.agents:
        raise PreconditionError(f"agent {root} is not in the tree")
    adj = tree.neighbours()
    out: Dict[int, int] = {}
    seen = {("a", root)}
    stack = [("a", root)]
    while stack:
        node = stack.pop()
        for nxt in adj.get(node, []):
            if nxt in seen:
                continue
            seen.add(nxt)
            if nxt[0] == "a":
                out[nxt[1]] = node[1]
            stack.append(nxt)
    return out
