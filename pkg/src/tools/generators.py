"""Seeded instance generators.

Every generator takes an explicit seed and draws from its own
numpy Generator, so the same arguments always give the same instance.
"""

import itertools
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from models.canonical import CanonicalInstance, LightAgent, PrivateAssignment
from models.instance import Allocation, Instance
from models.weighted_graph import WeightedEdge, WeightedGraph
from utils.errors import InstanceParseError, PreconditionError

Clause = Tuple[int, int, int]


def gen_random(
    m: int, n: int, density: float, max_utility: int, seed: int
) -> Instance:
    """Random instance with integer utilities 1..max_utility

    Args:
        m (int): agents
        n (int): items
        density (float): probability that a pair (agent, item) is nonzero
        max_utility (int): largest utility drawn
        seed (int): generator seed

    Returns:
        Instance: the instance
    """
    if m < 1 or n < 1 or max_utility < 1:
        raise PreconditionError("m, n and max_utility must be positive")
    if not (0 < density <= 1):
        raise PreconditionError("density must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    mask = rng.random((m, n)) < density
    values = rng.integers(1, max_utility + 1, size=(m, n))
    utilities = {
        (a, i): Fraction(int(values[a, i]))
        for a in range(m)
        for i in range(n)
        if mask[a, i]
    }
    return Instance(m, n, utilities)


def gen_random_restricted(
    m: int, n: int, max_utility: int, seed: int, loop_share: float = 0.2
) -> Instance:
    """Random 2-restricted instance: every item is wanted by one or two agents"""
    if m < 1 or n < 1 or max_utility < 1:
        raise PreconditionError("m, n and max_utility must be positive")
    rng = np.random.default_rng(seed)
    utilities: Dict[Tuple[int, int], Fraction] = {}
    for i in range(n):
        if m == 1 or rng.random() < loop_share:
            agents = [int(rng.integers(m))]
        else:
            agents = [int(a) for a in rng.choice(m, size=2, replace=False)]
        for a in agents:
            utilities[(a, i)] = Fraction(int(rng.integers(1, max_utility + 1)))
    return Instance(m, n, utilities)


def gen_random_graph(
    n_vertices: int, n_edges: int, max_weight: int, seed: int, loop_share: float = 0.1
) -> WeightedGraph:
    """Random non-uniformly weighted multigraph with loops and parallel edges"""
    if n_vertices < 1 or max_weight < 1 or n_edges < 0:
        raise PreconditionError("graph parameters must be positive")
    rng = np.random.default_rng(seed)
    edges = []
    for k in range(n_edges):
        u = int(rng.integers(n_vertices))
        if n_vertices == 1 or rng.random() < loop_share:
            w = Fraction(int(rng.integers(1, max_weight + 1)))
            edges.append(WeightedEdge(k, u, u, w, w))
            continue
        v = int(rng.integers(n_vertices - 1))
        if v >= u:
            v += 1
        edges.append(
            WeightedEdge(
                k,
                u,
                v,
                Fraction(int(rng.integers(1, max_weight + 1))),
                Fraction(int(rng.integers(1, max_weight + 1))),
            )
        )
    return WeightedGraph(n_vertices, tuple(edges))


def _gap_layout(M: int):
    """Agent and item ids of the gap construction, gadget by gadget.

    Per gadget g: light agents L_1..L_M, terminals t_1..t_{M-1}, then L*;
    the global terminal t* comes last. Items per gadget: S(L_1)..S(L_M),
    then h(L_1)..h(L_M); the items h(L*_g) close the list.
    """
    per_agents = 2 * M
    per_items = M * M + M
    layout = []
    for g in range(M):
        a0 = g * per_agents
        i0 = g * per_items
        layout.append(
            {
                "L": [a0 + k for k in range(M)],
                "t": [a0 + M + k for k in range(M - 1)],
                "star": a0 + 2 * M - 1,
                "S": [[i0 + k * M + r for r in range(M)] for k in range(M)],
                "h": [i0 + M * M + k for k in range(M)],
                "h_star": M * per_items + g,
            }
        )
    t_star = M * per_agents
    n_items = M * per_items + M
    return layout, t_star, n_items


def gen_gap_instance(M: int) -> Tuple[CanonicalInstance, PrivateAssignment]:
    """Canonical instance whose layered LP is feasible at value M while every
    integral solution leaves some agent with utility at most 1.

    Args:
        M (int): gadget size and target value, at least 2

    Returns:
        Tuple[CanonicalInstance, PrivateAssignment]: instance and its private items
    """
    if M < 2:
        raise PreconditionError("the gap construction needs M >= 2")
    layout, t_star, n_items = _gap_layout(M)
    heavy: Dict[int, FrozenSet[int]] = {}
    light: Dict[int, LightAgent] = {}
    P: Dict[int, int] = {}
    for g in layout:
        for k, agent in enumerate(g["L"]):
            light[agent] = LightAgent(g["h"][k], M, frozenset(g["S"][k]))
            P[agent] = g["h"][k]
        for agent in g["t"]:
            heavy[agent] = frozenset(g["h"])
        light[g["star"]] = LightAgent(g["h_star"], M, frozenset(g["h"]))
        P[g["star"]] = g["h_star"]
    heavy[t_star] = frozenset(g["h_star"] for g in layout)
    ci = CanonicalInstance(Fraction(M), Fraction(0), n_items, heavy, light)
    return ci, PrivateAssignment(P, frozenset(heavy))


def gen_gap_followup(
    M: int, n_star: Optional[int] = None
) -> Tuple[CanonicalInstance, PrivateAssignment]:
    """The instance the driver faces after one iteration on the gap instance:
    L_1..L_{M-1} of every gadget are gone, t_i keeps h(L_i) as private item
    and only t* is a terminal.

    Args:
        M (int): gadget size
        n_star (Optional[int]): threshold of every L*, M when omitted

    Returns:
        Tuple[CanonicalInstance, PrivateAssignment]: instance and private items
    """
    ci, pa = gen_gap_instance(M)
    layout, t_star, _ = _gap_layout(M)
    dropped = [agent for g in layout for agent in g["L"][: M - 1]]
    ci = ci.without_agents(dropped)
    if n_star is not None:
        if n_star < 1:
            raise PreconditionError("the L* threshold must be positive")
        ci = ci.with_thresholds({g["star"]: n_star for g in layout})
    P = {a: i for a, i in pa.P.items() if a not in dropped}
    for g in layout:
        for k, agent in enumerate(g["t"]):
            P[agent] = g["h"][k]
    return ci, PrivateAssignment(P, frozenset({t_star}))


def gen_planted_canonical(
    n_heavy: int,
    n_light: int,
    max_N: int,
    seed: int,
    terminals: int = 1,
    noise: int = 1,
    epsilon: Fraction = Fraction(1, 2),
) -> Tuple[CanonicalInstance, Allocation]:
    """Random canonical instance with a planted solution satisfying everyone.

    The first `terminals` heavy agents are planted on heavy items of light
    agents, so each needs a light agent to give up h(A); those light agents and any
    light agent feeding them through its own heavy item take N_A fresh light
    items instead. `noise` extra wanted items per agent never hurt the
    planted solution.

    Returns:
        Tuple[CanonicalInstance, Allocation]: the instance and the planted allocation
    """
    if n_heavy < terminals or n_light < terminals or terminals < 0 or max_N < 1:
        raise PreconditionError("terminals must not exceed n_heavy or n_light")
    if n_heavy < 1:
        raise PreconditionError("need at least one heavy agent")
    rng = np.random.default_rng(seed)
    next_item = itertools.count()
    heavy_ids = list(range(n_heavy))
    light_ids = list(range(n_heavy, n_heavy + n_light))
    N = {a: int(rng.integers(1, max_N + 1)) for a in light_ids}
    h = {a: next(next_item) for a in light_ids}
    alloc = Allocation()

    planted_heavy: Dict[int, int] = {}
    consuming: List[int] = []
    for k, agent in enumerate(heavy_ids):
        if k < terminals:
            planted_heavy[agent] = h[light_ids[k]]
            consuming.append(light_ids[k])
        else:
            planted_heavy[agent] = next(next_item)
        alloc.assign(planted_heavy[agent], agent)

    planted_light: Dict[int, List[int]] = {a: [] for a in consuming}
    for agent in light_ids[terminals:]:
        # an idle light agent keeps h(A) unless it feeds a consuming one
        open_slots = [c for c in consuming if len(planted_light[c]) < N[c] - 1]
        if open_slots and rng.random() < 0.5:
            parent = open_slots[int(rng.integers(len(open_slots)))]
            planted_light[parent].append(h[agent])
            consuming.append(agent)
            planted_light[agent] = []
        else:
            alloc.assign(h[agent], agent)
    for agent in consuming:
        while len(planted_light[agent]) < N[agent]:
            planted_light[agent].append(next(next_item))
        for item in planted_light[agent]:
            alloc.assign(item, agent)

    n_items = next(next_item)
    heavy: Dict[int, FrozenSet[int]] = {}
    for agent in heavy_ids:
        extra = rng.choice(n_items, size=min(noise, n_items), replace=False)
        heavy[agent] = frozenset({planted_heavy[agent], *(int(i) for i in extra)})
    light: Dict[int, LightAgent] = {}
    for agent in light_ids:
        extra = {int(i) for i in rng.choice(n_items, size=min(noise, n_items), replace=False)}
        S = (set(planted_light.get(agent, [])) | extra) - {h[agent]}
        light[agent] = LightAgent(h[agent], N[agent], frozenset(S))
    ci = CanonicalInstance(Fraction(max_N), Fraction(epsilon), n_items, heavy, light)
    return ci, alloc


def literal_vertex(literal: int, n_vars: int) -> int:
    """x_v -> 2(v-1), not x_v -> 2(v-1)+1"""
    v = abs(literal)
    if not (1 <= v <= n_vars):
        raise PreconditionError(f"literal {literal} names no variable")
    return 2 * (v - 1) + (0 if literal > 0 else 1)


def _occurrences(formula: Sequence[Clause], n_vars: int) -> Dict[int, int]:
    counts = {lit: 0 for v in range(1, n_vars + 1) for lit in (v, -v)}
    for clause in formula:
        for lit in clause:
            counts[lit] += 1
    return counts


def gen_hardness_instance(
    formula: Sequence[Clause], n_vars: Optional[int] = None
) -> WeightedGraph:
    """Weighted graph of the 2-restricted hardness reduction.

    Vertices are the 2v literals followed by the clauses. Each variable joins
    its two literals with a weight-1 edge; each clause is joined to its three
    literals with weight-1/2 edges; clauses and literals used once get a
    weight-1/2 self-loop.
    """
    if not formula:
        raise PreconditionError("the formula has no clauses")
    for k, clause in enumerate(formula):
        if len(clause) != 3:
            raise PreconditionError(f"clause {k + 1} does not have exactly 3 literals")
    if n_vars is None:
        n_vars = max(abs(lit) for clause in formula for lit in clause)
    counts = _occurrences(formula, n_vars)
    for lit, c in sorted(counts.items(), key=lambda kv: (abs(kv[0]), -kv[0])):
        if not (1 <= c <= 2):
            raise PreconditionError(f"literal {lit} appears in {c} clauses, expected 1 or 2")

    half = Fraction(1, 2)
    edges: List[WeightedEdge] = []
    ids = itertools.count()
    for v in range(1, n_vars + 1):
        edges.append(
            WeightedEdge(next(ids), literal_vertex(v, n_vars), literal_vertex(-v, n_vars), 1, 1)
        )
    clause0 = 2 * n_vars
    for k, clause in enumerate(formula):
        for lit in clause:
            edges.append(
                WeightedEdge(next(ids), clause0 + k, literal_vertex(lit, n_vars), half, half)
            )
    for k in range(len(formula)):
        edges.append(WeightedEdge(next(ids), clause0 + k, clause0 + k, half, half))
    for lit, c in sorted(counts.items(), key=lambda kv: literal_vertex(kv[0], n_vars)):
        if c == 1:
            vertex = literal_vertex(lit, n_vars)
            edges.append(WeightedEdge(next(ids), vertex, vertex, half, half))
    return WeightedGraph(clause0 + len(formula), tuple(edges))


def parse_cnf(text: str) -> Tuple[List[Clause], int]:
    """Reads a DIMACS CNF document

    Returns:
        Tuple[List[Clause], int]: the clauses and the number of variables
    """
    clauses: List[Clause] = []
    n_vars: Optional[int] = None
    current: List[int] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise InstanceParseError("malformed problem line", field="p", line=number)
            try:
                n_vars = int(parts[2])
            except ValueError:
                raise InstanceParseError("variable count is not an integer", field="p", line=number) from None
            continue
        for token in line.split():
            try:
                lit = int(token)
            except ValueError:
                raise InstanceParseError(f"literal {token!r} is not an integer", field="clause", line=number) from None
            if lit == 0:
                if len(current) != 3:
                    raise InstanceParseError(
                        f"clause has {len(current)} literals, expected 3", field="clause", line=number
                    )
                clauses.append((current[0], current[1], current[2]))
                current = []
            else:
                current.append(lit)
    if current:
        raise InstanceParseError("last clause is not terminated by 0", field="clause")
    if not clauses:
        raise InstanceParseError("no clauses found", field="clause")
    largest = max(abs(lit) for clause in clauses for lit in clause)
    if n_vars is None:
        n_vars = largest
    elif largest > n_vars:
        raise InstanceParseError(f"literal {largest} exceeds the declared {n_vars} variables", field="p")
    return clauses, n_vars


def is_satisfiable(formula: Sequence[Clause], n_vars: int) -> bool:
    for bits in itertools.product((False, True), repeat=n_vars):
        if all(any(bits[abs(l) - 1] == (l > 0) for l in clause) for clause in formula):
            return True
    return False


def gen_random_cnf(
    n_vars: int, n_clauses: int, seed: int, satisfiable: bool = True, attempts: int = 1000
) -> List[Clause]:
    """Random 3-CNF in which every literal occurs once or twice"""
    if not (2 * n_vars <= 3 * n_clauses <= 4 * n_vars):
        raise PreconditionError(
            f"{n_clauses} clauses cannot use each of {2 * n_vars} literals once or twice"
        )
    rng = np.random.default_rng(seed)
    literals = [lit for v in range(1, n_vars + 1) for lit in (v, -v)]
    for _ in range(attempts):
        extra = rng.choice(len(literals), size=3 * n_clauses - len(literals), replace=False)
        pool = literals + [literals[int(k)] for k in extra]
        order = rng.permutation(len(pool))
        pool = [pool[int(k)] for k in order]
        formula = [tuple(pool[3 * k : 3 * k + 3]) for k in range(n_clauses)]
        if any(len({abs(l) for l in clause}) != 3 for clause in formula):
            continue
        if is_satisfiable(formula, n_vars) == satisfiable:
            return formula  # type: ignore[return-value]
    raise PreconditionError(f"no formula found in {attempts} attempts")


def gen_fractional_assignment(
    n_agents: int, n_items: int, seed: int, denominator: int = 4
) -> Tuple[Dict[int, Fraction], Dict[Tuple[int, int], Fraction]]:
    """Random x and y with sum_i y(A,i) = 1 - x_A and every item used at most once.

    Values are multiples of 1/denominator; an agent that finds no room left
    takes the rest as x_A.

    Returns:
        Tuple[Dict[int, Fraction], Dict[Tuple[int, int], Fraction]]: x per agent, y per edge
    """
    if n_agents < 1 or n_items < 1 or denominator < 1:
        raise PreconditionError("agents, items and the denominator must be positive")
    rng = np.random.default_rng(seed)
    room = {i: denominator for i in range(n_items)}
    x: Dict[int, Fraction] = {}
    y: Dict[Tuple[int, int], Fraction] = {}
    for a in range(n_agents):
        want = denominator - int(rng.integers(0, denominator + 1))
        reach = rng.choice(n_items, size=min(n_items, int(rng.integers(1, 4))), replace=False)
        for i in sorted(int(r) for r in reach):
            if want == 0:
                break
            take = min(want, room[i], int(rng.integers(1, denominator + 1)))
            if take:
                y[(a, i)] = Fraction(take, denominator)
                room[i] -= take
                want -= take
    for a in range(n_agents):
        assigned = sum((v for (b, _), v in y.items() if b == a), Fraction(0))
        x[a] = 1 - assigned
    return x, y
