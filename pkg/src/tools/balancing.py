#!/usr/bin/env python3
"""2-restricted instances as weighted graphs: the configuration LP, the split
into integral and fractional items, and the weighted orientation."""

import heapq
import itertools
import math
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

from models.config_lp import BalanceResult, ConfigLPSolution, Configuration, ItemSplit
from models.instance import Allocation, Instance
from models.weighted_graph import Orientation, WeightedEdge, WeightedGraph, balance_violations
from tools.oracles import value
from utils.errors import GuardExceeded, InvariantViolation, NumericalFailure, PreconditionError
from utils.logger import LogLevel, Logger

SNAP = 1e-7
MAX_ROUNDS = 500

# (tail, edge id, head)
Arc = Tuple[int, int, int]


def to_graph(inst: Instance) -> WeightedGraph:
    """One edge per item between the agents that value it; an item valued
    by a single agent is a self-loop, items nobody values are left out"""
    edges = []
    for item in range(inst.n):
        agents = inst.wanting[item]
        if len(agents) > 2:
            raise PreconditionError(
                f"item {item} is wanted by agents {agents}, the instance is not 2-restricted"
            )
        if not agents:
            continue
        a, b = agents[0], agents[-1]
        edges.append(WeightedEdge(item, a, b, inst.u(a, item), inst.u(b, item)))
    return WeightedGraph(inst.m, tuple(edges))


def graph_to_instance(g: WeightedGraph) -> Instance:
    if len(g.by_id) != len(g.edges):
        raise PreconditionError("two edges share an id")
    n = max((e.id for e in g.edges), default=0) + 1
    utilities: Dict[Tuple[int, int], Fraction] = {}
    for e in g.edges:
        utilities[(e.u, e.id)] = e.w_u
        utilities[(e.v, e.id)] = e.w_v
    return Instance(g.n_vertices, n, utilities)


def _cheapest_configuration(
    edges: List[WeightedEdge], agent: int, target: Fraction, price: Dict[int, float], guard: int
) -> Tuple[float, FrozenSet[int]]:
    """Knapsack cover: the cheapest set of the agent's items worth at least target.

    Utilities are scaled to integers and coverage is capped at the target,
    so the table has target * scale + 1 entries.
    """
    useful = [e for e in edges if e.weight(agent) > 0]
    scale = target.denominator
    for e in useful:
        scale = math.lcm(scale, e.weight(agent).denominator)
    cap = int(target * scale)
    if cap > guard:
        raise GuardExceeded(
            f"pricing agent {agent} needs {cap} states, guard is {guard}; "
            f"a grid of {guard} steps would need epsilon >= {len(useful) / guard:.3g}"
        )
    reach = np.arange(cap + 1)
    best = np.full(cap + 1, np.inf)
    best[0] = 0.0
    taken = np.zeros((len(useful), cap + 1), dtype=bool)
    for k, e in enumerate(useful):
        step = int(e.weight(agent) * scale)
        cand = best[np.maximum(reach - step, 0)] + price.get(e.id, 0.0)
        taken[k] = cand < best
        best = np.where(taken[k], cand, best)
    if not np.isfinite(best[cap]):
        return math.inf, frozenset()
    chosen = []
    c = cap
    for k in reversed(range(len(useful))):
        if taken[k][c]:
            chosen.append(useful[k].id)
            c = max(0, c - int(useful[k].weight(agent) * scale))
    return float(best[cap]), frozenset(chosen)


def _master(
    m: int, item_rows: Dict[int, int], columns: List[Tuple[int, FrozenSet[int]]]
):
    """Phase one of the restricted master: one artificial per agent row"""
    width = m + len(columns)
    rows, cols = list(range(m)), list(range(m))
    for k, (agent, _) in enumerate(columns):
        rows.append(agent)
        cols.append(m + k)
    A_eq = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(m, width)).tocsr()
    A_ub = b_ub = None
    if item_rows:
        r_ub, c_ub = [], []
        for k, (_, items) in enumerate(columns):
            for i in items:
                r_ub.append(item_rows[i])
                c_ub.append(m + k)
        A_ub = coo_matrix(
            (np.ones(len(r_ub)), (r_ub, c_ub)), shape=(len(item_rows), width)
        ).tocsr()
        b_ub = np.ones(len(item_rows))
    c = np.concatenate([np.ones(m), np.zeros(len(columns))])
    res = linprog(
        c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=np.ones(m), bounds=(0, None), method="highs-ds"
    )
    if res.status != 0:
        raise NumericalFailure(f"restricted master stopped with status {res.status}: {res.message}")
    return res


def _rationalize(v: float) -> Fraction:
    if abs(v) <= SNAP:
        return Fraction(0)
    if abs(v - 1.0) <= SNAP:
        return Fraction(1)
    return Fraction(v).limit_denominator(1 << 20)


def _fill_items(g: WeightedGraph, by_agent: Dict[int, Dict[FrozenSet[int], Fraction]]) -> None:
    """Adds under-covered items to configurations until every item sums to 1"""
    for e in g.edges:
        total = sum(
            (w for a in {e.u, e.v} for s, w in by_agent.get(a, {}).items() if e.id in s),
            Fraction(0),
        )
        if total > 1:
            raise NumericalFailure(f"item {e.id} is covered {total} times after rounding")
        deficit = 1 - total
        configs = by_agent.setdefault(e.u, {})
        for s in sorted((s for s in configs if e.id not in s), key=sorted):
            if deficit == 0:
                break
            take = min(configs[s], deficit)
            configs[s] -= take
            if configs[s] == 0:
                del configs[s]
            grown = s | {e.id}
            configs[grown] = configs.get(grown, Fraction(0)) + take
            deficit -= take
        if deficit:
            raise InvariantViolation(f"item {e.id} cannot be covered by agent {e.u}")


def config_lp_problems(g: WeightedGraph, sol: ConfigLPSolution) -> List[str]:
    """Exact check of a support: weights positive, one unit per agent and
    per item, every configuration worth the target"""
    problems = []
    per_agent = {v: Fraction(0) for v in range(g.n_vertices)}
    per_item = {e.id: Fraction(0) for e in g.edges}
    for c in sol.support:
        if c.weight <= 0:
            problems.append(f"agent {c.agent} has a configuration of weight {c.weight}")
        worth = Fraction(0)
        for i in c.items:
            e = g.by_id.get(i)
            if e is None or c.agent not in (e.u, e.v):
                problems.append(f"agent {c.agent} uses item {i} it is not incident to")
                continue
            worth += e.weight(c.agent)
            per_item[i] += c.weight
        if worth < sol.target:
            problems.append(f"agent {c.agent} has a configuration worth {worth} < {sol.target}")
        per_agent[c.agent] += c.weight
    problems += [f"agent {a} has weight {w}" for a, w in per_agent.items() if w != 1]
    problems += [f"item {i} has weight {w}" for i, w in per_item.items() if w != 1]
    return problems


def solve_config_lp(
    g: WeightedGraph,
    M: Fraction,
    epsilon: Fraction,
    guard: int = 1_000_000,
    tol: float = 1e-9,
    logging: Optional[Logger] = None,
) -> Optional[ConfigLPSolution]:
    """Column generation for the configuration LP at target (1 - epsilon) M.

    Each round solves the restricted master with an artificial per agent
    and prices one configuration per agent. The final point is made exact
    and every item is topped up to a full unit.

    Args:
        g (WeightedGraph): the instance graph
        M (Fraction): guessed value
        epsilon (Fraction): the LP target is (1 - epsilon) M
        guard (int): largest pricing table per agent
        tol (float): artificial weight still counted as feasible
        logging (Optional[Logger]): progress sink

    Returns:
        Optional[ConfigLPSolution]: an exact support, or None when the LP has no point
    """
    logging = logging or Logger.quiet()
    M, epsilon = Fraction(M), Fraction(epsilon)
    if M <= 0:
        raise PreconditionError("the guessed value M must be positive")
    if not (0 < epsilon < 1):
        raise PreconditionError("epsilon must lie strictly between 0 and 1")
    target = (1 - epsilon) * M
    m = g.n_vertices
    for v in range(m):
        if sum((e.weight(v) for e in g.incident[v]), Fraction(0)) < target:
            logging.log(LogLevel.Debug, f"config LP at {target}: agent {v} cannot reach the target")
            return None

    item_rows = {e.id: k for k, e in enumerate(g.edges)}
    columns: List[Tuple[int, FrozenSet[int]]] = []
    seen: Set[Tuple[int, FrozenSet[int]]] = set()
    for rounds in range(1, MAX_ROUNDS + 1):
        res = _master(m, item_rows, columns)
        if res.fun <= tol:
            break
        duals = res.eqlin.marginals
        price = {}
        if item_rows:
            row_duals = res.ineqlin.marginals
            price = {i: max(0.0, -float(row_duals[k])) for i, k in item_rows.items()}
        added = 0
        for v in range(m):
            cost, items = _cheapest_configuration(g.incident[v], v, target, price, guard)
            if cost < float(duals[v]) - tol and (v, items) not in seen:
                seen.add((v, items))
                columns.append((v, items))
                added += 1
        logging.log(LogLevel.Debug, f"config LP round {rounds}: {added} new columns, phase one {res.fun:.3g}")
        if not added:
            return None
    else:
        raise NumericalFailure(f"column generation did not settle in {MAX_ROUNDS} rounds")

    by_agent: Dict[int, Dict[FrozenSet[int], Fraction]] = {}
    for (v, items), x in zip(columns, res.x[m:]):
        w = _rationalize(float(x))
        if w > 0:
            configs = by_agent.setdefault(v, {})
            configs[items] = configs.get(items, Fraction(0)) + w
    for v in range(m):
        total = sum(by_agent.get(v, {}).values(), Fraction(0))
        if abs(float(total) - 1.0) > 1e-6:
            raise NumericalFailure(f"agent {v} has weight {float(total):.6g} in the LP point")
        by_agent[v] = {s: w / total for s, w in by_agent[v].items()}
    _fill_items(g, by_agent)

    support = [
        Configuration(v, s, w)
        for v in sorted(by_agent)
        for s, w in sorted(by_agent[v].items(), key=lambda kv: sorted(kv[0]))
    ]
    sol = ConfigLPSolution(target, support, rounds)
    problems = config_lp_problems(g, sol)
    if problems:
        raise NumericalFailure(f"configuration LP point is not exact: {problems[0]}")
    logging.log(LogLevel.Debug, f"config LP at {target}: {len(support)} configurations in {rounds} rounds")
    return sol


def classify_items(g: WeightedGraph, sol: ConfigLPSolution) -> ItemSplit:
    """Integral items go to the agent holding them in every configuration,
    the rest form the graph H; each agent of H must keep its residual
    target after dropping its most valuable fractional item"""
    mass: Dict[Tuple[int, int], Fraction] = {}
    for c in sol.support:
        for i in c.items:
            mass[(c.agent, i)] = mass.get((c.agent, i), Fraction(0)) + c.weight
    integral: Dict[int, List[int]] = {v: [] for v in range(g.n_vertices)}
    fractional: List[WeightedEdge] = []
    for e in g.edges:
        owner = next((a for a in (e.u, e.v) if mass.get((a, e.id)) == 1), None)
        if owner is None:
            if e.is_loop:
                raise InvariantViolation(f"self-loop {e.id} is split between configurations")
            fractional.append(e)
        else:
            integral[owner].append(e.id)
    residual = {
        v: sol.target - sum((g.by_id[i].weight(v) for i in integral[v]), Fraction(0))
        for v in range(g.n_vertices)
    }
    H = WeightedGraph(g.n_vertices, tuple(fractional))
    h_vertices = {v for e in fractional for v in (e.u, e.v)}
    for v in sorted(h_vertices):
        weights = [e.weight(v) for e in H.incident[v]]
        rest = sum(weights, Fraction(0)) - max(weights)
        if rest < residual[v]:
            raise InvariantViolation(
                f"agent {v}: fractional items without the largest are worth {rest}, "
                f"below its residual {residual[v]}"
            )
    return ItemSplit(integral, [e.id for e in fractional], residual, H, h_vertices)


def _incident(g: WeightedGraph, edge_ids: Iterable[int]) -> Dict[int, Set[int]]:
    out: Dict[int, Set[int]] = {}
    for i in edge_ids:
        e = g.by_id[i]
        out.setdefault(e.u, set()).add(i)
        out.setdefault(e.v, set()).add(i)
    return out


def rank_edges(g: WeightedGraph, incident: Dict[int, Set[int]]) -> Dict[int, List[int]]:
    """Edges of every vertex, heaviest first and lowest id first on ties.
    The first two are e1 and e2."""
    return {v: sorted(ids, key=lambda i: (-g.by_id[i].weight(v), i)) for v, ids in incident.items()}


def cycle_problems(g: WeightedGraph, cycle: List[Arc], e1: Dict[int, int], e2: Dict[int, int]) -> List[str]:
    """Every vertex either loses no more than it gains, or gains its second
    heaviest edge and loses its heaviest"""
    problems = []
    if len({eid for _, eid, _ in cycle}) != len(cycle):
        problems.append("the cycle uses an edge twice")
    for k, (_, into, v) in enumerate(cycle):
        tail, out, _ = cycle[(k + 1) % len(cycle)]
        if tail != v:
            problems.append(f"the cycle breaks after vertex {v}")
            continue
        w_in, w_out = g.by_id[into].weight(v), g.by_id[out].weight(v)
        if w_in >= w_out:
            continue
        if not (out == e1[v] and into == e2.get(v)):
            problems.append(f"vertex {v} takes edge {into} ({w_in}) and gives edge {out} ({w_out})")
    return problems


def find_cycle(
    g: WeightedGraph,
    edge_ids: Optional[Iterable[int]] = None,
    start: Optional[int] = None,
    ranked: Optional[Dict[int, List[int]]] = None,
) -> List[Arc]:
    """Walks the heaviest edges until a vertex repeats, then returns the
    closed part of the walk reversed.

    At each vertex the walk leaves by e1 unless it arrived by e1, in which
    case it leaves by e2.

    Args:
        g (WeightedGraph): the graph
        edge_ids (Optional[Iterable[int]]): edges to walk on, every non-loop edge when omitted
        start (Optional[int]): first vertex, the lowest one with an edge when omitted
        ranked (Optional[Dict[int, List[int]]]): live edges of every vertex as rank_edges
            orders them; when given, edge_ids is ignored and every vertex the walk
            reaches must keep two edges

    Returns:
        List[Arc]: the cycle as (tail, edge, head) arcs, oriented towards the heads
    """
    if ranked is None:
        if edge_ids is None:
            edge_ids = [e.id for e in g.edges if not e.is_loop]
        ids = list(edge_ids)
        if any(g.by_id[i].is_loop for i in ids):
            raise PreconditionError("self-loops cannot be part of the cycle")
        incident = _incident(g, ids)
        if not incident:
            raise PreconditionError("there are no edges to walk on")
        for v, es in sorted(incident.items()):
            if len(es) < 2:
                raise PreconditionError(f"vertex {v} has degree {len(es)}")
        ranked = rank_edges(g, incident)
    if start is None:
        start = min((v for v, es in ranked.items() if es), default=None)
        if start is None:
            raise PreconditionError("there are no edges to walk on")
    if not ranked.get(start):
        raise PreconditionError(f"vertex {start} has no edge")

    v = start
    order, pos, used = [v], {v: 0}, []
    arrived: Optional[int] = None
    while True:
        es = ranked[v]
        if len(es) < 2:
            raise PreconditionError(f"vertex {v} has degree {len(es)}")
        out = es[1] if arrived == es[0] else es[0]
        u = g.by_id[out].other(v)
        used.append(out)
        if u in pos:
            break
        pos[u] = len(order)
        order.append(u)
        arrived, v = out, u

    r = pos[u]
    walk = order[r:] + [u]
    closed = used[r:]
    cycle = [(walk[k + 1], closed[k], walk[k]) for k in reversed(range(len(closed)))]
    e1 = {w: ranked[w][0] for w in walk}
    e2 = {w: ranked[w][1] for w in walk}
    problems = cycle_problems(g, cycle, e1, e2)
    if problems:
        raise InvariantViolation(f"walk from vertex {order[0]} gave a bad cycle: {problems[0]}")
    return cycle


def orient(g: WeightedGraph, logging: Optional[Logger] = None) -> Orientation:
    """Orientation where every vertex gets at least half of its incident
    weight without the heaviest edge.

    Self-loops point at their vertex. Then, repeatedly, an edge with a
    degree-1 end points away from it, and when no such end exists a cycle
    from find_cycle is oriented along itself and removed.

    The ranked edge lists are sorted once and only lose edges, so each
    removal touches the two ends of the edge and nothing else.
    """
    logging = logging or Logger.quiet()
    orientation: Orientation = {}
    for e in g.loops():
        orientation[e.id] = e.u
    ranked = rank_edges(g, _incident(g, [e.id for e in g.edges if not e.is_loop]))
    remaining = sum(len(es) for es in ranked.values()) // 2
    leaves = [v for v, es in ranked.items() if len(es) == 1]
    heapq.heapify(leaves)
    # vertices below `low` have no edge left
    by_vertex = sorted(ranked)
    low = 0
    cycles = 0

    def remove(eid: int) -> None:
        nonlocal remaining
        e = g.by_id[eid]
        for end in (e.u, e.v):
            ranked[end].remove(eid)
            if len(ranked[end]) == 1:
                heapq.heappush(leaves, end)
        remaining -= 1

    while remaining:
        if leaves:
            v = heapq.heappop(leaves)
            if len(ranked[v]) != 1:
                continue
            eid = ranked[v][0]
            orientation[eid] = g.by_id[eid].other(v)
            remove(eid)
            continue
        while not ranked[by_vertex[low]]:
            low += 1
        cycle = find_cycle(g, start=by_vertex[low], ranked=ranked)
        for _, eid, head in cycle:
            orientation[eid] = head
            remove(eid)
        cycles += 1

    problems = balance_violations(g, orientation)
    if problems:
        raise InvariantViolation(f"orientation is unbalanced: {problems[0]}")
    logging.log(LogLevel.Debug, f"oriented {len(g.edges)} edges with {cycles} cycles")
    return orientation


def brute_force_orientation(g: WeightedGraph, guard: int = 1 << 20) -> Tuple[Fraction, Orientation]:
    """Best minimum in-weight over every orientation"""
    free = [e for e in g.edges if not e.is_loop]
    if 2 ** len(free) > guard:
        raise GuardExceeded(f"{len(free)} edges give {2 ** len(free)} orientations, guard is {guard}")
    base = [Fraction(0)] * g.n_vertices
    fixed: Orientation = {}
    for e in g.loops():
        base[e.u] += e.w_u
        fixed[e.id] = e.u
    best_value: Optional[Fraction] = None
    best: Orientation = {}
    for heads in itertools.product(*[(e.u, e.v) for e in free]):
        loads = list(base)
        for e, head in zip(free, heads):
            loads[head] += e.weight(head)
        got = min(loads, default=Fraction(0))
        if best_value is None or got > best_value:
            best_value = got
            best = dict(fixed)
            best.update({e.id: head for e, head in zip(free, heads)})
    return best_value if best_value is not None else Fraction(0), best


def _subset_sums(g: WeightedGraph, upper: Fraction, cap: int) -> Optional[List[Fraction]]:
    found: Set[Fraction] = set()
    for v in range(g.n_vertices):
        sums = {Fraction(0)}
        for e in g.incident[v]:
            w = e.weight(v)
            sums |= {s + w for s in sums if s + w <= upper}
            if len(sums) + len(found) > cap:
                return None
        found |= sums
        if len(found) > cap:
            return None
    return sorted(s for s in found if s > 0)


def _grid(g: WeightedGraph, upper: Fraction, ratio: Fraction) -> List[Fraction]:
    """Points lo, ..., upper with consecutive ratio at most `ratio`, or
    consecutive multiples of the common denominator"""
    weights = [e.weight(v) for e in g.edges for v in {e.u, e.v} if e.weight(v) > 0]
    unit = Fraction(1, math.lcm(*[w.denominator for w in weights]))
    point = int(min(weights) / unit)
    top = int(upper / unit)
    out = []
    while point <= top:
        out.append(point * unit)
        point = max(point + 1, math.floor(point * ratio))
    return out


def _assign(g: WeightedGraph, split: ItemSplit, orientation: Orientation) -> Allocation:
    alloc = Allocation()
    for agent, items in split.integral.items():
        for i in items:
            alloc.assign(i, agent)
    for i in split.fractional:
        alloc.assign(i, orientation[i])
    return alloc


def solve_balance(
    inst: Instance,
    epsilon: Fraction,
    pricing_guard: int = 1_000_000,
    subset_sum_cap: int = 100_000,
    logging: Optional[Logger] = None,
) -> BalanceResult:
    """(2+epsilon)-approximation for 2-restricted instances.

    Binary search for the largest guess M whose configuration LP is
    feasible, over the achievable bundle values or, when there are too
    many, over a geometric grid. At that M the integral items stay with
    their agents and the fractional ones follow an orientation of H.

    Args:
        inst (Instance): a 2-restricted instance
        epsilon (Fraction): accuracy
        pricing_guard (int): largest pricing table per agent
        subset_sum_cap (int): most bundle values searched before the grid takes over
        logging (Optional[Logger]): progress sink

    Returns:
        BalanceResult: the allocation and its exact value
    """
    logging = logging or Logger.quiet()
    epsilon = Fraction(epsilon)
    if epsilon <= 0:
        raise PreconditionError("epsilon must be positive")
    g = to_graph(inst)
    upper = min(inst.total_utility(a) for a in range(inst.m))

    candidates = _subset_sums(g, upper, subset_sum_cap) if upper > 0 else []
    grid = None
    if candidates is None:
        # target factor 2/(2+eps/2) times a grid ratio (2+eps)/(2+eps/2) keeps 2+eps
        ratio = (2 + epsilon) / (2 + epsilon / 2)
        factor = 2 / (2 + epsilon / 2)
        candidates = _grid(g, upper, ratio)
        grid = f"geometric, ratio {ratio}"
        logging.log(LogLevel.Info, f"too many bundle values, searching {len(candidates)} grid points")
    else:
        factor = 2 / (2 + epsilon)
    lp_eps = 1 - factor

    probes: List[Tuple[Fraction, bool]] = []
    solutions: Dict[int, ConfigLPSolution] = {}

    def feasible(k: int) -> bool:
        sol = solve_config_lp(g, candidates[k], lp_eps, pricing_guard, logging=logging)
        probes.append((candidates[k], sol is not None))
        logging.log(LogLevel.Debug, f"probe M={candidates[k]}: {'feasible' if sol else 'infeasible'}")
        if sol is not None:
            solutions[k] = sol
        return sol is not None

    if not candidates or not feasible(0):
        alloc = Allocation()
        for e in g.edges:
            alloc.assign(e.id, e.u)
        got = value(inst, alloc)
        logging.log(LogLevel.Info, "no positive guess is feasible, the optimum is 0")
        return BalanceResult(got, alloc, Fraction(0), Fraction(0), {}, probes, grid)

    lo, hi = 0, len(candidates) - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if feasible(mid):
            lo = mid
        else:
            hi = mid - 1
    sol = solutions[lo]
    split = classify_items(g, sol)
    orientation = orient(split.H, logging)
    alloc = _assign(g, split, orientation)
    got = value(inst, alloc)
    if got < sol.target / 2:
        raise InvariantViolation(f"balanced allocation is worth {got}, below half of {sol.target}")
    logging.log(
        LogLevel.Info,
        f"balance: M={candidates[lo]}, LP target {sol.target}, value {got}, "
        f"{len(split.fractional)} fractional items, {len(probes)} probes",
    )
    return BalanceResult(got, alloc, candidates[lo], sol.target, orientation, probes, grid)
