#!/usr/bin/env python3

from collections import Counter
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from models.canonical import CanonicalInstance, PrivateAssignment
from models.layered import (
    LSOURCE,
    SOURCE_MARK,
    FractionalSolution,
    InfeasibilityCertificate,
    LightTuple,
    LNode,
    LPModel,
    PathDecomposition,
    hat_agent,
    hat_item,
    original,
)
from models.network import FlowNetwork
from models.paths import AGENT, AlmostFeasiblePaths, SimplePath, agent_node, item_node
from models.rounding import RoundedPaths, TerminalRouting
from tools.flow_network import build_network
from tools.layered_lp import TERM, build_layered_graph, build_lp, decompose_paths, solve_lp
from tools.maxflow import rescue_flow, vertex_load
from tools.tree_decomposition import assign_tree, bs_decompose
from utils.errors import InvariantViolation, PreconditionError, RetryExhausted
from utils.logger import LogLevel, Logger
from utils.rational import ceil_log2

# LP values this close to 0 or 1 are read as exact
SNAP = 1e-7
ROW_SLACK = Fraction(1, 1000)


def default_alpha(h: int, n: int) -> Fraction:
    """2 h^4 ceil(log2 n)"""
    return Fraction(2 * h**4 * max(1, ceil_log2(max(2, n))))


def congestion_bound(h: int, n: int) -> Fraction:
    """16 h^2 ceil(log2 n) (1 + 1/h)^h"""
    return 16 * h * h * max(1, ceil_log2(max(2, n))) * (1 + Fraction(1, h)) ** h


def _rational(value: float) -> Fraction:
    if value < SNAP:
        return Fraction(0)
    if value > 1 - SNAP:
        return Fraction(1)
    return Fraction(value).limit_denominator(1 << 20)


def route_to_terminals(
    model: LPModel,
    fsol: FractionalSolution,
    seed: int,
    logging: Optional[Logger] = None,
) -> TerminalRouting:
    """Rounds the terminal block into vertex-disjoint paths.

    The block flow is read as a fractional assignment of items to heavy
    agents and light agents (all copies of a light agent count as one), which
    the tree decomposition splits into trees. One light agent per tree is
    drawn with probability x_A/X; the other agents of the tree take the item
    above them, and the chains of handed-on private items starting at the
    drawn agents are the paths.

    Args:
        model (LPModel): the layered LP
        fsol (FractionalSolution): a point of it
        seed (int): seed of the draws
        logging (Optional[Logger]): receives the tree count

    Returns:
        TerminalRouting: the paths, the drawn agents and the decomposition
    """
    logging = logging or Logger.quiet()
    lg = model.lg
    ci = lg.ci
    P = lg.pa.P
    owner = lg.pa.owner_of
    flows = fsol.flows(TERM)

    copies: Dict[int, List[Tuple[int, float]]] = {}
    for t in model.tuples:
        if t.level == t.hp:
            copies.setdefault(t.last, []).append((t.hp, fsol.x(t.hp, t.last)))
    x: Dict[int, Fraction] = {}
    for a in sorted(ci.light):
        x[a] = _rational(sum(v for _, v in copies.get(a, [])))

    raw: Dict[Tuple[int, int], float] = {}
    for (u, v), f in flows.items():
        if u[0] == "Ihat" and v[0] == "Hhat":
            raw[(v[1], u[1])] = raw.get((v[1], u[1]), 0.0) + f
    for a in sorted(ci.heavy):
        if a in P:
            out = flows.get((hat_agent(a), hat_item(P[a])), 0.0)
            raw[(a, P[a])] = raw.get((a, P[a]), 0.0) + 1.0 - out
    y: Dict[Tuple[int, int], Fraction] = {}
    for edge, v in sorted(raw.items()):
        q = _rational(v)
        if q > 0:
            y[edge] = q
    for a in sorted(ci.light):
        if x[a] < 1:
            y[(a, ci.light[a].h)] = 1 - x[a]

    agents = sorted(set(ci.heavy) | set(ci.light))
    items = sorted({i for _, i in y})
    dec = bs_decompose(agents, items, x, y, tol=ROW_SLACK)

    rng = np.random.default_rng(seed)
    holder: Dict[int, int] = {i: a for a, i in dec.matched.items()}
    roots: Dict[int, int] = {}
    for tree in sorted(dec.trees, key=lambda t: min(t.agents)):
        candidates = [a for a in sorted(tree.agents) if dec.x.get(a, 0) > 0]
        if not candidates:
            raise InvariantViolation(f"tree over agents {sorted(tree.agents)} has no light agent")
        weights = np.array([float(dec.x[a]) for a in candidates])
        root = candidates[int(rng.choice(len(candidates), p=weights / weights.sum()))]
        for a, i in assign_tree(tree, root).items():
            holder[i] = a
        options = [(hp, v) for hp, v in sorted(copies.get(root, [])) if v > 0]
        if not options:
            raise InvariantViolation(f"light agent {root} carries x without any top copy")
        w = np.array([v for _, v in options])
        roots[root] = options[int(rng.choice(len(options), p=w / w.sum()))][0]

    p1: List[SimplePath] = []
    selected: Dict[int, int] = {}
    discarded: List[int] = []
    for root, hp in sorted(roots.items()):
        nodes = [agent_node(root)]
        item = P[root]
        seen = {root}
        done = False
        while True:
            nodes.append(item_node(item))
            b = holder.get(item)
            if b is None or b == owner.get(item) or b in seen:
                break
            nodes.append(agent_node(b))
            if b in lg.pa.T:
                done = True
                break
            seen.add(b)
            item = P[b]
        if done:
            p1.append(SimplePath(tuple(nodes)))
            selected[root] = hp
        else:
            discarded.append(root)

    ends = Counter(p.last[1] for p in p1)
    for t in lg.terminals:
        if ends[t] != 1:
            raise InvariantViolation(f"terminal {t} ends {ends[t]} routed paths")
    logging.log(
        LogLevel.Info,
        f"terminal routing: {len(dec.trees)} trees, {len(p1)} paths, {len(discarded)} chains dropped",
    )
    return TerminalRouting(p1, selected, dec, discarded)


def _children(model: LPModel) -> Dict[LightTuple, List[LightTuple]]:
    out: Dict[LightTuple, List[LightTuple]] = {}
    for t in model.tuples:
        if t.parent is not None:
            out.setdefault(t.parent, []).append(t)
    return {k: sorted(v) for k, v in out.items()}


def _as_path(nodes: Tuple[LNode, ...]) -> SimplePath:
    return SimplePath(tuple(original(v) for v in nodes if v != LSOURCE))


def _draw(
    model: LPModel,
    fsol: FractionalSolution,
    decomposition: PathDecomposition,
    tops: List[LightTuple],
    children: Dict[LightTuple, List[LightTuple]],
    rng: np.random.Generator,
) -> Tuple[List[SimplePath], Dict[LightTuple, int]]:
    chosen: List[SimplePath] = []
    counts: Dict[LightTuple, int] = {}
    stack = list(reversed(tops))
    while stack:
        lam = stack.pop()
        y_lam = fsol.y(lam)
        got = 0
        if y_lam > 0 and lam.level == 1:
            for nodes, f in decomposition.paths.get(lam.extend(SOURCE_MARK), []):
                if rng.random() < min(1.0, f / y_lam):
                    chosen.append(_as_path(nodes))
                    got += 1
        elif y_lam > 0:
            for child in children.get(lam, []):
                y_child = fsol.y(child)
                if y_child <= 0 or rng.random() >= min(1.0, y_child / y_lam):
                    continue
                paths = decomposition.paths.get(child, [])
                total = sum(f for _, f in paths)
                if total <= 0:
                    continue
                u = rng.random() * total
                for nodes, f in paths:
                    u -= f
                    if u < 0:
                        break
                chosen.append(_as_path(nodes))
                got += 1
                stack.append(child)
        counts[lam] = got
    return chosen, counts


def randomized_round(
    model: LPModel,
    selected: Dict[int, int],
    fsol: FractionalSolution,
    decomposition: PathDecomposition,
    seed: int,
    retry_cap: int = 32,
    max_congestion: Optional[Fraction] = None,
    logging: Optional[Logger] = None,
) -> RoundedPaths:
    """Samples the light-agent paths below the selected top copies.

    A selected tuple at level j >= 2 keeps each child with probability
    y(child)/y(tuple) and then one of the child's paths with probability
    proportional to its flow; at level 1 every path from s is kept on its
    own with probability f(p)/y(tuple). Copies of one light agent project
    to the same original path, which is kept once. A draw is accepted when
    every selected tuple keeps at least N/2 children, every receiver ends N/2
    distinct paths and no vertex is a first or intermediate vertex of more
    than max_congestion paths; otherwise the next seed is tried.

    Raises:
        RetryExhausted: when retry_cap seeds in a row are rejected
    """
    logging = logging or Logger.quiet()
    ci = model.lg.ci
    if max_congestion is None:
        max_congestion = congestion_bound(model.lg.h, len(ci.agents))
    children = _children(model)
    tops = [LightTuple(hp, (a,)) for a, hp in sorted(selected.items())]
    last_reason = "no attempt"
    for k in range(max(1, retry_cap)):
        rng = np.random.default_rng(seed + k)
        chosen, counts = _draw(model, fsol, decomposition, tops, children, rng)
        chosen = list(dict.fromkeys(chosen))
        short = [t for t, c in counts.items() if 2 * c < ci.light[t.last].N]
        incoming = Counter(p.last[1] for p in chosen)
        starved = sorted(
            a for a in {t.last for t in counts} if 2 * incoming[a] < ci.light[a].N
        )
        load = vertex_load(chosen)
        congestion = max(load.values(), default=0)
        if short:
            last_reason = f"tuple {short[0].label()} kept {counts[short[0]]} children"
        elif starved:
            last_reason = f"light agent {starved[0]} ends {incoming[starved[0]]} distinct paths"
        elif congestion > max_congestion:
            last_reason = f"congestion {congestion} above {max_congestion}"
        else:
            receivers = Counter(t.last for t in counts)
            logging.log(
                LogLevel.Debug,
                f"rounding accepted with seed {seed + k}: {len(chosen)} paths, congestion {congestion}",
            )
            return RoundedPaths(chosen, dict(receivers), counts, congestion, seed + k, k + 1)
        logging.log(LogLevel.Debug, f"rounding seed {seed + k} rejected: {last_reason}")
    raise RetryExhausted(f"rounding rejected {retry_cap} seeds from {seed}; last: {last_reason}")


def almost_feasible_problems(
    net: FlowNetwork, p1: List[SimplePath], p2: List[SimplePath], alpha: Fraction
) -> List[str]:
    """Exact check of the two path families.

    p1 is vertex-disjoint and ends once at every terminal, p2 is disjoint on
    first and intermediate vertices, a light agent starts at most one path of
    each family, and every light agent starting a path has floor(N/alpha)
    paths of p2 ending at it.
    """
    problems: List[str] = []
    alpha = Fraction(alpha)

    def shape(k: int, p: SimplePath, family: str) -> None:
        for u, v in p.edges():
            if not net.graph.has_edge(u, v):
                problems.append(f"{family} path {k} uses missing edge {u} -> {v}")
        for v in p.interior:
            if net.is_light(v):
                problems.append(f"{family} path {k} passes through light agent {v[1]}")
        if len(set(p.nodes)) != len(p.nodes):
            problems.append(f"{family} path {k} repeats a vertex")

    seen: Dict = {}
    for k, p in enumerate(p1):
        shape(k, p, "P1")
        if not net.is_light(p.first):
            problems.append(f"P1 path {k} starts at {p.first}, not a light agent")
        if not net.is_terminal(p.last):
            problems.append(f"P1 path {k} ends at {p.last}, not a terminal")
        for v in p.nodes:
            if v in seen:
                problems.append(f"vertex {v} is on P1 paths {seen[v]} and {k}")
            seen[v] = k
    ends = Counter(p.last for p in p1)
    for t in sorted(net.pa.T):
        if ends[agent_node(t)] != 1:
            problems.append(f"terminal {t} ends {ends[agent_node(t)]} P1 paths")

    for k, p in enumerate(p2):
        shape(k, p, "P2")
        if not (p.from_source() and p.first[1] in net.S) and not net.is_light(p.first):
            problems.append(f"P2 path {k} starts at {p.first}")
        if not net.is_light(p.last):
            problems.append(f"P2 path {k} ends at {p.last}, not a light agent")
    for v, c in sorted(vertex_load(p2).items()):
        if c > 1:
            problems.append(f"vertex {v} starts or crosses {c} P2 paths")

    starts1 = Counter(p.first for p in p1)
    starts2 = Counter(p.first for p in p2 if p.first[0] == AGENT)
    for family, starts in (("P1", starts1), ("P2", starts2)):
        for v, c in sorted(starts.items()):
            if c > 1:
                problems.append(f"light agent {v[1]} starts {c} {family} paths")
    incoming = Counter(p.last for p in p2)
    for v in sorted(set(starts1) | set(starts2)):
        if not net.is_light(v):
            continue
        need = int(Fraction(net.ci.light[v[1]].N) / alpha)
        if incoming[v] < need:
            problems.append(f"light agent {v[1]} gets {incoming[v]} P2 paths, needs {need}")
    return problems


def almost_feasible(
    ci: CanonicalInstance,
    pa: PrivateAssignment,
    h: int,
    seed: int,
    alpha: Optional[Fraction] = None,
    retry_cap: int = 32,
    guard: int = 2_000_000,
    tol: float = 1e-9,
    logging: Optional[Logger] = None,
    on_model: Optional[Callable[[LPModel], None]] = None,
) -> Union[AlmostFeasiblePaths, InfeasibilityCertificate]:
    """Two path families that nearly form a solution, or why none exists.

    Solves the layered LP, routes the terminals, rounds the light-agent
    flow and rescues it with congestion beta = alpha/2.

    Args:
        ci (CanonicalInstance): the instance of this iteration
        pa (PrivateAssignment): its private items
        h (int): number of layers
        seed (int): first seed of the random draws
        alpha (Optional[Fraction]): quota denominator, at least 2; 2 h^4 ceil(log2 n) when omitted
        retry_cap (int): seeds tried by the rounding
        guard (int): LP size guard
        tol (float): LP tolerance
        logging (Optional[Logger]): progress sink
        on_model (Optional[Callable[[LPModel], None]]): sees every LP before it is solved

    Returns:
        Union[AlmostFeasiblePaths, InfeasibilityCertificate]: the families, checked exactly
    """
    logging = logging or Logger.quiet()
    alpha = Fraction(alpha) if alpha is not None else default_alpha(h, len(ci.agents))
    if alpha < 2:
        raise PreconditionError(f"alpha must be at least 2, got {alpha}")
    if not pa.T:
        return AlmostFeasiblePaths([], [], alpha)
    net = build_network(ci, pa)
    lg = build_layered_graph(ci, pa, h)
    model = build_lp(lg, guard, logging)
    if on_model is not None:
        on_model(model)
    fsol = solve_lp(model, tol, logging)
    if isinstance(fsol, InfeasibilityCertificate):
        return fsol
    decomposition = decompose_paths(fsol, tol)
    routing = route_to_terminals(model, fsol, seed, logging)
    beta = alpha / 2
    bound = min(congestion_bound(h, len(ci.agents)), beta)
    rounded = randomized_round(
        model, routing.selected, fsol, decomposition, seed, retry_cap, bound, logging
    )
    p2 = rescue_flow(ci, pa.P, rounded.paths, rounded.receiver_agents(), beta, logging)
    problems = almost_feasible_problems(net, routing.p1, p2, alpha)
    if problems:
        raise InvariantViolation(f"almost-feasible paths break a property: {problems[0]}")
    logging.log(
        LogLevel.Info,
        f"almost feasible: {len(routing.p1)} terminal paths, {len(p2)} light paths, "
        f"congestion {rounded.congestion}, seed {rounded.seed_used}",
    )
    return AlmostFeasiblePaths(
        routing.p1,
        p2,
        alpha,
        frozenset(routing.selected),
        rounded.congestion,
        rounded.seed_used,
    )
