#!/usr/bin/env python3

from fractions import Fraction
from typing import Dict, IO, List, Optional, Set, Tuple, Union

import networkx as nx
import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from models.canonical import CanonicalInstance, PrivateAssignment
from models.layered import (
    LSOURCE,
    SOURCE_MARK,
    Commodity,
    FractionalSolution,
    InfeasibilityCertificate,
    LayeredGraph,
    LightTuple,
    LNode,
    LPModel,
    PathDecomposition,
    hat_agent,
    hat_item,
    heavy_copy,
    item_copy,
    light_copy,
    node_label,
)
from models.paths import AGENT, ITEM, Node, SolutionForest, agent_node
from tools.flow_network import build_network, tree_heights
from utils.errors import GuardExceeded, InvariantViolation, NumericalFailure, PreconditionError
from utils.logger import LogLevel, Logger

TERM = "term"


def build_layered_graph(
    ci: CanonicalInstance, pa: PrivateAssignment, h: int
) -> LayeredGraph:
    """Builds N_h(I,P).

    Args:
        ci (CanonicalInstance): the instance
        pa (PrivateAssignment): a good private assignment for ci
        h (int): number of subgraphs, G_hp has hp layers of light agents

    Returns:
        LayeredGraph: level graphs of every G_hp and the terminal block
    """
    if h < 1:
        raise PreconditionError("the number of layers must be at least 1")
    net = build_network(ci, pa)
    reach_items, reach_heavy = net.direct_reach
    S = net.S
    P = pa.P

    levels: Dict[Tuple[int, int], nx.DiGraph] = {}
    for hp in range(1, h + 1):
        for j in range(1, hp + 1):
            g = nx.DiGraph()
            if j == 1:
                for i in sorted(S & reach_items):
                    g.add_edge(LSOURCE, item_copy(hp, 1, i))
                for a in sorted(reach_heavy):
                    g.add_edge(heavy_copy(hp, 1, a), item_copy(hp, 1, P[a]))
                    for i in sorted(ci.heavy[a]):
                        if i != P[a] and i in reach_items:
                            g.add_edge(item_copy(hp, 1, i), heavy_copy(hp, 1, a))
                for a, la in sorted(ci.light.items()):
                    for i in sorted(la.S & reach_items):
                        g.add_edge(item_copy(hp, 1, i), light_copy(hp, 1, a))
            else:
                for a, gamma in sorted(ci.heavy.items()):
                    if a not in P:
                        continue
                    g.add_edge(heavy_copy(hp, j, a), item_copy(hp, j, P[a]))
                    for i in sorted(gamma):
                        if i != P[a] and i not in S:
                            g.add_edge(item_copy(hp, j, i), heavy_copy(hp, j, a))
                for a, la in sorted(ci.light.items()):
                    if a in P:
                        g.add_edge(light_copy(hp, j - 1, a), item_copy(hp, j, P[a]))
                    for i in sorted(la.S - S):
                        g.add_edge(item_copy(hp, j, i), light_copy(hp, j, a))
            levels[(hp, j)] = g

    block = nx.DiGraph()
    for a, gamma in sorted(ci.heavy.items()):
        block.add_node(hat_agent(a))
        if a in P:
            block.add_edge(hat_agent(a), hat_item(P[a]))
        for i in sorted(gamma):
            if i != P.get(a) and i not in S:
                block.add_edge(hat_item(i), hat_agent(a))
    for a in sorted(ci.light):
        if a in P:
            for hp in range(1, h + 1):
                block.add_edge(light_copy(hp, hp, a), hat_item(P[a]))
    return LayeredGraph(ci, pa, h, S, levels, block)


class _Reach:
    """Memoized reachability inside the level graphs"""

    def __init__(self, lg: LayeredGraph) -> None:
        self.lg = lg
        self._down: Dict[Tuple[int, int, LNode], Set[LNode]] = {}
        self._up: Dict[Tuple[int, int, LNode], Set[LNode]] = {}

    def down(self, hp: int, j: int, src: LNode) -> Set[LNode]:
        key = (hp, j, src)
        if key not in self._down:
            g = self.lg.levels[(hp, j)]
            self._down[key] = (nx.descendants(g, src) | {src}) if src in g else set()
        return self._down[key]

    def up(self, hp: int, j: int, sink: LNode) -> Set[LNode]:
        key = (hp, j, sink)
        if key not in self._up:
            g = self.lg.levels[(hp, j)]
            self._up[key] = (nx.ancestors(g, sink) | {sink}) if sink in g else set()
        return self._up[key]

    def feeders(self, hp: int, j: int, agent: int) -> List[int]:
        """other light agents whose layer j-1 copy reaches the layer j copy of agent"""
        sink = light_copy(hp, j, agent)
        above = self.up(hp, j, sink)
        # a copy feeding its own agent maps back to a cycle of N(I,P)
        return sorted(
            b for b in self.lg.ci.light if b != agent and light_copy(hp, j - 1, b) in above
        )


def enumerate_tuples(lg: LayeredGraph, guard: int) -> Dict[LightTuple, List[LightTuple]]:
    """Every tuple that can carry flow, mapped to its live children.

    A tuple of layer 1 lives when s reaches its agent; one of layer j >= 2
    lives when at least N of its extensions live, since each of them is
    capped by the tuple itself. Tuples at the top also need a route to some
    terminal.
    """
    reach = _Reach(lg)
    ci = lg.ci
    co_terminal: Set[LNode] = set()
    for t in lg.terminals:
        node = hat_agent(t)
        if node in lg.block:
            co_terminal |= nx.ancestors(lg.block, node)

    memo: Dict[LightTuple, bool] = {}
    children: Dict[LightTuple, List[LightTuple]] = {}

    def alive(t: LightTuple) -> bool:
        if t in memo:
            return memo[t]
        if len(memo) > guard:
            raise GuardExceeded(
                f"more than {guard} light-agent tuples for h={lg.h}; lower h or the number of light agents"
            )
        j = t.level
        if j == 0:
            memo[t] = True
            return True
        if j == 1:
            ok = light_copy(t.hp, 1, t.last) in reach.down(t.hp, 1, LSOURCE)
            kids = [t.extend(SOURCE_MARK)] if ok else []
        else:
            kids = [t.extend(b) for b in reach.feeders(t.hp, j, t.last)]
            kids = [k for k in kids if alive(k)]
            ok = len(kids) >= ci.light[t.last].N
        memo[t] = ok
        if ok:
            children[t] = kids
            for k in kids:
                memo[k] = True
        return ok

    out: Dict[LightTuple, List[LightTuple]] = {}
    for hp in range(1, lg.h + 1):
        for a in lg.light_agents:
            if light_copy(hp, hp, a) not in co_terminal:
                continue
            top = LightTuple(hp, (a,))
            if not alive(top):
                continue
            stack = [top]
            while stack:
                t = stack.pop()
                if t in out:
                    continue
                out[t] = children.get(t, [])
                stack.extend(out[t])
    return out


def _commodity_edges(g: nx.DiGraph, down: Set[LNode], up: Set[LNode]) -> Tuple[Tuple[LNode, LNode], ...]:
    return tuple(sorted((u, v) for u, v in g.edges if u in down and v in up))


def build_lp(
    lg: LayeredGraph,
    guard: int = 2_000_000,
    logging: Optional[Logger] = None,
) -> LPModel:
    """Assembles the layered feasibility LP in per-edge form.

    Row families: term, xout, cons and cap on the terminal block; xa, yprop,
    pcap and lcap on the tuple amounts; route, flow, cap and mlcap on the
    routing inside each level. Multi-level item capacities cover every
    level k <= j, so for h = 1 they are the per-type capacities of the
    one-layer LP.

    Args:
        lg (LayeredGraph): the graph
        guard (int): largest number of nonzeros allowed
        logging (Optional[Logger]): receives size reports

    Returns:
        LPModel: columns, rows and commodities
    """
    logging = logging or Logger.quiet()
    ci = lg.ci
    tree = enumerate_tuples(lg, guard)
    tuples = sorted(tree)
    reach = _Reach(lg)
    model = LPModel(lg)
    model.tuples = tuples

    tops = [t for t in tuples if t.level == t.hp]
    for t in tops:
        model.column(("x", t.hp, t.last))
    for t in tuples:
        model.column(("y", t))

    # terminal commodity
    co_terminal: Set[LNode] = set()
    for t in lg.terminals:
        node = hat_agent(t)
        if node in lg.block:
            co_terminal |= nx.ancestors(lg.block, node) | {node}
    top_nodes = [light_copy(t.hp, t.hp, t.last) for t in tops]
    down_block: Set[LNode] = set()
    for node in top_nodes:
        down_block |= nx.descendants(lg.block, node) | {node}
    term_edges = _commodity_edges(lg.block, down_block, co_terminal)
    model.commodities[TERM] = Commodity(
        TERM,
        tuple(top_nodes),
        tuple(hat_agent(t) for t in lg.terminals),
        term_edges,
    )

    for t in tuples:
        if t.level >= t.hp:
            continue
        j = t.level + 1
        src = t.node()
        sink = light_copy(t.hp, j, t.at(j))
        edges = _commodity_edges(
            lg.levels[(t.hp, j)], reach.down(t.hp, j, src), reach.up(t.hp, j, sink)
        )
        model.commodities[t] = Commodity(t, (src,), (sink,), edges, model.index[("y", t)])

    estimate = 3 * len(term_edges) + sum(
        len(c.edges) * (3 + c.key.hp) for k, c in model.commodities.items() if k != TERM
    )
    if estimate > guard:
        raise GuardExceeded(
            f"layered LP needs about {estimate} nonzeros, guard is {guard}; "
            f"lower h (now {lg.h}) or the number of light agents ({len(ci.light)})"
        )

    for key, c in model.commodities.items():
        for u, v in c.edges:
            model.column(("f", key, u, v))

    _terminal_rows(model, lg, tops)
    _tuple_rows(model, tree, tuples)
    _routing_rows(model, tree, tuples)

    if model.nonzeros > guard:
        raise GuardExceeded(
            f"layered LP has {model.nonzeros} nonzeros, guard is {guard}; lower h (now {lg.h})"
        )
    logging.log(
        LogLevel.Info,
        f"layered LP: h={lg.h}, {len(tuples)} tuples, {len(model.columns)} columns, "
        f"{len(model.rows)} rows, {model.nonzeros} nonzeros",
    )
    return model


def _flow_col(model: LPModel, key, u: LNode, v: LNode) -> int:
    return model.index[("f", key, u, v)]


def _terminal_rows(model: LPModel, lg: LayeredGraph, tops: List[LightTuple]) -> None:
    c = model.commodities[TERM]
    inflow: Dict[LNode, List[int]] = {}
    outflow: Dict[LNode, List[int]] = {}
    for u, v in c.edges:
        col = _flow_col(model, TERM, u, v)
        outflow.setdefault(u, []).append(col)
        inflow.setdefault(v, []).append(col)

    for t in lg.terminals:
        node = hat_agent(t)
        model.add_row(f"term_{t}", "term", {col: 1 for col in inflow.get(node, [])}, "=", 1)
    for t in tops:
        node = light_copy(t.hp, t.hp, t.last)
        terms = {col: 1 for col in outflow.get(node, [])}
        terms[model.index[("x", t.hp, t.last)]] = -1
        model.add_row(f"xout_{t.hp}_{t.last}", "xout", terms, "=", 0)

    sinks = set(c.sinks)
    sources = set(c.sources)
    for node in sorted(set(inflow) | set(outflow)):
        if node in sinks or node in sources:
            continue
        terms: Dict[int, int] = {}
        for col in inflow.get(node, []):
            terms[col] = terms.get(col, 0) + 1
        for col in outflow.get(node, []):
            terms[col] = terms.get(col, 0) - 1
        model.add_row(f"cons_{node_label(node)}", "cons", terms, "=", 0)
        if node[0] == "Ihat":
            model.add_row(
                f"cap_{node_label(node)}", "cap", {col: 1 for col in inflow.get(node, [])}, "<=", 1
            )


def _tuple_rows(
    model: LPModel, tree: Dict[LightTuple, List[LightTuple]], tuples: List[LightTuple]
) -> None:
    ci = model.lg.ci
    ycol = {t: model.index[("y", t)] for t in tuples}

    for t in tuples:
        if t.level == t.hp:
            model.add_row(
                f"xa_{t.hp}_{t.last}",
                "xa",
                {ycol[t]: 1, model.index[("x", t.hp, t.last)]: -1},
                "=",
                0,
            )

    for t in tuples:
        if t.level < 1:
            continue
        terms = {ycol[k]: 1 for k in tree[t]}
        terms[ycol[t]] = terms.get(ycol[t], 0) - ci.light[t.last].N
        model.add_row(f"yprop_{t.label()}", "yprop", terms, "=", 0)

    for t in tuples:
        if t.level < 2:
            continue
        by_level: Dict[Tuple[int, int], List[LightTuple]] = {}
        stack = list(tree[t])
        while stack:
            d = stack.pop()
            if d.level >= 1:
                by_level.setdefault((d.level, d.last), []).append(d)
                stack.extend(tree.get(d, []))
        for (k, a), group in sorted(by_level.items()):
            terms = {ycol[d]: 1 for d in group}
            terms[ycol[t]] = terms.get(ycol[t], 0) - 1
            model.add_row(f"pcap_{t.label()}_{k}_{a}", "pcap", terms, "<=", 0)

    ending: Dict[Tuple[int, int, int], List[int]] = {}
    for t in tuples:
        if t.level >= 1:
            ending.setdefault((t.hp, t.level, t.last), []).append(ycol[t])
    for (hp, j, a), cols in sorted(ending.items()):
        model.add_row(f"lcap_{hp}_{j}_{a}", "lcap", {col: 1 for col in cols}, "<=", 1)


def _routing_rows(
    model: LPModel, tree: Dict[LightTuple, List[LightTuple]], tuples: List[LightTuple]
) -> None:
    # item copy -> flow columns entering it, per commodity
    item_inflow: Dict[LNode, Dict[LightTuple, List[int]]] = {}
    entering: Dict[LightTuple, List[Tuple[LNode, List[int]]]] = {}
    for key, c in model.commodities.items():
        if key == TERM:
            continue
        inflow: Dict[LNode, List[int]] = {}
        outflow: Dict[LNode, List[int]] = {}
        for u, v in c.edges:
            col = _flow_col(model, key, u, v)
            outflow.setdefault(u, []).append(col)
            inflow.setdefault(v, []).append(col)
        sink = c.sinks[0]
        terms = {col: 1 for col in inflow.get(sink, [])}
        terms[c.demand] = terms.get(c.demand, 0) - 1
        model.add_row(f"route_{key.label()}", "route", terms, "=", 0)
        for node in sorted(set(inflow) | set(outflow)):
            if node == sink or node == c.sources[0]:
                continue
            terms = {}
            for col in inflow.get(node, []):
                terms[col] = terms.get(col, 0) + 1
            for col in outflow.get(node, []):
                terms[col] = terms.get(col, 0) - 1
            model.add_row(f"flow_{key.label()}_{node_label(node)}", "flow", terms, "=", 0)
            if node[0] == "I":
                item_inflow.setdefault(node, {})[key] = inflow.get(node, [])
                entering.setdefault(key, []).append((node, inflow.get(node, [])))

    for node in sorted(item_inflow):
        terms = {col: 1 for cols in item_inflow[node].values() for col in cols}
        model.add_row(f"cap_{node_label(node)}", "cap", terms, "<=", 1)

    for t in tuples:
        if t.level < 1:
            continue
        ycol = model.index[("y", t)]
        # commodities below t grouped by the item copies they enter
        rows: Dict[LNode, Dict[int, int]] = {}
        stack = list(tree[t])
        while stack:
            d = stack.pop()
            for node, cols in entering.get(d, []):
                for col in cols:
                    rows.setdefault(node, {})[col] = 1
            stack.extend(tree.get(d, []))
        for node, terms in sorted(rows.items()):
            terms = dict(terms)
            terms[ycol] = -1
            model.add_row(f"mlcap_{t.label()}_{node_label(node)}", "mlcap", terms, "<=", 0)


def _upper(model: LPModel) -> np.ndarray:
    """1 for every column except the level-0 amounts, which carry N_A units"""
    ci = model.lg.ci
    upper = np.ones(len(model.columns))
    for col, key in enumerate(model.columns):
        if key[0] == "y" and key[1].level == 0:
            upper[col] = ci.light[key[1].agents[-2]].N
    return upper


def _assemble(model: LPModel, relax: bool = False):
    """Sparse equality and inequality blocks; with relax, slack columns are
    appended: two per equality, one per inequality."""
    n = len(model.columns)
    eq = [r for r in model.rows if r.sense == "="]
    ub = [r for r in model.rows if r.sense == "<="]
    n_eq, n_ub = len(eq), len(ub)
    width = n + (2 * n_eq + n_ub if relax else 0)

    def block(rows, slack_base, signs):
        data, ri, ci = [], [], []
        for k, r in enumerate(rows):
            for col, v in r.terms:
                data.append(float(v))
                ri.append(k)
                ci.append(col)
            if relax:
                for offset, sign in signs:
                    data.append(sign)
                    ri.append(k)
                    ci.append(slack_base + offset * len(rows) + k)
        return sp.csr_matrix((data, (ri, ci)), shape=(len(rows), width))

    A_eq = block(eq, n, [(0, 1.0), (1, -1.0)]) if n_eq else None
    A_ub = block(ub, n + 2 * n_eq, [(0, -1.0)]) if n_ub else None
    b_eq = np.array([float(r.rhs) for r in eq]) if n_eq else None
    b_ub = np.array([float(r.rhs) for r in ub]) if n_ub else None
    return A_eq, b_eq, A_ub, b_ub, eq, ub, width


def solve_lp(
    model: LPModel,
    tol: float = 1e-9,
    logging: Optional[Logger] = None,
) -> Union[FractionalSolution, InfeasibilityCertificate]:
    """Finds any point of the layered LP with HiGHS.

    Returns:
        Union[FractionalSolution, InfeasibilityCertificate]: a point within tol, or
        the least violation of a slack-relaxed copy and its row duals
    """
    logging = logging or Logger.quiet()
    n = len(model.columns)
    if n == 0:
        broken = model.violations([], tol)
        if broken:
            return InfeasibilityCertificate(
                "no columns", float(sum(float(e) for _, e in broken)), {name: 1.0 for name, _ in broken}
            )
        return FractionalSolution(model, np.zeros(0))

    A_eq, b_eq, A_ub, b_ub, _, _, _ = _assemble(model)
    options = {
        "primal_feasibility_tolerance": max(tol, 1e-10),
        "dual_feasibility_tolerance": max(tol, 1e-10),
    }
    upper = _upper(model)
    res = linprog(
        np.zeros(n),
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=[(0.0, float(u)) for u in upper],
        method="highs",
        options=options,
    )
    logging.log(LogLevel.Debug, f"HiGHS status {res.status}: {res.message}")
    if res.status == 0:
        values = np.clip(res.x, 0.0, upper)
        broken = model.violations(values, 0.0)
        residual = max((float(e) for _, e in broken), default=0.0)
        if residual > max(1e-6, 1e3 * tol):
            raise NumericalFailure(f"LP point breaks row {broken[0][0]} by {residual:.3g}")
        return FractionalSolution(model, values, residual)
    if res.status == 2:
        cert = _certificate(model, tol, options)
        logging.log(LogLevel.Info, f"layered LP infeasible, least violation {cert.violation:.6g}")
        return cert
    raise NumericalFailure(f"LP solver stopped with status {res.status}: {res.message}")


def _certificate(model: LPModel, tol: float, options: dict) -> InfeasibilityCertificate:
    A_eq, b_eq, A_ub, b_ub, eq, ub, width = _assemble(model, relax=True)
    n = len(model.columns)
    c = np.concatenate([np.zeros(n), np.ones(width - n)])
    bounds = [(0.0, float(u)) for u in _upper(model)] + [(0, None)] * (width - n)
    res = linprog(
        c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs", options=options
    )
    if res.status != 0:
        raise NumericalFailure(f"relaxed LP failed with status {res.status}: {res.message}")
    if res.fun <= max(1e-7, 100 * tol):
        raise NumericalFailure(
            f"solver reported infeasibility but the relaxed LP closes to {res.fun:.3g}"
        )
    duals: Dict[str, float] = {}
    if eq:
        for r, d in zip(eq, res.eqlin.marginals):
            if abs(d) > 1e-9:
                duals[r.name] = float(d)
    if ub:
        for r, d in zip(ub, res.ineqlin.marginals):
            if abs(d) > 1e-9:
                duals[r.name] = float(d)
    return InfeasibilityCertificate("infeasible", float(res.fun), duals)


def _decompose(
    flows: Dict[Tuple[LNode, LNode], float],
    sources: List[LNode],
    sinks: Set[LNode],
    tol: float,
    key,
) -> Tuple[List[Tuple[Tuple[LNode, ...], float]], List[Tuple[Tuple[LNode, ...], float]]]:
    noise = max(10 * tol, 1e-7)
    out: Dict[LNode, Dict[LNode, float]] = {}
    for (u, v), f in flows.items():
        if f > tol:
            out.setdefault(u, {})[v] = f
    paths: List[Tuple[Tuple[LNode, ...], float]] = []
    cycles: List[Tuple[Tuple[LNode, ...], float]] = []

    def take(walk: List[LNode], amount: float) -> None:
        for u, v in zip(walk, walk[1:]):
            left = out[u][v] - amount
            if left <= tol:
                del out[u][v]
            else:
                out[u][v] = left

    def bottleneck(walk: List[LNode]) -> float:
        return min(out[u][v] for u, v in zip(walk, walk[1:]))

    def walk_from(start: LNode, to_sink: bool) -> None:
        """Follows flow from start; records a path on reaching a sink, or
        the first cycle closed on the way when to_sink is False"""
        walk = [start]
        pos = {start: 0}
        while not (to_sink and walk[-1] in sinks):
            nxt = out.get(walk[-1])
            if not nxt:
                if len(walk) > 1 and bottleneck(walk) <= noise:
                    take(walk, bottleneck(walk))
                    return
                raise InvariantViolation(f"flow of {key} is not conserved at {walk[-1]}")
            v = min(nxt)
            if v in pos:
                loop = walk[pos[v]:] + [v]
                amount = bottleneck(loop)
                take(loop, amount)
                cycles.append((tuple(loop), amount))
                if not to_sink:
                    return
                for w in walk[pos[v] + 1:]:
                    del pos[w]
                walk = walk[: pos[v] + 1]
                continue
            pos[v] = len(walk)
            walk.append(v)
        amount = bottleneck(walk)
        take(walk, amount)
        paths.append((tuple(walk), amount))

    for src in sources:
        while out.get(src):
            walk_from(src, True)
    while True:
        start = next((u for u in sorted(out) if out[u]), None)
        if start is None:
            break
        walk_from(start, False)
    return paths, cycles


def decompose_paths(solution: FractionalSolution, tol: float = 1e-9) -> PathDecomposition:
    """Splits every commodity's edge flow into source-to-sink paths plus
    the circulations left over; paths come out lowest copy first."""
    paths = {}
    cycles = {}
    for key, c in solution.model.commodities.items():
        flows = solution.flows(key, tol)
        p, cyc = _decompose(flows, list(c.sources), set(c.sinks), tol, key)
        paths[key] = p
        cycles[key] = cyc
    return PathDecomposition(paths, cycles)


def dump_lp(model: LPModel, stream: IO[str]) -> None:
    """Writes the model in CPLEX LP text format with a zero objective"""
    names = [model.column_name(k) for k in range(len(model.columns))]
    stream.write("\\ layered max-min allocation feasibility LP\n")
    stream.write("Minimize\n")
    stream.write(f" obj: 0 {names[0]}\n" if names else " obj:\n")
    stream.write("Subject To\n")
    for r in model.rows:
        parts = [f"{'+' if v > 0 else '-'} {abs(v)} {names[c]}" for c, v in r.terms]
        if not parts:
            parts = [f"+ 0 {names[0]}"] if names else ["0"]
        lines = [" ".join(parts[k: k + 8]) for k in range(0, len(parts), 8)]
        op = "=" if r.sense == "=" else "<="
        stream.write(f" {r.name}: " + "\n   ".join(lines) + f" {op} {r.rhs}\n")
    stream.write("Bounds\n")
    for name, upper in zip(names, _upper(model)):
        stream.write(f" 0 <= {name} <= {int(upper)}\n")
    stream.write("End\n")


def inject_forest(
    model: LPModel, forest: SolutionForest, level: Dict[int, int]
) -> List[Fraction]:
    """The 0/1 point of an h-layered integral solution.

    Every tree of height hp is laid into G_hp; a light agent keeps exactly N
    of its children, the rest of its subtrees carry no flow. Layer-1 agents
    take N units of their s-tuple.

    Returns:
        List[Fraction]: one exact value per column
    """
    lg = model.lg
    ci = lg.ci
    values = [Fraction(0)] * len(model.columns)
    children = forest.children()
    heights = tree_heights(ci, forest, level)

    def put(key, amount: int = 1) -> None:
        if key not in model.index:
            raise InvariantViolation(f"column {key} is missing from the model")
        values[model.index[key]] += amount

    def chain_down(node: Node) -> List[Node]:
        """node, then the first child repeatedly, until a light agent or a leaf"""
        out = [node]
        cur = node
        while True:
            if cur[0] == AGENT and ci.is_light(cur[1]) and len(out) > 1:
                return out
            below = children.get(cur, [])
            if not below:
                return out
            cur = below[0]
            out.append(cur)

    def copy_of(node: Node, hp: int, j: int) -> LNode:
        if node[0] == ITEM:
            return item_copy(hp, j, node[1])
        if ci.is_light(node[1]):
            return light_copy(hp, j, node[1])
        return heavy_copy(hp, j, node[1])

    def lay(t: LightTuple) -> None:
        j = t.level
        agent = t.last
        N = ci.light[agent].N
        feeders = children.get(agent_node(agent), [])
        if len(feeders) < N:
            raise PreconditionError(f"light agent {agent} has {len(feeders)} children, needs {N}")
        for child in sorted(feeders)[:N]:
            chain = chain_down(child)
            bottom = chain[-1]
            up = list(reversed(chain)) + [agent_node(agent)]
            if bottom[0] == ITEM:
                if j != 1:
                    raise InvariantViolation(f"leaf {bottom} feeds layer {j}")
                key = t.extend(SOURCE_MARK)
                nodes = [LSOURCE] + [copy_of(v, t.hp, 1) for v in up]
            else:
                key = t.extend(bottom[1])
                nodes = [light_copy(t.hp, j - 1, bottom[1])] + [
                    copy_of(v, t.hp, j) for v in up[1:]
                ]
                put(("y", key))
            for u, v in zip(nodes, nodes[1:]):
                put(("f", key, u, v))
            if bottom[0] == AGENT:
                lay(key)
        if j == 1:
            put(("y", t.extend(SOURCE_MARK)), N)

    for root, hp in sorted(heights.items()):
        chain = chain_down(children[agent_node(root)][0])
        top = chain[-1][1]
        nodes = [light_copy(hp, hp, top)] + [
            hat_item(v[1]) if v[0] == ITEM else hat_agent(v[1])
            for v in list(reversed(chain[:-1])) + [agent_node(root)]
        ]
        for u, v in zip(nodes, nodes[1:]):
            put(("f", TERM, u, v))
        t = LightTuple(hp, (top,))
        put(("x", hp, top))
        put(("y", t))
        lay(t)
    return values
