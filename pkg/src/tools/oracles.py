"""Exact oracles over plain instances: objective, normalization, brute force,
single-item matching and the power-of-two vector enumeration."""

import itertools
import math
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx

from models.instance import Allocation, Instance
from utils.errors import GuardExceeded, PreconditionError
from utils.rational import floor_log2


def value(inst: Instance, alloc: Allocation) -> Fraction:
    """min over agents of the utility of the items they own

    >>> from models.instance import Instance, Allocation
    >>> value(Instance(1, 2, {(0, 0): 3, (0, 1): 5}), Allocation({0: 0, 1: 0}))
    Fraction(8, 1)
    """
    totals = [Fraction(0)] * inst.m
    for item, agent in alloc.owner.items():
        if not (0 <= item < inst.n):
            raise PreconditionError(f"item {item} is out of range")
        if not (0 <= agent < inst.m):
            raise PreconditionError(f"agent {agent} is out of range")
        totals[agent] += inst.u(agent, item)
    return min(totals)


def normalize(inst: Instance, M: Fraction) -> Instance:
    """Rescales so that a guess M maps to 2n, drops utilities below M/2n and
    caps the rest at 2n"""
    M = Fraction(M)
    if M <= 0:
        raise PreconditionError("the guessed value M must be positive")
    cutoff = M / (2 * inst.n)
    factor = Fraction(2 * inst.n) / M
    utilities = {
        key: min(u * factor, Fraction(2 * inst.n))
        for key, u in inst.utilities.items()
        if u >= cutoff
    }
    return Instance(inst.m, inst.n, utilities, inst.names)


def _integer_utilities(inst: Instance) -> Tuple[Dict[Tuple[int, int], int], int]:
    scale = 1
    for u in inst.utilities.values():
        scale = math.lcm(scale, u.denominator)
    return {k: int(u * scale) for k, u in inst.utilities.items()}, scale


def enumeration_size(inst: Instance) -> int:
    """number of leaves the brute force visits: interested agents per item"""
    size = 1
    for agents in inst.wanting.values():
        size *= max(1, len(agents))
    return size


def brute_force_opt(inst: Instance, guard: int = 10**7) -> Tuple[Fraction, Allocation]:
    """Exact optimum by depth-first enumeration with a simple upper bound.

    Each item only branches over the agents that value it; leaving an item
    unassigned or giving it to an indifferent agent never helps.

    Args:
        inst (Instance): the instance
        guard (int): largest enumeration allowed

    Returns:
        Tuple[Fraction, Allocation]: the optimum and one optimal allocation
    """
    size = enumeration_size(inst)
    if size > guard:
        raise GuardExceeded(
            f"brute force would visit {size} assignments, guard is {guard}"
        )

    util, scale = _integer_utilities(inst)
    items = [i for i in range(inst.n) if inst.wanting[i]]
    remaining = [0] * inst.m
    for (a, _), u in util.items():
        remaining[a] += u
    current = [0] * inst.m
    choice: List[int] = [0] * len(items)
    best_value = -1
    best_choice: List[int] = []

    def descend(k: int) -> None:
        nonlocal best_value, best_choice
        if min(c + r for c, r in zip(current, remaining)) <= best_value:
            return
        if k == len(items):
            best_value = min(current)
            best_choice = list(choice)
            return
        item = items[k]
        agents = inst.wanting[item]
        for a in agents:
            remaining[a] -= util[(a, item)]
        # ? try the agent that currently has the least first
        for a in sorted(agents, key=lambda b: (current[b], b)):
            current[a] += util[(a, item)]
            choice[k] = a
            descend(k + 1)
            current[a] -= util[(a, item)]
        for a in agents:
            remaining[a] += util[(a, item)]

    descend(0)
    if best_value < 0:
        return Fraction(0), Allocation()
    alloc = Allocation({item: a for item, a in zip(items, best_choice)})
    return Fraction(best_value, scale), alloc


def _bottleneck_matching(inst: Instance, theta: Fraction) -> Dict[int, int]:
    g = nx.Graph()
    agents = [("a", a) for a in range(inst.m)]
    g.add_nodes_from(agents, bipartite=0)
    g.add_nodes_from((("i", i) for i in range(inst.n)), bipartite=1)
    g.add_edges_from(
        (("a", a), ("i", i)) for (a, i), u in inst.utilities.items() if u >= theta
    )
    matching = nx.bipartite.hopcroft_karp_matching(g, top_nodes=agents)
    return {matching[node][1]: node[1] for node in agents if node in matching}


def single_item_matching(inst: Instance) -> Tuple[Fraction, Allocation]:
    """Best allocation giving each agent at most one item (bottleneck matching)"""
    for theta in sorted(set(inst.utilities.values()), reverse=True):
        owner = _bottleneck_matching(inst, theta)
        if len(owner) == inst.m:
            alloc = Allocation(owner)
            return value(inst, alloc), alloc
    # some agent values nothing it can get; still hand out what matches
    alloc = Allocation(_bottleneck_matching(inst, Fraction(0)))
    return value(inst, alloc), alloc


def _power_options(count: int) -> List[int]:
    out = [0]
    k = 1
    while k <= count:
        out.append(k)
        k *= 2
    return out


def _vector_value(vec: Sequence[int], classes: Sequence[int]) -> Fraction:
    return sum((Fraction(2) ** c * v for c, v in zip(classes, vec)), Fraction(0))


def _is_minimal(vec: Sequence[int], classes: Sequence[int], target: Fraction) -> bool:
    for k, v in enumerate(vec):
        if v == 0:
            continue
        lowered = list(vec)
        lowered[k] = v // 2
        if _vector_value(lowered, classes) >= target:
            return False
    return True


def _family_flow(
    class_of: Dict[Tuple[int, int], int],
    family: Dict[int, Dict[int, int]],
) -> Tuple[int, Dict]:
    g = nx.DiGraph()
    for a, vec in family.items():
        for c, v in vec.items():
            if v > 0:
                g.add_edge("s", ("ac", a, c), capacity=v)
    for (a, i), c in class_of.items():
        if a in family and family[a].get(c, 0) > 0:
            g.add_edge(("ac", a, c), ("i", i), capacity=1)
            g.add_edge(("i", i), "t", capacity=1)
    if "s" not in g or "t" not in g:
        return 0, {}
    return nx.maximum_flow(g, "s", "t")


def solve_vector_enumeration(
    inst: Instance, guard: int = 200_000
) -> Tuple[Fraction, Allocation]:
    """Rounds utilities down to powers of two and counts down to powers of
    two, then searches the best family of per-agent demand vectors whose
    demands fit a degree-constrained matching. The result is within 4 of OPT.
    """
    class_of = {key: floor_log2(u) for key, u in inst.utilities.items()}
    per_agent_classes: Dict[int, List[int]] = {}
    counts: Dict[Tuple[int, int], int] = {}
    for (a, _), c in class_of.items():
        counts[(a, c)] = counts.get((a, c), 0) + 1
    for a in range(inst.m):
        per_agent_classes[a] = sorted({c for (b, c) in counts if b == a})

    vectors: Dict[int, List[Tuple[int, ...]]] = {}
    total = 1
    for a in range(inst.m):
        options = [_power_options(counts[(a, c)]) for c in per_agent_classes[a]]
        vectors[a] = sorted(itertools.product(*options))
        total *= len(vectors[a])
    if total > guard:
        raise GuardExceeded(f"vector enumeration needs {total} families, guard is {guard}")

    candidates = sorted(
        {
            _vector_value(vec, per_agent_classes[a])
            for a in range(inst.m)
            for vec in vectors[a]
        }
    )

    def find_family(target: Fraction) -> Optional[Dict[int, Dict[int, int]]]:
        minimal: Dict[int, List[Tuple[int, ...]]] = {}
        for a in range(inst.m):
            classes = per_agent_classes[a]
            minimal[a] = [
                vec
                for vec in vectors[a]
                if _vector_value(vec, classes) >= target
                and _is_minimal(vec, classes, target)
            ]
            if not minimal[a]:
                return None

        chosen: Dict[int, Dict[int, int]] = {}

        def extend(k: int) -> bool:
            if k == inst.m:
                return True
            for vec in minimal[k]:
                chosen[k] = dict(zip(per_agent_classes[k], vec))
                demand = sum(sum(v.values()) for v in chosen.values())
                flow_value, _ = _family_flow(class_of, chosen)
                if flow_value == demand and extend(k + 1):
                    return True
                del chosen[k]
            return False

        return dict(chosen) if extend(0) else None

    lo, hi = 0, len(candidates) - 1
    best_family: Dict[int, Dict[int, int]] = {}
    while lo <= hi:
        mid = (lo + hi) // 2
        family = find_family(candidates[mid]) if candidates[mid] > 0 else {}
        if family is not None:
            best_family = family
            lo = mid + 1
        else:
            hi = mid - 1

    alloc = Allocation()
    if best_family:
        _, flow = _family_flow(class_of, best_family)
        for node, out in flow.items():
            if isinstance(node, tuple) and node[0] == "ac":
                for target, amount in out.items():
                    if amount > 0:
                        alloc.assign(target[1], node[1])
    return value(inst, alloc), alloc
