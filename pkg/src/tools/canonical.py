#!/usr/bin/env python3

from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

from models.canonical import (
    AgentOrigin,
    BackMap,
    CanonicalInstance,
    ItemOrigin,
    LightAgent,
)
from models.instance import Allocation, Instance
from utils.errors import InvariantViolation, PreconditionError, TrivialScale
from utils.logger import LogLevel, Logger
from utils.rational import ceil_div, ceil_log2


def _power_at_most(base: int, epsilon: Fraction, bound: Fraction) -> bool:
    """base^epsilon <= bound, exact for a rational exponent"""
    a, b = epsilon.numerator, epsilon.denominator
    if bound <= 0:
        return False
    return Fraction(base) ** a <= bound ** b


def scale_exponent(n: int, M: Fraction, epsilon: Fraction) -> int:
    """Largest s >= 1 with 2^s * n^eps * ceil(log2 n) <= M, or 0 if none"""
    L = max(1, ceil_log2(n))
    s = 0
    while _power_at_most(n, epsilon, Fraction(M, 2 ** (s + 1) * L)):
        s += 1
    return s


def _bucket(u: Fraction) -> int:
    """Bucket 1 holds [1, 2], bucket j >= 2 holds (2^(j-1), 2^j]"""
    j = 1
    while u > 2**j:
        j += 1
    return j


def canonicalize(
    inst: Instance,
    M: Fraction,
    epsilon: Fraction,
    logging: Optional[Logger] = None,
) -> Tuple[CanonicalInstance, BackMap]:
    """Builds the canonical instance of a normalized instance.

    Every original agent B becomes a heavy agent chi_0 wanting its items of
    utility above 2^s, and for each bucket j a light agent lambda_j plus a
    heavy agent chi_j sharing the fresh item h(lambda_j). The s fresh items
    Y_B are heavy for all chi's of B, so exactly one chi is left to be
    satisfied another way.

    Args:
        inst (Instance): normalized instance, nonzero utilities in [1, 2n]
        M (Fraction): target value, at most 2n
        epsilon (Fraction): approximation exponent
        logging (Optional[Logger]): receives the log^8 guard warning

    Returns:
        Tuple[CanonicalInstance, BackMap]: the instance and the map back to inst
    """
    logging = logging or Logger.quiet()
    M = Fraction(M)
    epsilon = Fraction(epsilon)
    n = inst.n
    if M <= 0 or epsilon <= 0:
        raise PreconditionError("M and epsilon must be positive")
    if M > 2 * n:
        raise PreconditionError(f"M={M} exceeds 2n={2 * n}; normalize first")
    for (a, i), u in inst.utilities.items():
        if not (1 <= u <= 2 * n):
            raise PreconditionError(f"utility ({a}, {i}) = {u} is outside [1, 2n]")

    L = max(1, ceil_log2(n))
    if Fraction(n) ** epsilon.numerator < Fraction(L) ** (8 * epsilon.denominator):
        logging.log(
            LogLevel.Warn,
            f"n^eps is below log^8 n (n={n}, eps={epsilon}); guarantees are asymptotic only",
        )

    s = scale_exponent(n, M, epsilon)
    if s <= 0:
        raise TrivialScale(s)
    logging.log(LogLevel.Debug, f"canonicalize: s={s}, {inst.m} agents become {inst.m * (2 * s + 1)}")

    heavy: Dict[int, FrozenSet[int]] = {}
    light: Dict[int, LightAgent] = {}
    agents: Dict[int, AgentOrigin] = {}
    items: Dict[int, ItemOrigin] = {i: ItemOrigin("original") for i in range(n)}
    top = Fraction(2) ** s
    per_agent = 2 * s + 1

    for B in range(inst.m):
        a0 = B * per_agent
        i0 = n + B * 2 * s
        h_items = [i0 + k for k in range(s)]
        y_items = [i0 + s + k for k in range(s)]
        for j in range(1, s + 1):
            items[h_items[j - 1]] = ItemOrigin("h", B, j)
            items[y_items[j - 1]] = ItemOrigin("Y", B, j)

        buckets: Dict[int, Set[int]] = {j: set() for j in range(1, s + 1)}
        big: Set[int] = set()
        for i in inst.items_of[B]:
            u = inst.u(B, i)
            if u > top:
                big.add(i)
            else:
                buckets[_bucket(u)].add(i)

        heavy[a0] = frozenset(big | set(y_items))
        agents[a0] = AgentOrigin(B, "chi", 0)
        for j in range(1, s + 1):
            chi = a0 + j
            lam = a0 + s + j
            heavy[chi] = frozenset({h_items[j - 1], *y_items})
            agents[chi] = AgentOrigin(B, "chi", j)
            light[lam] = LightAgent(
                h_items[j - 1], ceil_div(M, s * 2**j), frozenset(buckets[j])
            )
            agents[lam] = AgentOrigin(B, "lambda", j)

    n_items = n + inst.m * 2 * s
    ci = CanonicalInstance(M, epsilon, n_items, heavy, light)
    return ci, BackMap(s, inst.m, n, agents, items)


def satisfaction_problems(
    ci: CanonicalInstance, alloc: Allocation, alpha: Fraction
) -> List[str]:
    """Agents of ci that are not alpha-satisfied by alloc"""
    alpha = Fraction(alpha)
    bundles: Dict[int, List[int]] = {a: [] for a in ci.agents}
    for item, agent in alloc.owner.items():
        if agent not in bundles:
            return [f"item {item} is owned by unknown agent {agent}"]
        bundles[agent].append(item)
    problems = []
    for agent in ci.agents:
        got = bundles[agent]
        if agent in ci.heavy:
            if not any(i in ci.heavy[agent] for i in got):
                problems.append(f"heavy agent {agent} holds no admissible item")
            continue
        la = ci.light[agent]
        if la.h in got:
            continue
        count = sum(1 for i in got if i in la.S)
        if count * alpha < la.N:
            problems.append(
                f"light agent {agent} holds {count} light items, needs {la.N}/{alpha}"
            )
    return problems


def project_solution(ci: CanonicalInstance, backmap: BackMap, canon_alloc: Allocation) -> Allocation:
    """Maps a canonical allocation back without checking quotas.

    Some chi of every origin agent should miss the Y items; either it is
    chi_0 holding an item above 2^s, or it is chi_j holding h(lambda_j) and
    then lambda_j passes on its light items of bucket j. Origin agents
    whose chis all hold Y items get nothing.
    """
    bundles = canon_alloc.bundles(max(ci.agents) + 1)
    out = Allocation()
    for B in range(backmap.m):
        for j in range(0, backmap.s + 1):
            chi = backmap.chi(B, j)
            original = [
                i for i in bundles.get(chi, []) if i in ci.heavy[chi]
                and backmap.items[i].kind != "Y"
            ]
            if not original:
                continue
            if j == 0:
                out.assign(original[0], B)
            else:
                lam = backmap.lam(B, j)
                for i in bundles.get(lam, []):
                    if i in ci.light[lam].S:
                        out.assign(i, B)
            break
    return out


def lift_solution(
    inst: Instance,
    ci: CanonicalInstance,
    backmap: BackMap,
    canon_alloc: Allocation,
    alpha: Fraction,
) -> Allocation:
    """Turns an alpha-satisfying canonical allocation into one for inst
    where every agent gets at least min(2^s, M/(2 s alpha))"""
    alpha = Fraction(alpha)
    problems = satisfaction_problems(ci, canon_alloc, alpha)
    if problems:
        raise PreconditionError(f"canonical solution is not {alpha}-satisfying: {problems[0]}")

    out = project_solution(ci, backmap, canon_alloc)
    s = backmap.s
    floor = min(Fraction(2) ** s, ci.M / (2 * s * alpha))
    for B in range(backmap.m):
        got = sum((inst.u(B, i) for i, a in out.owner.items() if a == B), Fraction(0))
        if got < floor:
            raise InvariantViolation(f"lifted agent {B} gets {got}, below {floor}")
    return out


def embed_solution(
    inst: Instance, ci: CanonicalInstance, backmap: BackMap, alloc: Allocation
) -> Allocation:
    """A 1-satisfying canonical allocation from an allocation of value >= M"""
    s = backmap.s
    out = Allocation()
    bundles = alloc.bundles(inst.m)
    top = Fraction(2) ** s
    for B in range(backmap.m):
        got = bundles[B]
        y_items = backmap.y_items(B)
        big = [i for i in got if inst.u(B, i) > top]
        if big:
            chosen = 0
            out.assign(big[0], backmap.chi(B, 0))
        else:
            chosen = None
            for j in range(1, s + 1):
                lam = backmap.lam(B, j)
                in_bucket = sorted(i for i in got if i in ci.light[lam].S)
                if len(in_bucket) >= ci.light[lam].N:
                    chosen = j
                    for i in in_bucket:
                        out.assign(i, lam)
                    out.assign(ci.light[lam].h, backmap.chi(B, j))
                    break
            if chosen is None:
                raise PreconditionError(f"agent {B} does not reach M in the given allocation")
        ys = iter(y_items)
        for j in range(0, s + 1):
            if j != chosen:
                out.assign(next(ys), backmap.chi(B, j))
        for j in range(1, s + 1):
            if j != chosen:
                lam = backmap.lam(B, j)
                out.assign(ci.light[lam].h, lam)
    return out


def validate_canonical(ci: CanonicalInstance) -> List[str]:
    """Diagnostics for every broken canonical-instance invariant; empty when valid"""
    problems: List[str] = []
    overlap = set(ci.heavy) & set(ci.light)
    for agent in sorted(overlap):
        problems.append(f"agent {agent} is both heavy and light")
    owners: Dict[int, int] = {}
    for agent, la in sorted(ci.light.items()):
        if la.h in owners:
            problems.append(f"h({agent}) = h({owners[la.h]}) = item {la.h}")
        owners.setdefault(la.h, agent)
        if la.N < 1:
            problems.append(f"light agent {agent} has threshold {la.N}")
        elif ci.epsilon > 0 and not _power_at_most(ci.n_items, ci.epsilon, Fraction(la.N)):
            problems.append(
                f"light agent {agent} has N={la.N} below n^eps (n={ci.n_items}, eps={ci.epsilon})"
            )
        if la.h in la.S:
            problems.append(f"light agent {agent} lists its heavy item {la.h} as light")
        for i in sorted(la.S | {la.h}):
            if not (0 <= i < ci.n_items):
                problems.append(f"light agent {agent} wants unknown item {i}")
    for agent, gamma in sorted(ci.heavy.items()):
        for i in sorted(gamma):
            if not (0 <= i < ci.n_items):
                problems.append(f"heavy agent {agent} wants unknown item {i}")
    return problems


def scale_for_layers(ci: CanonicalInstance, h: int) -> CanonicalInstance:
    """Divides every threshold by h+1, keeping it at least 1"""
    if h < 1:
        raise PreconditionError("the number of layers must be at least 1")
    return ci.with_thresholds({a: max(1, la.N // (h + 1)) for a, la in ci.light.items()})
