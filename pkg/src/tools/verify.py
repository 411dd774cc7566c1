#!/usr/bin/env python3

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

from models.canonical import CanonicalInstance
from models.instance import Allocation, Instance


@dataclass
class VerifyReport:
    ok: bool
    value: Optional[Fraction]
    problems: List[str] = field(default_factory=list)


def verify_allocation(
    inst: Instance,
    alloc: Allocation,
    claimed: Optional[Fraction] = None,
    duplicates: Sequence[int] = (),
    at_least: Optional[Fraction] = None,
) -> VerifyReport:
    """Exact re-evaluation of an allocation of a plain instance.

    Args:
        inst (Instance): the instance
        alloc (Allocation): item -> agent
        claimed (Optional[Fraction]): value the producer reported
        duplicates (Sequence[int]): items the input listed more than once
        at_least (Optional[Fraction]): value the allocation must reach

    Returns:
        VerifyReport: verdict, recomputed value and one line per failed check
    """
    problems = [f"item {i} is owned twice" for i in sorted(set(duplicates))]
    totals = [Fraction(0)] * inst.m
    for item, agent in sorted(alloc.owner.items()):
        if not (0 <= item < inst.n):
            problems.append(f"item {item} is out of range")
            continue
        if not (0 <= agent < inst.m):
            problems.append(f"item {item} goes to unknown agent {agent}")
            continue
        totals[agent] += inst.u(agent, item)
    got = min(totals)
    if claimed is not None and Fraction(claimed) != got:
        problems.append(f"claimed value {claimed} but the allocation is worth {got}")
    if at_least is not None and got < Fraction(at_least):
        worst = min(range(inst.m), key=lambda a: (totals[a], a))
        problems.append(f"agent {worst} gets {totals[worst]}, below {at_least}")
    return VerifyReport(not problems, got, problems)


def quota_problems(ci: CanonicalInstance, alloc: Allocation, alpha: Fraction) -> List[str]:
    """Canonical check with integral quotas: heavy agents hold an item of
    Gamma, light agents hold h(A) or floor(N/alpha) items of S(A)"""
    alpha = Fraction(alpha)
    bundles: Dict[int, List[int]] = {a: [] for a in ci.agents}
    problems = []
    for item, agent in sorted(alloc.owner.items()):
        if agent not in bundles:
            problems.append(f"item {item} goes to unknown agent {agent}")
            continue
        if not (0 <= item < ci.n_items):
            problems.append(f"item {item} is out of range")
            continue
        bundles[agent].append(item)
    for agent in ci.agents:
        got = bundles[agent]
        if agent in ci.heavy:
            if not any(i in ci.heavy[agent] for i in got):
                problems.append(f"heavy agent {agent} holds no item of its set")
            continue
        la = ci.light[agent]
        if la.h in got:
            continue
        need = int(Fraction(la.N) / alpha)
        count = sum(1 for i in got if i in la.S)
        if count < need:
            problems.append(f"light agent {agent} holds {count} light items, needs {need}")
    return problems
