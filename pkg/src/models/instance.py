from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Dict, List, Mapping, Optional, Tuple

from utils.errors import PreconditionError

Utilities = Mapping[Tuple[int, int], Fraction]


@dataclass(frozen=True)
class Instance:
    """Agents 0..m-1, items 0..n-1 and the sparse utility matrix.

    Only nonzero utilities are stored; u() returns 0 for anything absent.
    """

    m: int
    n: int
    utilities: Dict[Tuple[int, int], Fraction] = field(default_factory=dict)
    names: Optional[Dict[str, List[str]]] = None

    def __post_init__(self) -> None:
        if self.m < 1 or self.n < 1:
            raise PreconditionError("an instance needs at least one agent and one item")
        clean: Dict[Tuple[int, int], Fraction] = {}
        for (agent, item), value in self.utilities.items():
            if not (0 <= agent < self.m and 0 <= item < self.n):
                raise PreconditionError(f"utility ({agent}, {item}) is out of range")
            value = Fraction(value)
            if value < 0:
                raise PreconditionError(f"negative utility at ({agent}, {item})")
            if value > 0:
                clean[(agent, item)] = value
        object.__setattr__(self, "utilities", clean)

    def u(self, agent: int, item: int) -> Fraction:
        return self.utilities.get((agent, item), Fraction(0))

    @cached_property
    def items_of(self) -> Dict[int, List[int]]:
        """agent -> items it values, ascending"""
        out: Dict[int, List[int]] = {a: [] for a in range(self.m)}
        for agent, item in sorted(self.utilities):
            out[agent].append(item)
        return out

    @cached_property
    def wanting(self) -> Dict[int, List[int]]:
        """item -> agents that value it, ascending"""
        out: Dict[int, List[int]] = {i: [] for i in range(self.n)}
        for agent, item in sorted(self.utilities):
            out[item].append(agent)
        for item in out:
            out[item].sort()
        return out

    def restricted_degree(self) -> int:
        """largest number of agents interested in a single item"""
        return max((len(agents) for agents in self.wanting.values()), default=0)

    def total_utility(self, agent: int) -> Fraction:
        return sum((self.u(agent, i) for i in self.items_of[agent]), Fraction(0))

    def max_utility(self) -> Fraction:
        return max(self.utilities.values(), default=Fraction(0))


@dataclass
class Allocation:
    """Partial map item -> agent; an item never has two owners by construction"""

    owner: Dict[int, int] = field(default_factory=dict)

    def bundles(self, m: int) -> Dict[int, List[int]]:
        out: Dict[int, List[int]] = {a: [] for a in range(m)}
        for item, agent in sorted(self.owner.items()):
            out.setdefault(agent, []).append(item)
        return out

    def assign(self, item: int, agent: int) -> None:
        if item in self.owner and self.owner[item] != agent:
            raise PreconditionError(
                f"item {item} already owned by agent {self.owner[item]}"
            )
        self.owner[item] = agent

    def copy(self) -> "Allocation":
        return Allocation(dict(self.owner))
