from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from models.instance import Instance


@dataclass(frozen=True)
class LightAgent:
    h: int
    N: int
    S: FrozenSet[int]


@dataclass(frozen=True)
class CanonicalInstance:
    """Heavy agents want one item of Gamma(A) at utility M; a light agent wants
    its own heavy item h(A) at utility M, or N_A items of S(A) at M/N_A each.

    Agent ids need not be dense: later iterations drop satisfied light agents
    while keeping every id and every item.
    """

    M: Fraction
    epsilon: Fraction
    n_items: int
    heavy: Dict[int, FrozenSet[int]] = field(default_factory=dict)
    light: Dict[int, LightAgent] = field(default_factory=dict)

    @cached_property
    def agents(self) -> List[int]:
        return sorted(set(self.heavy) | set(self.light))

    def is_light(self, agent: int) -> bool:
        return agent in self.light

    def u(self, agent: int, item: int) -> Fraction:
        if agent in self.heavy:
            return self.M if item in self.heavy[agent] else Fraction(0)
        la = self.light[agent]
        if item == la.h:
            return self.M
        if item in la.S:
            return self.M / la.N
        return Fraction(0)

    def wants(self, agent: int) -> FrozenSet[int]:
        if agent in self.heavy:
            return self.heavy[agent]
        la = self.light[agent]
        return la.S | {la.h}

    @cached_property
    def heavy_items(self) -> FrozenSet[int]:
        """h(A) of every light agent"""
        return frozenset(la.h for la in self.light.values())

    def without_agents(self, agents: Iterable[int]) -> "CanonicalInstance":
        drop = set(agents)
        return replace(
            self,
            heavy={a: g for a, g in self.heavy.items() if a not in drop},
            light={a: la for a, la in self.light.items() if a not in drop},
        )

    def with_thresholds(self, thresholds: Dict[int, int]) -> "CanonicalInstance":
        return replace(
            self,
            light={
                a: replace(la, N=thresholds.get(a, la.N)) for a, la in self.light.items()
            },
        )

    def to_instance(self) -> Tuple[Instance, List[int]]:
        """Plain instance over the same items; agents renumbered densely.

        Returns:
            Tuple[Instance, List[int]]: the instance and the canonical id of each new agent
        """
        order = self.agents
        utilities: Dict[Tuple[int, int], Fraction] = {}
        for k, agent in enumerate(order):
            for item in self.wants(agent):
                utilities[(k, item)] = self.u(agent, item)
        return Instance(len(order), self.n_items, utilities), order


@dataclass(frozen=True)
class AgentOrigin:
    origin: int
    role: str  # "chi" or "lambda"
    j: int


@dataclass(frozen=True)
class ItemOrigin:
    kind: str  # "original", "h" or "Y"
    origin: Optional[int] = None
    j: int = 0


@dataclass(frozen=True)
class BackMap:
    s: int
    m: int
    n: int
    agents: Dict[int, AgentOrigin]
    items: Dict[int, ItemOrigin]

    def chi(self, origin: int, j: int) -> int:
        return self._index[(origin, "chi", j)]

    def lam(self, origin: int, j: int) -> int:
        return self._index[(origin, "lambda", j)]

    def y_items(self, origin: int) -> List[int]:
        return sorted(
            i for i, o in self.items.items() if o.kind == "Y" and o.origin == origin
        )

    @cached_property
    def _index(self) -> Dict[Tuple[int, str, int], int]:
        return {(o.origin, o.role, o.j): a for a, o in self.agents.items()}


@dataclass(frozen=True)
class PrivateAssignment:
    """P maps light agents to h(A) and matched heavy agents into Gamma(A).

    Terminals are the heavy agents without a private item.
    """

    P: Dict[int, int]
    T: FrozenSet[int]

    @cached_property
    def owner_of(self) -> Dict[int, int]:
        return {item: agent for agent, item in self.P.items()}

    def free_items(self, n_items: int) -> FrozenSet[int]:
        """the set S: items that are nobody's private item"""
        used = set(self.P.values())
        return frozenset(i for i in range(n_items) if i not in used)

    def restricted(self, agents: Set[int]) -> "PrivateAssignment":
        return PrivateAssignment(
            {a: i for a, i in self.P.items() if a in agents},
            frozenset(t for t in self.T if t in agents),
        )
