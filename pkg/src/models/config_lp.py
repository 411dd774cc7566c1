from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

from models.instance import Allocation
from models.weighted_graph import Orientation, WeightedGraph


@dataclass(frozen=True)
class Configuration:
    """A set of an agent's items worth at least the LP target to it"""

    agent: int
    items: FrozenSet[int]
    weight: Fraction


@dataclass
class ConfigLPSolution:
    """Exact support of a configuration LP point"""

    target: Fraction
    support: List[Configuration] = field(default_factory=list)
    rounds: int = 0

    def by_agent(self) -> Dict[int, List[Configuration]]:
        out: Dict[int, List[Configuration]] = {}
        for c in self.support:
            out.setdefault(c.agent, []).append(c)
        return out


@dataclass
class ItemSplit:
    """Integral and fractional items of a configuration LP point"""

    # agent -> items it gets in every configuration
    integral: Dict[int, List[int]]
    fractional: List[int]
    # agent -> target minus the utility of its integral items
    residual: Dict[int, Fraction]
    # the fractional items as a graph; vertices outside h_vertices are isolated
    H: WeightedGraph
    h_vertices: Set[int] = field(default_factory=set)


@dataclass
class BalanceResult:
    value: Fraction
    allocation: Allocation
    # largest guess whose LP was feasible, and the LP target used for it
    M: Fraction
    lp_target: Fraction
    orientation: Orientation = field(default_factory=dict)
    probes: List[Tuple[Fraction, bool]] = field(default_factory=list)
    grid: Optional[str] = None
