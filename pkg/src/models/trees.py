from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, List, Tuple


@dataclass(frozen=True)
class Tree:
    """A tree of the agent/item graph; every item has degree 2 in it"""

    agents: FrozenSet[int]
    items: FrozenSet[int]
    edges: FrozenSet[Tuple[int, int]]  # (agent, item)

    def x_mass(self, x: Dict[int, Fraction]) -> Fraction:
        return sum((Fraction(x.get(a, 0)) for a in self.agents), Fraction(0))

    def neighbours(self) -> Dict[Tuple[str, int], List[Tuple[str, int]]]:
        adj: Dict[Tuple[str, int], List[Tuple[str, int]]] = {}
        for a, i in sorted(self.edges):
            adj.setdefault(("a", a), []).append(("i", i))
            adj.setdefault(("i", i), []).append(("a", a))
        return adj


@dataclass
class TreeDecomposition:
    trees: List[Tree] = field(default_factory=list)
    # the edges fixed at y = 1, agent -> item
    matched: Dict[int, int] = field(default_factory=dict)
    x: Dict[int, Fraction] = field(default_factory=dict)
