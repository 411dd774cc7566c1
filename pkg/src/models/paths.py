from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

AGENT = "agent"
ITEM = "item"
DUMMY = "dummy"

# ("agent", id), ("item", id) or ("dummy", k); the source s is never stored
Node = Tuple[str, int]


def agent_node(agent: int) -> Node:
    return (AGENT, agent)


def item_node(item: int) -> Node:
    return (ITEM, item)


@dataclass(frozen=True)
class SimplePath:
    """A path of the network N(I,P) written over original agents and items.

    Paths fed by the source start at an item of S; s itself is implicit.
    """

    nodes: Tuple[Node, ...]

    def __post_init__(self) -> None:
        if not self.nodes:
            raise ValueError("a path needs at least one vertex")
        object.__setattr__(self, "nodes", tuple(tuple(n) for n in self.nodes))

    @property
    def first(self) -> Node:
        return self.nodes[0]

    @property
    def last(self) -> Node:
        return self.nodes[-1]

    @property
    def interior(self) -> Tuple[Node, ...]:
        return self.nodes[1:-1]

    def from_source(self) -> bool:
        return self.first[0] == ITEM

    def reversed(self) -> "SimplePath":
        return SimplePath(tuple(reversed(self.nodes)))

    def head(self) -> Tuple[Node, ...]:
        """first and intermediate vertices, the ones capacities apply to"""
        return self.nodes[:-1]

    def edges(self) -> List[Tuple[Node, Node]]:
        return list(zip(self.nodes, self.nodes[1:]))

    def index(self, node: Node) -> int:
        return self.nodes.index(node)

    def __len__(self) -> int:
        return len(self.nodes)


PathSet = List[SimplePath]


@dataclass
class SolutionForest:
    """Flow-carrying edges of an integral solution, stored child -> parent.

    Roots are terminals; leaves are items of S.
    """

    parent: Dict[Node, Node] = field(default_factory=dict)
    roots: Set[int] = field(default_factory=set)

    def children(self) -> Dict[Node, List[Node]]:
        out: Dict[Node, List[Node]] = {}
        for child, par in sorted(self.parent.items()):
            out.setdefault(par, []).append(child)
        return out

    def nodes(self) -> Set[Node]:
        return set(self.parent) | set(self.parent.values())

    def copy(self) -> "SolutionForest":
        return SolutionForest(dict(self.parent), set(self.roots))


@dataclass
class AlmostFeasiblePaths:
    p1: PathSet
    p2: PathSet
    alpha: Fraction
    selected: FrozenSet[int] = frozenset()
    congestion: int = 0
    seed_used: int = 0


@dataclass
class IterationState:
    """Input of one iteration of the terminal-shrinking driver"""

    j: int
    satisfied: FrozenSet[int]
    terminals: FrozenSet[int]
    P: Dict[int, int]
    Q: PathSet
    alpha_j: Fraction


@dataclass
class SpiderPrefixes:
    """prefix[k] is the kept length of path k, P-paths first then Q-paths"""

    prefix: List[int]
    n_p: int
    # (p index, q index) per component, either side None for a lone full path
    components: List[Tuple[Optional[int], Optional[int]]]

    def gamma(self, paths: List[SimplePath], k: int) -> Tuple[Node, ...]:
        return paths[k].nodes[: self.prefix[k]]

    def partner_of_p(self) -> Dict[int, int]:
        return {p: q for p, q in self.components if p is not None and q is not None}


def vertices_of(paths: Iterable[SimplePath]) -> Set[Node]:
    out: Set[Node] = set()
    for p in paths:
        out.update(p.nodes)
    return out


@dataclass
class RerouteResult:
    p1: PathSet
    q2: PathSet
    # index into the merged paths -> terminal of the path that displaced it
    responsibility: Dict[int, int] = field(default_factory=dict)


@dataclass
class CleanupReport:
    bad: List[int] = field(default_factory=list)
    # bad agent -> terminals it put back into T
    terminals: Dict[int, List[int]] = field(default_factory=dict)
    # bad agent -> number of outgoing or repossessed paths it removed
    paths: Dict[int, int] = field(default_factory=dict)
