from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Hashable, List, Optional, Tuple, Union

import networkx as nx
import numpy as np

from models.canonical import CanonicalInstance, PrivateAssignment
from models.paths import Node, agent_node, item_node

# Vertices of the layered graph:
#   ("s",)                  the source
#   ("L", hp, j, a)         copy of light agent a on layer j of G_hp
#   ("H", hp, j, a)         copy of heavy agent a on level j of G_hp
#   ("I", hp, j, i)         copy of item i on level j of G_hp
#   ("Hhat", a), ("Ihat", i) the terminal block
LNode = Tuple[Union[str, int], ...]

LSOURCE: LNode = ("s",)

# stands for s in a tuple of level 0
SOURCE_MARK = -1


def light_copy(hp: int, j: int, agent: int) -> LNode:
    return ("L", hp, j, agent)


def heavy_copy(hp: int, j: int, agent: int) -> LNode:
    return ("H", hp, j, agent)


def item_copy(hp: int, j: int, item: int) -> LNode:
    return ("I", hp, j, item)


def hat_agent(agent: int) -> LNode:
    return ("Hhat", agent)


def hat_item(item: int) -> LNode:
    return ("Ihat", item)


def original(node: LNode) -> Optional[Node]:
    """The vertex of N(I,P) a copy stands for; None for the source"""
    kind = node[0]
    if kind in ("L", "H"):
        return agent_node(int(node[3]))
    if kind == "I":
        return item_node(int(node[3]))
    if kind == "Hhat":
        return agent_node(int(node[1]))
    if kind == "Ihat":
        return item_node(int(node[1]))
    return None


def node_label(node: LNode) -> str:
    return "_".join(str(part) for part in node)


@dataclass(frozen=True, order=True)
class LightTuple:
    """(l_hp, ..., l_j): one light agent per layer of G_hp from hp down to j.

    A level-0 tuple ends with SOURCE_MARK in place of s.
    """

    hp: int
    agents: Tuple[int, ...]

    @property
    def level(self) -> int:
        return self.hp - len(self.agents) + 1

    @property
    def last(self) -> int:
        return self.agents[-1]

    def at(self, q: int) -> int:
        """entry on layer q"""
        return self.agents[self.hp - q]

    def extend(self, agent: int) -> "LightTuple":
        return LightTuple(self.hp, self.agents + (agent,))

    @property
    def parent(self) -> Optional["LightTuple"]:
        if len(self.agents) == 1:
            return None
        return LightTuple(self.hp, self.agents[:-1])

    def node(self) -> LNode:
        """copy of the last agent, or s for a level-0 tuple"""
        if self.level == 0:
            return LSOURCE
        return light_copy(self.hp, self.level, self.last)

    def label(self) -> str:
        parts = ["s" if a == SOURCE_MARK else str(a) for a in self.agents]
        return f"t{self.hp}_" + "_".join(parts)


@dataclass(frozen=True)
class LayeredGraph:
    """N_h(I,P): subgraphs G_1..G_h plus the terminal block.

    levels[(hp, j)] holds the edges routed inside level j of G_hp, from the
    copies of layer j-1 (or s) to the copies of layer j; block holds the
    edges of the terminal block, including those leaving the top layers.
    """

    ci: CanonicalInstance
    pa: PrivateAssignment
    h: int
    S: FrozenSet[int]
    levels: Dict[Tuple[int, int], nx.DiGraph]
    block: nx.DiGraph

    @cached_property
    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        for level in self.levels.values():
            g.add_edges_from(level.edges)
        g.add_edges_from(self.block.edges)
        return g

    @property
    def light_agents(self) -> List[int]:
        return sorted(self.ci.light)

    @property
    def terminals(self) -> List[int]:
        return sorted(self.pa.T)


@dataclass(frozen=True)
class Commodity:
    """Flow of one tuple inside one level, or the terminal flow (key "term")"""

    key: Union[LightTuple, str]
    sources: Tuple[LNode, ...]
    sinks: Tuple[LNode, ...]
    edges: Tuple[Tuple[LNode, LNode], ...]
    # column of the amount this commodity must deliver; None for the terminal flow
    demand: Optional[int] = None


@dataclass(frozen=True)
class LPRow:
    name: str
    family: str
    terms: Tuple[Tuple[int, int], ...]
    sense: str  # "=" or "<="
    rhs: int


@dataclass
class LPModel:
    """Columns, named rows and commodities of the layered feasibility LP"""

    lg: LayeredGraph
    columns: List[Hashable] = field(default_factory=list)
    rows: List[LPRow] = field(default_factory=list)
    tuples: List[LightTuple] = field(default_factory=list)
    commodities: Dict[Union[LightTuple, str], Commodity] = field(default_factory=dict)
    index: Dict[Hashable, int] = field(default_factory=dict)

    def column(self, key: Hashable) -> int:
        if key not in self.index:
            self.index[key] = len(self.columns)
            self.columns.append(key)
        return self.index[key]

    def add_row(self, name: str, family: str, terms: Dict[int, int], sense: str, rhs: int) -> None:
        self.rows.append(
            LPRow(name, family, tuple(sorted((c, v) for c, v in terms.items() if v)), sense, rhs)
        )

    @property
    def nonzeros(self) -> int:
        return sum(len(r.terms) for r in self.rows)

    def family_counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for r in self.rows:
            counts[r.family] = counts.get(r.family, 0) + 1
        return counts

    def column_name(self, col: int) -> str:
        key = self.columns[col]
        if key[0] == "x":
            return f"x_{key[1]}_{key[2]}"
        if key[0] == "y":
            return f"y_{key[1].label()}"
        commodity = key[1] if key[1] == "term" else key[1].label()
        return f"f_{commodity}__{node_label(key[2])}__{node_label(key[3])}"

    def violations(self, values, tol=0) -> List[Tuple[str, object]]:
        """(row name, excess) for every row a point breaks by more than tol.

        Works on floats and on Fractions alike.
        """
        out = []
        for r in self.rows:
            lhs = sum((values[c] * v for c, v in r.terms), 0)
            excess = lhs - r.rhs
            if r.sense == "=":
                excess = abs(excess)
            if excess > tol:
                out.append((r.name, excess))
        return out


@dataclass
class FractionalSolution:
    model: LPModel
    values: np.ndarray
    max_residual: float = 0.0

    def get(self, key: Hashable) -> float:
        col = self.model.index.get(key)
        return 0.0 if col is None else float(self.values[col])

    def x(self, hp: int, agent: int) -> float:
        return self.get(("x", hp, agent))

    def y(self, t: LightTuple) -> float:
        return self.get(("y", t))

    def flows(self, key: Union[LightTuple, str], tol: float = 0.0) -> Dict[Tuple[LNode, LNode], float]:
        c = self.model.commodities[key]
        out = {}
        for u, v in c.edges:
            f = self.get(("f", key, u, v))
            if f > tol:
                out[(u, v)] = f
        return out


@dataclass
class InfeasibilityCertificate:
    """Why the layered LP has no point: the least total row violation a
    slack-relaxed copy of it can reach, with the dual weight of each row."""

    status: str
    violation: float
    duals: Dict[str, float] = field(default_factory=dict)
    iteration: Optional[int] = None

    def strongest(self, k: int = 5) -> List[Tuple[str, float]]:
        return sorted(self.duals.items(), key=lambda kv: (-abs(kv[1]), kv[0]))[:k]


@dataclass
class PathDecomposition:
    """Per commodity: (copies along the path, flow) and leftover circulations"""

    paths: Dict[Union[LightTuple, str], List[Tuple[Tuple[LNode, ...], float]]]
    cycles: Dict[Union[LightTuple, str], List[Tuple[Tuple[LNode, ...], float]]]
