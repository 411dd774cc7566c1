from dataclasses import dataclass
from functools import cached_property
from typing import FrozenSet, Set, Tuple

import networkx as nx

from models.canonical import CanonicalInstance, PrivateAssignment
from models.paths import AGENT, ITEM, Node

SOURCE: Node = ("source", 0)


@dataclass(frozen=True)
class FlowNetwork:
    """The directed network N(I,P): s -> S items, A -> P(A), admissible items -> A"""

    ci: CanonicalInstance
    pa: PrivateAssignment
    graph: nx.DiGraph
    S: FrozenSet[int]

    def is_light(self, node: Node) -> bool:
        return node[0] == AGENT and self.ci.is_light(node[1])

    def is_terminal(self, node: Node) -> bool:
        return node[0] == AGENT and node[1] in self.pa.T

    @cached_property
    def direct_reach(self) -> Tuple[Set[int], Set[int]]:
        """(I*, H*): items and heavy agents reachable from s avoiding light agents"""
        seen: Set[Node] = {SOURCE}
        stack = [SOURCE]
        while stack:
            node = stack.pop()
            for nxt in self.graph.successors(node):
                if nxt in seen or self.is_light(nxt):
                    continue
                seen.add(nxt)
                stack.append(nxt)
        items = {ident for kind, ident in seen if kind == ITEM}
        heavy = {ident for kind, ident in seen if kind == AGENT}
        return items, heavy
