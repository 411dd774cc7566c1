from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Dict, List, Tuple


@dataclass(frozen=True)
class WeightedEdge:
    """An item seen as an edge; each endpoint has its own weight for it.

    A self-loop has u == v and w_u == w_v.
    """

    id: int
    u: int
    v: int
    w_u: Fraction
    w_v: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "w_u", Fraction(self.w_u))
        object.__setattr__(self, "w_v", Fraction(self.w_v))
        if self.w_u < 0 or self.w_v < 0:
            raise ValueError(f"edge {self.id} has a negative weight")
        if self.u == self.v and self.w_u != self.w_v:
            raise ValueError(f"self-loop {self.id} carries two different weights")

    @property
    def is_loop(self) -> bool:
        return self.u == self.v

    def weight(self, vertex: int) -> Fraction:
        if vertex == self.u:
            return self.w_u
        if vertex == self.v:
            return self.w_v
        raise KeyError(f"vertex {vertex} is not an endpoint of edge {self.id}")

    def other(self, vertex: int) -> int:
        return self.v if vertex == self.u else self.u


@dataclass(frozen=True)
class WeightedGraph:
    """Non-uniformly weighted multigraph; vertices are agents 0..n_vertices-1"""

    n_vertices: int
    edges: Tuple[WeightedEdge, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "edges", tuple(sorted(self.edges, key=lambda e: e.id)))
        for e in self.edges:
            if not (0 <= e.u < self.n_vertices and 0 <= e.v < self.n_vertices):
                raise ValueError(f"edge {e.id} has an endpoint out of range")

    @cached_property
    def by_id(self) -> Dict[int, WeightedEdge]:
        return {e.id: e for e in self.edges}

    @cached_property
    def incident(self) -> Dict[int, List[WeightedEdge]]:
        out: Dict[int, List[WeightedEdge]] = {v: [] for v in range(self.n_vertices)}
        for e in self.edges:
            out[e.u].append(e)
            if not e.is_loop:
                out[e.v].append(e)
        return out

    def loops(self) -> List[WeightedEdge]:
        return [e for e in self.edges if e.is_loop]


# edge id -> head vertex, the agent that receives the item
Orientation = Dict[int, int]


def in_weight(g: WeightedGraph, orientation: Orientation, vertex: int) -> Fraction:
    return sum(
        (e.weight(vertex) for e in g.incident[vertex] if orientation[e.id] == vertex),
        Fraction(0),
    )


def balance_violations(g: WeightedGraph, orientation: Orientation) -> List[str]:
    """Vertices where in-weight < (total incident weight - max incident weight) / 2"""
    problems = []
    for v in range(g.n_vertices):
        weights = [e.weight(v) for e in g.incident[v]]
        if not weights:
            continue
        bound = (sum(weights, Fraction(0)) - max(weights)) / 2
        got = in_weight(g, orientation, v)
        if got < bound:
            problems.append(f"vertex {v}: in-weight {got} below {bound}")
    return problems
