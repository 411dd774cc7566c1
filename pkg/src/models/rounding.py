from dataclasses import dataclass, field
from typing import Dict, List

from models.layered import LightTuple
from models.paths import PathSet
from models.trees import TreeDecomposition


@dataclass
class TerminalRouting:
    """Paths to the terminals and the light agents that start them"""

    p1: PathSet
    # light agent -> the subgraph G_hp its copy was drawn from
    selected: Dict[int, int]
    decomposition: TreeDecomposition
    # roots whose chain ended at a non-terminal
    discarded: List[int] = field(default_factory=list)


@dataclass
class RoundedPaths:
    paths: PathSet
    # light agent -> number of times it was selected
    receivers: Dict[int, int]
    children: Dict[LightTuple, int]
    congestion: int
    seed_used: int
    attempts: int = 1

    def receiver_agents(self) -> List[int]:
        return sorted(self.receivers)
