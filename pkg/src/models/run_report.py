import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional

from utils.rational import format_rational


def digest_of(doc: Dict[str, Any]) -> str:
    """sha256 of the document with sorted keys and no whitespace"""
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class RunReport:
    command: str
    parameters: Dict[str, str]
    digest: str
    seed: int
    mode: str = ""
    status: str = "unknown"
    value: Optional[Fraction] = None
    oracle: Optional[Fraction] = None
    wall_time: float = 0.0
    trace: List[Dict[str, Any]] = field(default_factory=list)
    certificate: Optional[Dict[str, Any]] = None
    problems: List[str] = field(default_factory=list)

    @property
    def ratio(self) -> Optional[Fraction]:
        if self.oracle is None or self.value is None or self.oracle == 0:
            return None
        return self.value / self.oracle

    def add_trace(self, record: Dict[str, Any]) -> None:
        if self.trace and record.get("iteration", 0) < self.trace[-1].get("iteration", 0):
            raise ValueError("trace records must come in iteration order")
        self.trace.append(record)

    def to_doc(self) -> Dict[str, Any]:
        doc: Dict[str, Any] = {
            "kind": "report",
            "command": self.command,
            "mode": self.mode,
            "status": self.status,
            "digest": self.digest,
            "seed": self.seed,
            "parameters": dict(sorted(self.parameters.items())),
            "wall_time": round(self.wall_time, 6),
        }
        if self.value is not None:
            doc["value"] = format_rational(self.value)
        if self.oracle is not None:
            doc["oracle"] = format_rational(self.oracle)
            if self.ratio is not None:
                doc["ratio"] = format_rational(self.ratio)
        if self.certificate is not None:
            doc["certificate"] = self.certificate
        if self.problems:
            doc["problems"] = list(self.problems)
        if self.trace:
            doc["trace"] = [_plain(r) for r in self.trace]
        return doc


def _plain(record: Dict[str, Any]) -> Dict[str, Any]:
    return {
        k: format_rational(v) if isinstance(v, Fraction) else v
        for k, v in record.items()
    }
