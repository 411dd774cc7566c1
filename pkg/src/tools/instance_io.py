#!/usr/bin/env python3

import json
import os
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

from models.canonical import CanonicalInstance, LightAgent, PrivateAssignment
from models.instance import Allocation, Instance
from models.weighted_graph import WeightedEdge, WeightedGraph
from utils.errors import InstanceParseError, MaxMinError, PreconditionError
from utils.rational import format_rational, parse_rational

KIND_INSTANCE = "instance"
KIND_CANONICAL = "canonical"
KIND_GRAPH = "graph"
KIND_ALLOCATION = "allocation"


def load_document(path: str) -> Dict[str, Any]:
    """Read a JSON document, reporting the line of syntax errors"""
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise InstanceParseError(f"cannot read {path}: {e.strerror}") from None
    return parse_document(text)


def parse_document(text: str) -> Dict[str, Any]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceParseError(f"invalid document: {e.msg}", line=e.lineno) from None
    if not isinstance(doc, dict):
        raise InstanceParseError("the document must be an object")
    return doc


def document_kind(doc: Dict[str, Any]) -> str:
    if "kind" in doc:
        return str(doc["kind"])
    if "heavy_agents" in doc or "light_agents" in doc:
        return KIND_CANONICAL
    if "edges" in doc:
        return KIND_GRAPH
    if "owner" in doc:
        return KIND_ALLOCATION
    return KIND_INSTANCE


def dump_document(doc: Dict[str, Any]) -> str:
    """Stable text form: fixed key order, one list entry per line"""
    lines = ["{"]
    keys = list(doc)
    for k, key in enumerate(keys):
        value = doc[key]
        comma = "," if k < len(keys) - 1 else ""
        if isinstance(value, list) and value:
            lines.append(f"  {json.dumps(key)}: [")
            for r, row in enumerate(value):
                sep = "," if r < len(value) - 1 else ""
                lines.append(f"    {json.dumps(row, separators=(', ', ': '))}{sep}")
            lines.append(f"  ]{comma}")
        elif isinstance(value, dict) and value:
            lines.append(f"  {json.dumps(key)}: {{")
            entries = list(value.items())
            for r, (name, row) in enumerate(entries):
                sep = "," if r < len(entries) - 1 else ""
                lines.append(
                    f"    {json.dumps(str(name))}: {json.dumps(row, separators=(', ', ': '))}{sep}"
                )
            lines.append(f"  }}{comma}")
        else:
            lines.append(f"  {json.dumps(key)}: {json.dumps(value)}{comma}")
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_document(path: str, doc: Dict[str, Any]) -> None:
    """Writes atomically: temp file, then rename"""
    temp_path = path + ".tmp"
    try:
        with open(temp_path, "w", encoding="utf-8") as f:
            f.write(dump_document(doc))
        os.replace(temp_path, path)
    except OSError as e:
        if os.path.exists(temp_path):
            os.unlink(temp_path)
        raise MaxMinError(f"cannot write {path}: {e.strerror}") from None


def _int_field(doc: Dict[str, Any], key: str, where: Optional[str] = None) -> int:
    name = where or key
    if key not in doc:
        raise InstanceParseError("missing field", field=name)
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise InstanceParseError(f"expected an integer, got {value!r}", field=name)
    return value


def _int_value(value: Any, field: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InstanceParseError(f"expected an integer, got {value!r}", field=field)
    return value


def _int_key(key: str, field: str) -> int:
    try:
        return int(key)
    except ValueError:
        raise InstanceParseError(f"agent id {key!r} is not an integer", field=field) from None


def instance_to_doc(inst: Instance) -> Dict[str, Any]:
    doc: Dict[str, Any] = {"kind": KIND_INSTANCE, "m": inst.m, "n": inst.n}
    doc["utilities"] = [
        [a, i, format_rational(u)] for (a, i), u in sorted(inst.utilities.items())
    ]
    if inst.names:
        doc["names"] = inst.names
    return doc


def instance_from_doc(doc: Dict[str, Any]) -> Instance:
    m = _int_field(doc, "m")
    n = _int_field(doc, "n")
    raw = doc.get("utilities", [])
    if not isinstance(raw, list):
        raise InstanceParseError("expected a list of triples", field="utilities")
    utilities: Dict[Tuple[int, int], Fraction] = {}
    for k, triple in enumerate(raw):
        where = f"utilities[{k}]"
        if not isinstance(triple, list) or len(triple) != 3:
            raise InstanceParseError("expected [agent, item, value]", field=where)
        agent = _int_value(triple[0], f"{where}[0]")
        item = _int_value(triple[1], f"{where}[1]")
        utilities[(agent, item)] = parse_rational(triple[2], field=f"{where}[2]")
    names = doc.get("names")
    try:
        return Instance(m, n, utilities, names)
    except PreconditionError as e:
        raise InstanceParseError(str(e), field="utilities") from None


def read_instance(path: str) -> Instance:
    doc = load_document(path)
    kind = document_kind(doc)
    if kind == KIND_CANONICAL:
        ci, _ = canonical_from_doc(doc)
        inst, _ = ci.to_instance()
        return inst
    if kind == KIND_GRAPH:
        from tools.balancing import graph_to_instance

        return graph_to_instance(graph_from_doc(doc))
    if kind != KIND_INSTANCE:
        raise InstanceParseError(f"expected an instance, found a {kind} document", field="kind")
    return instance_from_doc(doc)


def write_instance(path: str, inst: Instance) -> None:
    write_document(path, instance_to_doc(inst))


def canonical_to_doc(
    ci: CanonicalInstance, pa: Optional[PrivateAssignment] = None
) -> Dict[str, Any]:
    doc: Dict[str, Any] = {
        "kind": KIND_CANONICAL,
        "M": format_rational(ci.M),
        "epsilon": format_rational(ci.epsilon),
        "n": ci.n_items,
        "heavy_agents": {str(a): sorted(g) for a, g in sorted(ci.heavy.items())},
        "light_agents": {
            str(a): {"h": la.h, "N": la.N, "S": sorted(la.S)}
            for a, la in sorted(ci.light.items())
        },
    }
    if pa is not None:
        doc["private"] = [[a, i] for a, i in sorted(pa.P.items())]
        doc["terminals"] = sorted(pa.T)
    return doc


def canonical_from_doc(
    doc: Dict[str, Any]
) -> Tuple[CanonicalInstance, Optional[PrivateAssignment]]:
    if "M" not in doc:
        raise InstanceParseError("missing field", field="M")
    M = parse_rational(doc["M"], field="M")
    epsilon = parse_rational(doc.get("epsilon", 0), field="epsilon")
    n_items = _int_field(doc, "n")

    heavy: Dict[int, frozenset] = {}
    for key, items in dict(doc.get("heavy_agents", {})).items():
        where = f"heavy_agents.{key}"
        if not isinstance(items, list):
            raise InstanceParseError("expected a list of items", field=where)
        heavy[_int_key(key, where)] = frozenset(
            _int_value(i, where) for i in items
        )
    light: Dict[int, LightAgent] = {}
    for key, entry in dict(doc.get("light_agents", {})).items():
        where = f"light_agents.{key}"
        if not isinstance(entry, dict):
            raise InstanceParseError("expected {h, N, S}", field=where)
        S = entry.get("S", [])
        if not isinstance(S, list):
            raise InstanceParseError("expected a list of items", field=f"{where}.S")
        light[_int_key(key, where)] = LightAgent(
            _int_field(entry, "h", f"{where}.h"),
            _int_field(entry, "N", f"{where}.N"),
            frozenset(_int_value(i, f"{where}.S") for i in S),
        )
    for agent, la in light.items():
        if la.N < 1:
            raise InstanceParseError("threshold must be positive", field=f"light_agents.{agent}.N")
    overlap = set(heavy) & set(light)
    if overlap:
        raise InstanceParseError(
            f"agent {min(overlap)} is both heavy and light", field="light_agents"
        )
    for items in [*heavy.values(), *(la.S | {la.h} for la in light.values())]:
        bad = [i for i in items if not (0 <= i < n_items)]
        if bad:
            raise InstanceParseError(f"item {bad[0]} is out of range", field="n")
    ci = CanonicalInstance(M, epsilon, n_items, heavy, light)

    pa = None
    if "private" in doc:
        pairs = doc["private"]
        if not isinstance(pairs, list):
            raise InstanceParseError("expected a list of [agent, item]", field="private")
        P = {}
        for k, pair in enumerate(pairs):
            if not isinstance(pair, list) or len(pair) != 2:
                raise InstanceParseError("expected [agent, item]", field=f"private[{k}]")
            P[_int_value(pair[0], f"private[{k}]")] = _int_value(pair[1], f"private[{k}]")
        terminals = doc.get("terminals")
        if terminals is None:
            T = frozenset(a for a in heavy if a not in P)
        else:
            T = frozenset(_int_value(t, "terminals") for t in terminals)
        pa = PrivateAssignment(P, T)
    return ci, pa


def graph_to_doc(g: WeightedGraph) -> Dict[str, Any]:
    return {
        "kind": KIND_GRAPH,
        "vertices": g.n_vertices,
        "edges": [
            [e.u, e.v, format_rational(e.w_u), format_rational(e.w_v)] for e in g.edges
        ],
    }


def graph_from_doc(doc: Dict[str, Any]) -> WeightedGraph:
    n_vertices = _int_field(doc, "vertices")
    raw = doc.get("edges", [])
    if not isinstance(raw, list):
        raise InstanceParseError("expected a list of edges", field="edges")
    edges: List[WeightedEdge] = []
    for k, row in enumerate(raw):
        where = f"edges[{k}]"
        if not isinstance(row, list) or len(row) != 4:
            raise InstanceParseError("expected [u, v, w_u, w_v]", field=where)
        try:
            edges.append(
                WeightedEdge(
                    k,
                    _int_value(row[0], f"{where}[0]"),
                    _int_value(row[1], f"{where}[1]"),
                    parse_rational(row[2], f"{where}[2]"),
                    parse_rational(row[3], f"{where}[3]"),
                )
            )
        except ValueError as e:
            raise InstanceParseError(str(e), field=where) from None
    try:
        return WeightedGraph(n_vertices, tuple(edges))
    except ValueError as e:
        raise InstanceParseError(str(e), field="edges") from None


def allocation_to_doc(alloc: Allocation, value: Optional[Fraction] = None) -> Dict[str, Any]:
    doc: Dict[str, Any] = {
        "kind": KIND_ALLOCATION,
        "owner": [[i, a] for i, a in sorted(alloc.owner.items())],
    }
    if value is not None:
        doc["value"] = format_rational(value)
    return doc


def allocation_from_doc(doc: Dict[str, Any]) -> Tuple[Allocation, Optional[Fraction], List[int]]:
    """Returns the allocation, the claimed value and the items listed twice

    Items listed twice keep their first owner; the caller decides whether
    that is an error.
    """
    raw = doc.get("owner")
    if not isinstance(raw, list):
        raise InstanceParseError("expected a list of [item, agent]", field="owner")
    owner: Dict[int, int] = {}
    duplicates: List[int] = []
    for k, pair in enumerate(raw):
        if not isinstance(pair, list) or len(pair) != 2:
            raise InstanceParseError("expected [item, agent]", field=f"owner[{k}]")
        item = _int_value(pair[0], f"owner[{k}][0]")
        agent = _int_value(pair[1], f"owner[{k}][1]")
        if item in owner:
            duplicates.append(item)
            continue
        owner[item] = agent
    claimed = parse_rational(doc["value"], field="value") if "value" in doc else None
    return Allocation(owner), claimed, duplicates


def read_allocation(path: str) -> Tuple[Allocation, Optional[Fraction], List[int]]:
    return allocation_from_doc(load_document(path))
