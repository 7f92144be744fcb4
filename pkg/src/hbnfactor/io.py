"""JSON model files.

Layout::

    {
      "nodes": [
        {"id": "D", "kind": "discrete", "states": ["d1", "d2"],
         "parents": [], "cpd": {"table": [[0.5, 0.5]]}},
        {"id": "X", "kind": "continuous", "range": [-5, 5],
         "cpd": {"expression": "Normal(0, 1)"}},
        {"id": "C", "kind": "continuous",
         "cpd": {"partitioned": {"control": ["D"],
                                 "cases": {"d1": "Arithmetic(X)", "d2": "Normal(X, 2)"}}}}
      ],
      "evidence": {"C": 1.5},
      "partitions": {"X": [-5, -2.5, 0, 2.5, 5]}
    }

``parents`` is optional for expression CPDs (derived from the referenced
variables) and required for tables with parents. Partitioned case keys for
several control nodes join the state labels with commas, row-major over the
control list. ``partitions`` stores full cut lists (both range ends included).
"""

from __future__ import annotations

import json
from pathlib import Path

from . import expr as ex
from .model import (ContinuousNode, DiscreteNode, Expression, HybridBn,
                    Partitioned, Table, joint_states)

__all__ = ["ModelFormatError", "to_dict", "from_dict", "read_model", "write_model",
           "dumps", "loads"]


class ModelFormatError(ValueError):
    """Bad model file. ``node`` and ``offset`` locate expression errors."""

    def __init__(self, message: str, node: str | None = None, offset: int | None = None):
        where = ""
        if node is not None:
            where = f"node {node!r}"
            if offset is not None:
                where += f", offset {offset}"
            where += ": "
        super().__init__(where + message)
        self.node = node
        self.offset = offset


def _case_key(key) -> str:
    return ",".join(key)


def _cpd_to_json(bn: HybridBn, cpd):
    if isinstance(cpd, Table):
        return {"table": [list(r) for r in cpd.rows]}
    if isinstance(cpd, Expression):
        return {"expression": ex.unparse(cpd.head)}
    keys = joint_states(bn, cpd.control) if all(c in bn for c in cpd.control) else list(cpd.cases)
    cases = {_case_key(k): ex.unparse(cpd.cases[k]) for k in keys if k in cpd.cases}
    return {"partitioned": {"control": list(cpd.control), "cases": cases}}


def to_dict(bn: HybridBn, partitions=None) -> dict:
    nodes = []
    for n in bn:
        d = {"id": n.id, "kind": n.kind}
        if isinstance(n, DiscreteNode):
            d["states"] = list(n.states)
        elif n.range is not None:
            d["range"] = list(n.range)
        d["parents"] = list(n.parents)
        d["cpd"] = _cpd_to_json(bn, n.cpd)
        nodes.append(d)
    out = {"nodes": nodes, "evidence": dict(bn.evidence)}
    if partitions:
        out["partitions"] = {k: [float(c) for c in p.cuts] for k, p in partitions.items()}
    return out


def _parse_head(text: str, node_id: str):
    try:
        return ex.parse(text).head
    except ex.ParseError as e:
        raise ModelFormatError(e.message, node_id, e.offset) from e


def from_dict(data: dict) -> HybridBn:
    if not isinstance(data, dict) or "nodes" not in data:
        raise ModelFormatError("model must be an object with a 'nodes' array")
    nodes = []
    for d in data["nodes"]:
        try:
            node_id = d["id"]
            kind = d["kind"]
            cpd_json = d["cpd"]
        except (KeyError, TypeError):
            raise ModelFormatError(f"node entry {d!r} needs id, kind and cpd") from None
        if not isinstance(node_id, str) or not node_id:
            raise ModelFormatError(f"bad node id {node_id!r}")
        if "table" in cpd_json:
            cpd = Table(tuple(tuple(float(p) for p in row) for row in cpd_json["table"]))
        elif "expression" in cpd_json:
            cpd = Expression(_parse_head(cpd_json["expression"], node_id))
        elif "partitioned" in cpd_json:
            spec = cpd_json["partitioned"]
            control = tuple(spec["control"])
            cases = {}
            for key, text in spec["cases"].items():
                labels = tuple(key.split(",")) if len(control) > 1 else (key,)
                cases[labels] = _parse_head(text, node_id)
            cpd = Partitioned(control, cases)
        else:
            raise ModelFormatError("cpd must be a table, expression or partitioned", node_id)
        parents = d.get("parents")
        if parents is None:
            parents = () if isinstance(cpd, Table) else cpd.referenced()
        if kind == "discrete":
            if not d.get("states"):
                raise ModelFormatError("discrete node needs states", node_id)
            nodes.append(DiscreteNode(node_id, tuple(d["states"]), tuple(parents), cpd))
        elif kind == "continuous":
            rng = d.get("range")
            nodes.append(ContinuousNode(node_id, cpd, tuple(parents),
                                        None if rng is None else (float(rng[0]), float(rng[1]))))
        else:
            raise ModelFormatError(f"unknown kind {kind!r}", node_id)
    try:
        return HybridBn.of(nodes, data.get("evidence") or {})
    except ValueError as e:
        raise ModelFormatError(str(e)) from e


def read_partitions(data: dict, bn: HybridBn | None = None):
    """Partitions stored in a model (or partitions-only) document, or None."""
    from .discretize import Partition

    raw = data.get("partitions") if "nodes" in data or "partitions" in data else data
    if not raw:
        return None
    return {k: Partition(k, tuple(float(c) for c in cuts)) for k, cuts in raw.items()}


def dumps(bn: HybridBn, partitions=None) -> str:
    return json.dumps(to_dict(bn, partitions), indent=2)


def loads(text: str) -> HybridBn:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"invalid JSON: {e.msg} (line {e.lineno}, column {e.colno})") from e
    return from_dict(data)


def read_model(path) -> tuple:
    """Return ``(bn, partitions_or_None)``."""
    text = Path(path).read_text()
    bn = loads(text)
    return bn, read_partitions(json.loads(text), bn)


def write_model(path, bn: HybridBn, partitions=None):
    Path(path).write_text(dumps(bn, partitions) + "\n")
