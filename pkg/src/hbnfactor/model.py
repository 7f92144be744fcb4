"""Hybrid Bayesian network data model.

A network is an immutable map of nodes. Each node carries its ordered parent
list and its CPD, one of:

* ``Table``        -- probability rows for a discrete child, one row per joint
                      state of its (discrete) parents, row-major with the first
                      parent varying slowest;
* ``Expression``   -- a distribution head over continuous parents;
* ``Partitioned``  -- one expression per joint state of the discrete control
                      parents (a mixture controlled by those parents).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Union

from . import expr as ex

__all__ = [
    "Table", "Expression", "Partitioned", "Cpd",
    "DiscreteNode", "ContinuousNode", "Node", "HybridBn",
    "Violation", "UnknownNodeError",
    "validate", "cpd_size", "continuous_parent_count",
    "discrete", "continuous", "partitioned", "joint_states",
]


class UnknownNodeError(KeyError):
    pass


# ----------------------------------------------------------------------------
# CPDs


@dataclass(frozen=True)
class Table:
    rows: tuple  # tuple of tuples of floats

    def referenced(self) -> tuple:
        return ()


@dataclass(frozen=True)
class Expression:
    head: ex.Head

    def referenced(self) -> tuple:
        return ex.free_vars(self.head)


@dataclass(frozen=True)
class Partitioned:
    """``cases`` maps a joint control state (tuple of labels) to a head."""

    control: tuple
    cases: Mapping

    def referenced(self) -> tuple:
        out: list = list(self.control)
        for head in self.cases.values():
            for v in ex.free_vars(head):
                if v not in out:
                    out.append(v)
        return tuple(out)

    def continuous_referenced(self) -> tuple:
        return tuple(v for v in self.referenced() if v not in self.control)

    def ordered_cases(self, bn: "HybridBn") -> list:
        """``(key, head)`` pairs in canonical row-major control order."""
        return [(key, self.cases[key]) for key in joint_states(bn, self.control)]

    def __eq__(self, other):
        return (isinstance(other, Partitioned) and self.control == other.control
                and dict(self.cases) == dict(other.cases))

    def __hash__(self):
        return hash((self.control, tuple(sorted(self.cases.items(), key=repr))))


Cpd = Union[Table, Expression, Partitioned]


# ----------------------------------------------------------------------------
# Nodes


@dataclass(frozen=True)
class DiscreteNode:
    id: str
    states: tuple
    parents: tuple = ()
    cpd: Cpd = None

    kind = "discrete"


@dataclass(frozen=True)
class ContinuousNode:
    id: str
    cpd: Cpd = None
    parents: tuple = ()
    range: tuple | None = None

    kind = "continuous"


Node = Union[DiscreteNode, ContinuousNode]


def _derive_parents(cpd: Cpd, parents) -> tuple:
    if parents is not None:
        return tuple(parents)
    if cpd is None or isinstance(cpd, Table):
        return ()
    return tuple(cpd.referenced())


def _as_head(spec) -> ex.Head:
    if isinstance(spec, str):
        return ex.parse(spec).head
    if isinstance(spec, ex.ParsedCpdExpr):
        return spec.head
    return spec


def discrete(id: str, states: Iterable[str], table, parents: Iterable[str] = ()) -> DiscreteNode:
    """Discrete node; ``table`` is a list of rows (or one row for a root)."""
    rows = table
    if rows and not isinstance(rows[0], (list, tuple)):
        rows = [rows]
    return DiscreteNode(id, tuple(states), tuple(parents),
                        Table(tuple(tuple(float(p) for p in r) for r in rows)))


def continuous(id: str, cpd, parents=None, range=None) -> ContinuousNode:
    """Continuous node from expression text, a parsed head, or a CPD object."""
    if not isinstance(cpd, (Expression, Partitioned, Table)):
        cpd = Expression(_as_head(cpd))
    return ContinuousNode(id, cpd, _derive_parents(cpd, parents),
                          None if range is None else (float(range[0]), float(range[1])))


def partitioned(id: str, control, cases: Mapping, parents=None, range=None) -> ContinuousNode:
    """Continuous node with a partitioned CPD.

    ``cases`` keys may be single labels (one control node) or tuples.
    """
    control = (control,) if isinstance(control, str) else tuple(control)
    norm = {}
    for key, spec in cases.items():
        key = (key,) if isinstance(key, str) else tuple(key)
        norm[key] = _as_head(spec)
    cpd = Partitioned(control, norm)
    return ContinuousNode(id, cpd, _derive_parents(cpd, parents),
                          None if range is None else (float(range[0]), float(range[1])))


# ----------------------------------------------------------------------------
# Network


@dataclass(frozen=True)
class HybridBn:
    nodes: Mapping  # id -> Node, in declaration order
    evidence: Mapping = field(default_factory=dict)

    @classmethod
    def of(cls, nodes: Iterable[Node], evidence: Mapping | None = None) -> "HybridBn":
        table = {}
        for n in nodes:
            if n.id in table:
                raise ValueError(f"duplicate node id {n.id!r}")
            table[n.id] = n
        return cls(table, dict(evidence or {}))

    def __eq__(self, other):
        return (isinstance(other, HybridBn) and list(self.nodes) == list(other.nodes)
                and all(self.nodes[k] == other.nodes[k] for k in self.nodes)
                and dict(self.evidence) == dict(other.evidence))

    __hash__ = None

    def __contains__(self, node_id) -> bool:
        return node_id in self.nodes

    def __getitem__(self, node_id) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(node_id) from None

    def __iter__(self):
        return iter(self.nodes.values())

    def __len__(self):
        return len(self.nodes)

    def ids(self) -> list:
        return list(self.nodes)

    def parents(self, node_id) -> tuple:
        return self[node_id].parents

    def children(self, node_id) -> list:
        return [n.id for n in self if node_id in n.parents]

    def is_discrete(self, node_id) -> bool:
        return isinstance(self[node_id], DiscreteNode)

    def is_continuous(self, node_id) -> bool:
        return isinstance(self[node_id], ContinuousNode)

    def continuous_ids(self) -> list:
        return [n.id for n in self if isinstance(n, ContinuousNode)]

    def discrete_ids(self) -> list:
        return [n.id for n in self if isinstance(n, DiscreteNode)]

    def topological_order(self) -> list:
        """Kahn's algorithm, ties broken by declaration order."""
        indeg = {n.id: sum(1 for p in n.parents if p in self.nodes) for n in self}
        kids = {n.id: [] for n in self}
        for n in self:
            for p in n.parents:
                if p in kids:
                    kids[p].append(n.id)
        pos = {k: i for i, k in enumerate(self.nodes)}
        ready = sorted((k for k, d in indeg.items() if d == 0), key=pos.get)
        out = []
        while ready:
            k = ready.pop(0)
            out.append(k)
            for c in kids[k]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
                    ready.sort(key=pos.get)
        if len(out) != len(self.nodes):
            raise ValueError("network contains a cycle")
        return out

    def with_nodes(self, nodes: Iterable[Node]) -> "HybridBn":
        """New network where nodes with matching ids are replaced and new ones appended."""
        table = dict(self.nodes)
        for n in nodes:
            table[n.id] = n
        return HybridBn(table, dict(self.evidence))

    def with_evidence(self, evidence: Mapping) -> "HybridBn":
        return HybridBn(dict(self.nodes), dict(evidence))

    def state_count(self, node_id) -> int:
        return len(self[node_id].states)


def joint_states(bn: HybridBn, control: Iterable[str]) -> list:
    """Joint states of discrete nodes, row-major (first node slowest)."""
    return list(itertools.product(*(bn[c].states for c in control)))


# ----------------------------------------------------------------------------
# Structural checks


@dataclass(frozen=True, order=True)
class Violation:
    node: str
    kind: str
    message: str

    def __str__(self):
        return f"{self.node}: {self.kind}: {self.message}"


def _find_cycles(bn: HybridBn) -> list:
    """Strongly connected components that contain a cycle (Tarjan)."""
    index, low, stack, on = {}, {}, [], set()
    comps = []
    counter = itertools.count()

    def visit(v):
        index[v] = low[v] = next(counter)
        stack.append(v)
        on.add(v)
        for w in bn.nodes[v].parents:
            if w not in bn.nodes:
                continue
            if w not in index:
                visit(w)
                low[v] = min(low[v], low[w])
            elif w in on:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                on.discard(w)
                comp.append(w)
                if w == v:
                    break
            if len(comp) > 1 or v in bn.nodes[v].parents:
                comps.append(sorted(comp))

    for v in bn.nodes:
        if v not in index:
            visit(v)
    return comps


def _check_head(bn: HybridBn, node: Node, head, out: list, where: str = ""):
    for v in ex.free_vars(head):
        if v not in bn.nodes:
            continue  # reported as unknown-parent
        if bn.is_discrete(v):
            out.append(Violation(node.id, "discrete-in-expression",
                                 f"{where}expression references discrete node {v!r}"))
    for msg in ex.lint(head):
        out.append(Violation(node.id, "zero-divisor", where + msg))
    if isinstance(head, ex.Normal):
        try:
            var = ex.constant_value(head.variance)
        except KeyError:
            var = math.nan
        if not var > 0:
            out.append(Violation(node.id, "normal-variance",
                                 f"{where}variance must be a positive constant"))
    if isinstance(head, ex.Uniform):
        if not ex.free_vars(head.lo) and not ex.free_vars(head.hi):
            if not ex.constant_value(head.lo) < ex.constant_value(head.hi):
                out.append(Violation(node.id, "uniform-bounds", f"{where}requires lo < hi"))


def validate(bn: HybridBn) -> list:
    """Every structural violation, sorted by node id then kind. Empty means valid."""
    out: list = []
    for node in bn:
        cpd = node.cpd
        for p in node.parents:
            if p not in bn.nodes:
                out.append(Violation(node.id, "unknown-parent", f"parent {p!r} does not exist"))
        if len(set(node.parents)) != len(node.parents):
            out.append(Violation(node.id, "duplicate-parent", "parent listed twice"))
        if isinstance(node, DiscreteNode):
            if not node.states:
                out.append(Violation(node.id, "states", "discrete node needs at least one state"))
            if len(set(node.states)) != len(node.states):
                out.append(Violation(node.id, "states", "state labels must be unique"))
            if not isinstance(cpd, Table):
                out.append(Violation(node.id, "cpd-kind", "discrete nodes take a probability table"))
                continue
            if any(p in bn.nodes and bn.is_continuous(p) for p in node.parents):
                out.append(Violation(node.id, "cpd-kind", "table parents must be discrete"))
                continue
            if any(p not in bn.nodes for p in node.parents):
                continue
            n_rows = math.prod(len(bn[p].states) for p in node.parents)
            if len(cpd.rows) != n_rows:
                out.append(Violation(node.id, "table-shape",
                                     f"expected {n_rows} rows, got {len(cpd.rows)}"))
            for i, row in enumerate(cpd.rows):
                if len(row) != len(node.states):
                    out.append(Violation(node.id, "table-shape",
                                         f"row {i} has {len(row)} entries, expected {len(node.states)}"))
                elif any(p < 0 for p in row):
                    out.append(Violation(node.id, "table-negative", f"row {i} has a negative entry"))
                elif abs(sum(row) - 1.0) > 1e-12:
                    out.append(Violation(node.id, "table-row-sum",
                                         f"row {i} sums to {sum(row)!r}"))
            continue

        # continuous
        if node.range is not None and not node.range[0] < node.range[1]:
            out.append(Violation(node.id, "invalid-range", f"range {node.range} needs lo < hi"))
        if isinstance(cpd, Table) or cpd is None:
            out.append(Violation(node.id, "cpd-kind", "continuous nodes take an expression CPD"))
            continue
        if set(cpd.referenced()) != set(node.parents):
            out.append(Violation(node.id, "parent-mismatch",
                                 f"CPD references {sorted(cpd.referenced())}, "
                                 f"graph parents are {sorted(node.parents)}"))
        if isinstance(cpd, Expression):
            _check_head(bn, node, cpd.head, out)
            continue
        bad_control = [c for c in cpd.control if c not in bn.nodes or not bn.is_discrete(c)]
        if bad_control:
            out.append(Violation(node.id, "control-not-discrete",
                                 f"control nodes {bad_control} must be existing discrete nodes"))
            continue
        expected = joint_states(bn, cpd.control)
        missing = [k for k in expected if k not in cpd.cases]
        extra = [k for k in cpd.cases if k not in set(expected)]
        if missing:
            out.append(Violation(node.id, "incomplete-partition",
                                 f"no case for control states {[','.join(k) for k in missing]}"))
        if extra:
            out.append(Violation(node.id, "unknown-case",
                                 f"cases for unknown control states {[','.join(k) for k in extra]}"))
        for key, head in cpd.cases.items():
            _check_head(bn, node, head, out, where=f"case {','.join(key)}: ")

    for comp in _find_cycles(bn):
        out.append(Violation(comp[0], "cycle", "directed cycle through " + " -> ".join(comp)))

    for k, v in bn.evidence.items():
        if k not in bn.nodes:
            out.append(Violation(k, "evidence-unknown-node", "evidence on a node that does not exist"))
        elif bn.is_discrete(k) and v not in bn[k].states:
            out.append(Violation(k, "evidence-value", f"{v!r} is not a state of {k!r}"))
        elif bn.is_continuous(k) and (isinstance(v, (bool, str)) or not math.isfinite(float(v))):
            out.append(Violation(k, "evidence-value", f"{v!r} is not a finite real"))
    return sorted(out, key=lambda v: (v.node, v.kind))


def cpd_size(bn: HybridBn, node_id: str) -> int:
    """Number of variables in the CPD: the node plus its parents."""
    node = bn[node_id]
    return len({node.id, *node.parents})


def continuous_parent_count(bn: HybridBn, node_id: str) -> int:
    return sum(1 for p in bn[node_id].parents if p in bn.nodes and bn.is_continuous(p))


def max_cpd_size(bn: HybridBn) -> int:
    return max((cpd_size(bn, k) for k in bn.nodes), default=0)


def max_continuous_parents(bn: HybridBn) -> int:
    return max((continuous_parent_count(bn, k) for k in bn.nodes), default=0)


def replace_node(node: Node, **changes) -> Node:
    return replace(node, **changes)
