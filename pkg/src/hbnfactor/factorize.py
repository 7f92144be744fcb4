"""Graph rewrites that bound the number of continuous parents per node.

``binary_factorize`` splits arithmetic CPD expressions into chains of
two-operand intermediate nodes. ``stacking_factorize`` rebuilds a
partitioned (mixture) CPD pairwise through a chain of intermediate mixture
nodes, so the child keeps only the control parents plus two continuous ones.
``alpha_weights`` and ``stack_mixture`` are the same recursion at the density
level, used as an oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from . import expr as ex
from .model import (ContinuousNode, DiscreteNode, Expression, HybridBn,
                    Partitioned, Table, continuous_parent_count, cpd_size,
                    joint_states, max_continuous_parents, max_cpd_size)

__all__ = [
    "MixtureSpec", "StackPlan", "CreatedNode", "RewriteReport",
    "UnfactorizedCaseError", "alpha_weights", "stack_mixture",
    "binary_factorize", "stacking_factorize", "sf_bf", "partition_stats",
]

TRUE, FALSE = "True", "False"


class UnfactorizedCaseError(ValueError):
    """A partitioned case still references two or more continuous parents."""


# ----------------------------------------------------------------------------
# Density-level stacking


@dataclass(frozen=True)
class MixtureSpec:
    weights: tuple
    components: tuple  # callables x -> density

    def __post_init__(self):
        if len(self.weights) != len(self.components):
            raise ValueError("need one weight per component")
        if not self.weights:
            raise ValueError("empty mixture")
        if any(w < 0 for w in self.weights):
            raise ValueError("mixture weights must be nonnegative")
        if abs(math.fsum(self.weights) - 1.0) > 1e-12:
            raise ValueError(f"mixture weights sum to {math.fsum(self.weights)!r}, not 1")

    def density(self, x):
        """Direct sum of weighted components."""
        return sum(w * f(x) for w, f in zip(self.weights, self.components))


@dataclass(frozen=True)
class StackPlan:
    """Stacking coefficients; ``alphas[k-1]`` weights g_{k-1} (or f_1) in g_k."""

    alphas: tuple
    exact: tuple = ()
    order: tuple = ()


def _rational(w) -> Fraction:
    if isinstance(w, Fraction):
        return w
    if isinstance(w, int):
        return Fraction(w)
    # shortest decimal form, so 0.1 is 1/10 rather than its binary expansion
    return Fraction(repr(float(w)))


def alpha_weights(weights: Sequence[float]) -> StackPlan:
    """Coefficients of the stacking recursion.

    ``alpha_k = (w_1 + ... + w_k) / (w_1 + ... + w_{k+1})`` for
    ``k = 1 .. n-1``, computed in rational arithmetic. A zero denominator
    (no mass in the first k+1 components) gives ``alpha_k = 0``.

    >>> alpha_weights([0.1, 0.2, 0.3, 0.4]).exact
    (Fraction(1, 3), Fraction(1, 2), Fraction(3, 5))
    """
    ws = list(weights)
    if any(w < 0 for w in ws):
        raise ValueError("weights must be nonnegative")
    if abs(math.fsum(float(w) for w in ws) - 1.0) > 1e-9:
        raise ValueError(f"weights sum to {math.fsum(float(w) for w in ws)!r}, not 1")
    qs = [_rational(w) for w in ws]
    exact = []
    prefix = Fraction(0)
    for k in range(len(qs) - 1):
        prefix += qs[k]
        denom = prefix + qs[k + 1]
        exact.append(prefix / denom if denom > 0 else Fraction(0))
    return StackPlan(tuple(float(a) for a in exact), tuple(exact), tuple(range(len(ws))))


def stack_mixture(spec: MixtureSpec, x):
    """Evaluate the mixture density through the stacked densities g_1 .. g_{n-1}."""
    fs = spec.components
    if len(fs) == 1:
        return fs[0](x)
    alphas = alpha_weights(spec.weights).alphas
    g = alphas[0] * fs[0](x) + (1 - alphas[0]) * fs[1](x)
    for k in range(1, len(fs) - 1):
        g = alphas[k] * g + (1 - alphas[k]) * fs[k + 1](x)
    return g


# ----------------------------------------------------------------------------
# Rewrite bookkeeping


@dataclass(frozen=True)
class CreatedNode:
    id: str
    role: str  # "E" (binary factorization), "F" (stacked mixture), "B" (indicator)
    owner: str  # the child whose CPD was rewritten


@dataclass
class RewriteReport:
    created: list = field(default_factory=list)
    rewritten: dict = field(default_factory=dict)  # node -> (size before, size after)
    max_cpd_size: tuple = (0, 0)
    max_continuous_parents: tuple = (0, 0)
    partitions: dict = field(default_factory=dict)  # node -> {"K": .., "Q": ..}

    @property
    def is_empty(self) -> bool:
        return not self.created and not self.rewritten

    def created_ids(self, role: str | None = None) -> list:
        return [c.id for c in self.created if role is None or c.role == role]

    def to_dict(self) -> dict:
        return {
            "created": [{"id": c.id, "role": c.role, "owner": c.owner} for c in self.created],
            "rewritten": {k: {"before": b, "after": a} for k, (b, a) in self.rewritten.items()},
            "max_cpd_size": {"before": self.max_cpd_size[0], "after": self.max_cpd_size[1]},
            "max_potential_size": {"before": self.max_cpd_size[0], "after": self.max_cpd_size[1]},
            "max_continuous_parents": {"before": self.max_continuous_parents[0],
                                       "after": self.max_continuous_parents[1]},
            "partitions": self.partitions,
        }


def partition_stats(bn: HybridBn) -> dict:
    """Per partitioned node: K components and Q factorizable continuous parents.

    Q counts distinct continuous parents that occur in case expressions
    referencing more than one variable.
    """
    out = {}
    for node in bn:
        if isinstance(node.cpd, Partitioned):
            multi = set()
            for head in node.cpd.cases.values():
                vs = ex.free_vars(head)
                if len(vs) > 1:
                    multi.update(vs)
            out[node.id] = {"K": len(node.cpd.cases), "Q": len(multi)}
    return out


def _finish(before: HybridBn, after: HybridBn, created, rewritten) -> RewriteReport:
    return RewriteReport(
        created=list(created),
        rewritten=dict(rewritten),
        max_cpd_size=(max_cpd_size(before), max_cpd_size(after)),
        max_continuous_parents=(max_continuous_parents(before), max_continuous_parents(after)),
        partitions=partition_stats(before),
    )


def _namer(owner: str, role: str, start: int, taken: set) -> Callable[[], str]:
    counter = [start]

    def fresh() -> str:
        base = f"{owner}_{role}{counter[0]}"
        counter[0] += 1
        name, r = base, 0
        while name in taken:
            r += 1
            name = f"{base}_r{r}"
        taken.add(name)
        return name

    return fresh


# ----------------------------------------------------------------------------
# Binary factorization


def _var_count(node) -> int:
    return len(ex.free_vars(node))


def _leftmost_innermost(args) -> ex.Expr | None:
    """First BinOp in left-to-right post-order that references >= 2 variables."""

    def visit(node):
        if isinstance(node, ex.BinOp):
            for child in (node.left, node.right):
                hit = visit(child)
                if hit is not None:
                    return hit
            if _var_count(node) >= 2:
                return node
        return None

    for a in args:
        hit = visit(a)
        if hit is not None:
            return hit
    return None


def _factor_head(head, limit: int, fresh, owner: str, new_nodes: list, created: list):
    """Extract sub-expressions of ``head`` into Arithmetic intermediates until it
    references at most ``limit`` variables. Returns the rewritten head."""
    while len(ex.free_vars(head)) > limit:
        sub = _leftmost_innermost(head.args)
        name = fresh()
        created.append(_created(name, "E", owner))
        if sub is None:
            # variables spread over separate head arguments: move the whole
            # distribution into a stochastic intermediate
            inner = _factor_head(head, 2, fresh, owner, new_nodes, created)
            new_nodes.append(ContinuousNode(name, Expression(inner), ex.free_vars(inner)))
            return ex.Arithmetic(ex.Var(name))
        new_nodes.append(ContinuousNode(name, Expression(ex.Arithmetic(sub)), ex.free_vars(sub)))
        head, _ = ex.substitute(head, sub, name)
    return head


def _created(name, role, owner):
    return CreatedNode(name, role, owner)


def binary_factorize(bn: HybridBn):
    """Decompose expression CPDs into two-operand intermediates.

    Plain expressions end with at most two continuous parents; every case of
    a partitioned CPD ends with at most one, so a later stacking pass can
    pair components. Returns ``(new_bn, report)``.
    """
    taken = set(bn.nodes)
    out_nodes = []
    created: list = []
    rewritten = {}
    for node in bn:
        cpd = node.cpd
        new_nodes: list = []
        fresh = _namer(node.id, "E", 0, taken)
        if isinstance(node, ContinuousNode) and isinstance(cpd, Expression):
            head = _factor_head(cpd.head, 2, fresh, node.id, new_nodes, created)
            if head != cpd.head:
                node = ContinuousNode(node.id, Expression(head), ex.free_vars(head), node.range)
        elif isinstance(node, ContinuousNode) and isinstance(cpd, Partitioned):
            cases = {}
            for key, head in cpd.ordered_cases(bn):
                cases[key] = _factor_head(head, 1, fresh, node.id, new_nodes, created)
            if cases != dict(cpd.cases):
                new_cpd = Partitioned(cpd.control, cases)
                node = ContinuousNode(node.id, new_cpd, new_cpd.referenced(), node.range)
        if new_nodes:
            rewritten[node.id] = (cpd_size(bn, node.id), len({node.id, *node.parents}))
        out_nodes.extend(new_nodes)
        out_nodes.append(node)
    if not created:
        return bn, _finish(bn, bn, [], {})
    result = HybridBn.of(out_nodes, bn.evidence)
    return result, _finish(bn, result, created, rewritten)


# ----------------------------------------------------------------------------
# Stacking factorization


def _needs_stacking(bn: HybridBn, node) -> bool:
    cpd = node.cpd
    return (isinstance(cpd, Partitioned) and len(cpd.cases) > 2
            and continuous_parent_count(bn, node.id) > 2)


def stacking_factorize(bn: HybridBn, mode: str = "compact"):
    """Rebuild each partitioned CPD with n > 2 components as a chain.

    For components f_1 .. f_n in control-state order, compact mode creates
    intermediates F_1 .. F_{n-2} whose CPD, for the j-th control state, is

    * F_1:  f_1 if j <= 1 else f_2
    * F_i:  Arithmetic(F_{i-1}) if j <= i else f_{i+1}
    * C:    Arithmetic(F_{n-2}) if j < n else f_n

    Explicit mode conditions F_i on an indicator node B_i (True iff j <= i)
    instead of on the control nodes. Nodes whose CPD already has at most two
    continuous parents are left alone. Returns ``(new_bn, report)``.
    """
    if mode not in ("compact", "explicit"):
        raise ValueError(f"unknown mode {mode!r}")
    for node in bn:
        if isinstance(node.cpd, Partitioned) and _needs_stacking(bn, node):
            for key, head in node.cpd.cases.items():
                if len(ex.free_vars(head)) >= 2:
                    raise UnfactorizedCaseError(
                        f"node {node.id!r}, case {','.join(key)!r} references "
                        f"{list(ex.free_vars(head))}; run binary_factorize first")

    taken = set(bn.nodes)
    out_nodes = []
    created: list = []
    rewritten = {}
    for node in bn:
        if not _needs_stacking(bn, node):
            out_nodes.append(node)
            continue
        cpd = node.cpd
        keys = joint_states(bn, cpd.control)
        comps = [cpd.cases[k] for k in keys]
        n = len(comps)
        fresh_f = _namer(node.id, "F", 1, taken)
        f_ids = [fresh_f() for _ in range(n - 2)]

        if mode == "compact":
            def chain_cpd(i, link):
                # i is 1-based position in the chain; link is the stacked head
                return Partitioned(cpd.control, {
                    k: (link if j <= i else comps[i]) for j, k in enumerate(keys, start=1)})
        else:
            fresh_b = _namer(node.id, "B", 1, taken)
            b_ids = [fresh_b() for _ in range(n - 1)]
            for i, b in enumerate(b_ids, start=1):
                rows = tuple((1.0, 0.0) if j <= i else (0.0, 1.0) for j in range(1, n + 1))
                out_nodes.append(DiscreteNode(b, (TRUE, FALSE), tuple(cpd.control), Table(rows)))
                created.append(_created(b, "B", node.id))

            def chain_cpd(i, link):
                return Partitioned((b_ids[i - 1],), {(TRUE,): link, (FALSE,): comps[i]})

        for i, f in enumerate(f_ids, start=1):
            link = comps[0] if i == 1 else ex.Arithmetic(ex.Var(f_ids[i - 2]))
            f_cpd = chain_cpd(i, link)
            out_nodes.append(ContinuousNode(f, f_cpd, f_cpd.referenced(), node.range))
            created.append(_created(f, "F", node.id))

        child_cpd = chain_cpd(n - 1, ex.Arithmetic(ex.Var(f_ids[-1])))
        new_child = ContinuousNode(node.id, child_cpd, child_cpd.referenced(), node.range)
        rewritten[node.id] = (cpd_size(bn, node.id), len({node.id, *new_child.parents}))
        out_nodes.append(new_child)

    if not created:
        return bn, _finish(bn, bn, [], {})
    result = HybridBn.of(out_nodes, bn.evidence)
    return result, _finish(bn, result, created, rewritten)


def merge_reports(first: RewriteReport, second: RewriteReport) -> RewriteReport:
    rewritten = dict(first.rewritten)
    for k, (b, a) in second.rewritten.items():
        rewritten[k] = (rewritten[k][0] if k in rewritten else b, a)
    return RewriteReport(
        created=first.created + second.created,
        rewritten=rewritten,
        max_cpd_size=(first.max_cpd_size[0], second.max_cpd_size[1]),
        max_continuous_parents=(first.max_continuous_parents[0],
                                second.max_continuous_parents[1]),
        partitions=first.partitions,
    )


def sf_bf(bn: HybridBn, mode: str = "compact"):
    """Binary factorization followed by stacking factorization."""
    mid, r1 = binary_factorize(bn)
    out, r2 = stacking_factorize(mid, mode)
    return out, merge_reports(r1, r2)
