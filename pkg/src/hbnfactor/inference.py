"""Exact discrete inference: junction trees and a brute-force oracle.

Potential tables are numpy arrays whose axes follow the scope variables sorted
by node id. Messages are normalized as they are passed; the discarded scale
factors accumulate into the log probability of the evidence.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "Factor", "MarkovNet", "JunctionTree", "Calibrated", "MarginalTable",
    "JointTable", "Metrics", "StateSpaceTooLarge",
    "moralize", "triangulate", "build_jt", "propagate", "marginal",
    "brute_force_joint", "metrics", "compile_jt", "infer",
]

MAX_JOINT_STATES = 10 ** 7


class StateSpaceTooLarge(ValueError):
    pass


# ----------------------------------------------------------------------------
# Factors


@dataclass
class Factor:
    vars: tuple
    values: np.ndarray

    def __post_init__(self):
        if list(self.vars) != sorted(self.vars):
            order = sorted(range(len(self.vars)), key=lambda i: self.vars[i])
            self.values = np.transpose(self.values, order)
            self.vars = tuple(self.vars[i] for i in order)
        if self.values.ndim != len(self.vars):
            raise ValueError(f"factor over {self.vars} has {self.values.ndim} axes")

    @property
    def size(self) -> int:
        return int(self.values.size)

    def marginalize(self, keep: Iterable[str]) -> "Factor":
        keep = set(keep)
        axes = tuple(i for i, v in enumerate(self.vars) if v not in keep)
        return Factor(tuple(v for v in self.vars if v in keep), self.values.sum(axis=axes))


def _einsum(factors: list, keep: list, index: dict) -> np.ndarray:
    operands = []
    for vars_, values in factors:
        operands += [values, [index[v] for v in vars_]]
    return np.einsum(*operands, [index[v] for v in keep])


def contract(factors: list, keep: Iterable[str], cards: Mapping | None = None) -> np.ndarray:
    """Sum-product of ``factors`` onto ``keep`` (axes in the given order).

    Summed-out variables are eliminated one at a time, cheapest intermediate
    table first. Variables of ``keep`` that no factor mentions are broadcast
    as ones, which needs their cardinalities in ``cards``.
    """
    keep = list(keep)
    if not factors:
        raise ValueError("nothing to contract")
    universe = sorted({v for f in factors for v in f.vars} | set(keep))
    if len(universe) > 52:
        raise ValueError("too many variables in one contraction")
    index = {v: i for i, v in enumerate(universe)}
    size = {}
    for f in factors:
        size.update(zip(f.vars, f.values.shape))
    work = [(tuple(f.vars), f.values) for f in factors]
    missing = [v for v in keep if v not in size]
    if missing:
        if cards is None:
            raise ValueError(f"no factor mentions {missing}")
        work += [((v,), np.ones(cards[v])) for v in missing]

    keep_set = set(keep)
    pending = {v for v in size if v not in keep_set}
    while pending and len(work) > 2:
        def cost(v):
            scope = set().union(*(fv for fv, _ in work if v in fv))
            return math.prod(size[u] for u in scope), v
        v = min(pending, key=cost)
        pending.discard(v)
        touching = [w for w in work if v in w[0]]
        rest = [w for w in work if v not in w[0]]
        scope = sorted(set().union(*(fv for fv, _ in touching)) - {v})
        work = rest + [(tuple(scope), _einsum(touching, scope, index))]
    return _einsum(work, keep, index)


# ----------------------------------------------------------------------------
# Graph structure


@dataclass
class MarkovNet:
    adjacency: dict  # var -> set of neighbours
    potentials: list  # Factor or tuple scope

    def edges(self) -> set:
        return {tuple(sorted((a, b))) for a, ns in self.adjacency.items() for b in ns}


def _scopes(potentials) -> list:
    return [tuple(p.vars) if isinstance(p, Factor) else tuple(sorted(p)) for p in potentials]


def moralize_scopes(variables: Iterable[str], scopes: Iterable[Iterable[str]]) -> dict:
    adj = {v: set() for v in variables}
    for scope in scopes:
        for a, b in itertools.combinations(scope, 2):
            if a != b:
                adj.setdefault(a, set()).add(b)
                adj.setdefault(b, set()).add(a)
    return adj


def moralize(dbn) -> MarkovNet:
    """Undirected graph in which every CPD family is a clique.

    Accepts a compiled ``DiscretizedBn`` (potentials are its factors) or a
    ``HybridBn`` (potentials are bare family scopes).
    """
    if hasattr(dbn, "factors"):
        pots = list(dbn.factors.values())
        variables = list(dbn.cards)
    else:
        pots = [tuple(sorted({n.id, *n.parents})) for n in dbn]
        variables = dbn.ids()
    return MarkovNet(moralize_scopes(variables, _scopes(pots)), pots)


def _fill_cost(adj: dict, v) -> int:
    ns = sorted(adj[v])
    return sum(1 for a, b in itertools.combinations(ns, 2) if b not in adj[a])


def triangulate(mn) -> tuple:
    """Greedy min-fill elimination.

    Ties go to the node with fewest neighbours, then to the smaller id.
    Returns ``(chordal_adjacency, elimination_order, fill_edges)``.
    """
    adj = mn.adjacency if isinstance(mn, MarkovNet) else mn
    work = {v: set(ns) for v, ns in adj.items()}
    chordal = {v: set(ns) for v, ns in adj.items()}
    order, fills = [], []
    while work:
        v = min(work, key=lambda u: (_fill_cost(work, u), len(work[u]), u))
        ns = sorted(work[v])
        for a, b in itertools.combinations(ns, 2):
            if b not in work[a]:
                work[a].add(b)
                work[b].add(a)
                chordal[a].add(b)
                chordal[b].add(a)
                fills.append((a, b))
        for u in ns:
            work[u].discard(v)
        del work[v]
        order.append(v)
    return chordal, order, fills


def elimination_cliques(chordal: dict, order: list) -> list:
    """Maximal cliques of a chordal graph given a perfect elimination order."""
    pos = {v: i for i, v in enumerate(order)}
    cands = []
    for v in order:
        cands.append(frozenset({v} | {u for u in chordal[v] if pos[u] > pos[v]}))
    out = []
    for c in cands:
        if not any(c < d for d in cands) and c not in out:
            out.append(c)
    return out


@dataclass
class JunctionTree:
    clusters: list  # list of tuple(sorted vars)
    edges: list  # (i, j, separator tuple)
    cards: dict
    assignment: dict = field(default_factory=dict)  # cluster index -> [Factor]
    potentials: list = field(default_factory=list)

    @property
    def tree_width(self) -> int:
        return max((len(c) for c in self.clusters), default=1) - 1

    @property
    def max_potential_size(self) -> int:
        return max((len(p.vars) if isinstance(p, Factor) else len(p) for p in self.potentials),
                   default=0)

    def neighbours(self, i) -> list:
        out = []
        for a, b, sep in self.edges:
            if a == i:
                out.append((b, sep))
            elif b == i:
                out.append((a, sep))
        return out

    def entries(self) -> int:
        return sum(math.prod(self.cards[v] for v in c) for c in self.clusters)

    def check_running_intersection(self) -> bool:
        for v in self.cards:
            holders = [i for i, c in enumerate(self.clusters) if v in c]
            if not holders:
                continue
            # the holders must induce a connected subtree
            seen, stack = {holders[0]}, [holders[0]]
            while stack:
                i = stack.pop()
                for j, sep in self.neighbours(i):
                    if j not in seen and v in self.clusters[j]:
                        seen.add(j)
                        stack.append(j)
            if seen != set(holders):
                return False
        return True


def build_jt(chordal: dict, order: list, potentials, cards: Mapping | None = None) -> JunctionTree:
    """Clique tree with maximum total separator size (Kruskal).

    Clusters in different connected components are joined by empty
    separators, so the result is always a single tree.
    """
    cliques = [tuple(sorted(c)) for c in elimination_cliques(chordal, order)]
    if not cliques:
        cliques = [()]
    cards = dict(cards or {v: 1 for v in chordal})
    cand = []
    for i, j in itertools.combinations(range(len(cliques)), 2):
        sep = tuple(sorted(set(cliques[i]) & set(cliques[j])))
        cand.append((-len(sep), i, j, sep))
    cand.sort()
    parent = list(range(len(cliques)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    edges = []
    for _, i, j, sep in cand:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            edges.append((i, j, sep))

    assignment = {i: [] for i in range(len(cliques))}
    pots = list(potentials)
    for p in pots:
        scope = set(p.vars if isinstance(p, Factor) else p)
        for i, c in enumerate(cliques):
            if scope <= set(c):
                assignment[i].append(p)
                break
        else:
            raise ValueError(f"no cluster contains potential scope {sorted(scope)}")
    return JunctionTree(cliques, edges, cards, assignment, pots)


# ----------------------------------------------------------------------------
# Propagation


@dataclass
class MarginalTable:
    node: str
    states: list
    probs: np.ndarray

    def to_dict(self) -> dict:
        return {"states": list(self.states), "probs": [float(p) for p in self.probs]}


@dataclass
class Calibrated:
    jt: JunctionTree
    consistent: bool
    log_evidence: float
    beliefs: list  # normalized cluster beliefs (Factor) or [] when inconsistent
    messages: dict

    def _holder(self, variables) -> int:
        vs = set(variables)
        best = None
        for i, c in enumerate(self.jt.clusters):
            if vs <= set(c) and (best is None or len(c) < len(self.jt.clusters[best])):
                best = i
        if best is None:
            raise KeyError(f"no cluster holds {sorted(vs)}")
        return best

    def joint(self, variables, cluster: int | None = None) -> Factor:
        """Posterior over variables that share a cluster."""
        if not self.consistent:
            raise ValueError("zero-mass evidence: no posterior")
        i = self._holder(variables) if cluster is None else cluster
        f = self.beliefs[i].marginalize(variables)
        return Factor(f.vars, f.values / f.values.sum())

    def marginal(self, node: str, cluster: int | None = None) -> np.ndarray:
        return self.joint([node], cluster).values

    def separator_gap(self) -> float:
        """Largest disagreement between the two projections onto any separator."""
        gap = 0.0
        for i, j, sep in self.jt.edges:
            a = self.beliefs[i].marginalize(sep).values
            b = self.beliefs[j].marginalize(sep).values
            gap = max(gap, float(np.max(np.abs(a - b))) if a.size else 0.0)
        return gap


def _evidence_factors(evidence: Mapping, cards: Mapping) -> list:
    out = []
    for v, idx in evidence.items():
        if v not in cards:
            raise KeyError(f"evidence on unknown variable {v!r}")
        vec = np.zeros(cards[v])
        vec[idx] = 1.0
        out.append(Factor((v,), vec))
    return out


def propagate(jt: JunctionTree, evidence: Mapping | None = None) -> Calibrated:
    """Two-pass sum-product (collect to cluster 0, then distribute).

    ``evidence`` maps variables to state indices. Zero total mass yields a
    result with ``consistent=False`` rather than an exception.
    """
    evidence = dict(evidence or {})
    n = len(jt.clusters)
    local = {i: list(jt.assignment.get(i, [])) for i in range(n)}
    for f in _evidence_factors(evidence, jt.cards):
        local[min(i for i, c in enumerate(jt.clusters) if f.vars[0] in c)].append(f)

    base = []
    for i, c in enumerate(jt.clusters):
        fs = local[i]
        if fs:
            base.append(Factor(c, contract(fs, c, jt.cards) if len(fs) > 1 or set(fs[0].vars) != set(c)
                               else fs[0].values.copy()))
        else:
            base.append(Factor(c, np.ones(tuple(jt.cards[v] for v in c))))

    # rooted traversal from cluster 0
    order, parent = [], {0: None}
    stack = [0]
    while stack:
        i = stack.pop()
        order.append(i)
        for j, _ in sorted(jt.neighbours(i), reverse=True):
            if j not in parent:
                parent[j] = i
                stack.append(j)
    sep_of = {}
    for a, b, sep in jt.edges:
        sep_of[(a, b)] = sep_of[(b, a)] = sep

    messages = {}
    log_z = 0.0

    def send(i, j) -> float:
        incoming = [messages[(k, i)] for k, _ in jt.neighbours(i) if k != j]
        vals = contract([base[i]] + incoming, sep_of[(i, j)])
        total = float(vals.sum())
        if not total > 0:
            messages[(i, j)] = Factor(sep_of[(i, j)], np.zeros_like(vals))
            return -math.inf
        messages[(i, j)] = Factor(sep_of[(i, j)], vals / total)
        return math.log(total)

    for i in reversed(order):
        if parent[i] is not None:
            log_z += send(i, parent[i])
    root = contract([base[0]] + [messages[(k, 0)] for k, _ in jt.neighbours(0)], jt.clusters[0])
    root_total = float(np.sum(root))
    if not (root_total > 0 and math.isfinite(log_z)):
        return Calibrated(jt, False, -math.inf, [], messages)
    log_z += math.log(root_total)
    for i in order:
        if parent[i] is not None:
            send(parent[i], i)

    beliefs = []
    for i, c in enumerate(jt.clusters):
        vals = contract([base[i]] + [messages[(k, i)] for k, _ in jt.neighbours(i)], c)
        beliefs.append(Factor(c, vals / vals.sum()))
    return Calibrated(jt, True, log_z, beliefs, messages)


def marginal(cal: Calibrated, node: str, states=None) -> MarginalTable:
    probs = cal.marginal(node)
    return MarginalTable(node, list(states) if states is not None else list(range(len(probs))), probs)


# ----------------------------------------------------------------------------
# Brute force oracle


@dataclass
class JointTable:
    factor: Factor | None
    consistent: bool

    def marginal(self, node: str) -> np.ndarray:
        f = self.factor.marginalize([node])
        return f.values

    def project(self, variables) -> Factor:
        return self.factor.marginalize(variables)


def brute_force_joint(dbn, evidence: Mapping | None = None, keep: Iterable[str] | None = None,
                      limit: int = MAX_JOINT_STATES) -> JointTable:
    """Normalized product of every CPD table, filtered by evidence.

    With ``keep`` the remaining variables are summed out inside the
    contraction. ``evidence`` maps variables to state indices; ``None`` means
    the model's own evidence.
    """
    cards = dbn.cards
    variables = sorted(cards)
    keep = variables if keep is None else sorted(keep)
    size = math.prod(cards[v] for v in keep)
    if size > limit:
        raise StateSpaceTooLarge(f"joint over {len(keep)} variables has {size} entries")
    if evidence is None:
        evidence = dbn.evidence_index()
    factors = list(dbn.factors.values()) + _evidence_factors(evidence, cards)
    vals = contract(factors, keep)
    total = float(vals.sum())
    if not total > 0:
        return JointTable(None, False)
    return JointTable(Factor(tuple(keep), vals / total), True)


# ----------------------------------------------------------------------------
# Metrics and conveniences


@dataclass
class Metrics:
    tree_width: int
    max_potential_size: int
    cluster_sizes: list
    clusters: list

    def to_dict(self) -> dict:
        return {"tree_width": self.tree_width, "max_potential_size": self.max_potential_size,
                "clusters": [list(c) for c in self.clusters]}


def structure_jt(model) -> JunctionTree:
    mn = moralize(model)
    chordal, order, _ = triangulate(mn)
    cards = dict(model.cards) if hasattr(model, "cards") else None
    return build_jt(chordal, order, mn.potentials, cards)


def metrics(model) -> Metrics:
    """Tree-width and potential sizes of a HybridBn or a DiscretizedBn."""
    jt = structure_jt(model)
    return Metrics(jt.tree_width, jt.max_potential_size,
                   [len(c) for c in jt.clusters], list(jt.clusters))


def compile_jt(dbn) -> JunctionTree:
    return structure_jt(dbn)


def infer(dbn, evidence: Mapping | None = None) -> Calibrated:
    """Build a junction tree for a compiled model and propagate its evidence."""
    jt = compile_jt(dbn)
    return propagate(jt, dbn.evidence_index() if evidence is None else evidence)
