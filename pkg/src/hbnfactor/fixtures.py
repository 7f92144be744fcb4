"""Generators for the reference networks.

Conventions shared by every generator: discrete control nodes get a uniform
prior, parentless continuous nodes are Normal, nodes with only continuous
parents are sums, and nodes with a discrete and continuous parents are
partitioned expressions with Arithmetic components.
"""

from __future__ import annotations

import os
import random

from .factorize import binary_factorize, sf_bf
from .model import HybridBn, continuous, discrete, partitioned

__all__ = ["FIXTURES", "gen_fixture", "fig7", "random_partitioned", "v_structure", "seed_from_env"]


def _uniform(k: int) -> list:
    return [1.0 / k] * k if k != 3 else [1 / 3, 1 / 3, 1 - 2 / 3]


def _states(k: int, prefix: str = "d") -> list:
    return [f"{prefix}{i}" for i in range(1, k + 1)]


def _sum(names) -> str:
    return " + ".join(names)


def fig1a() -> HybridBn:
    """Complete DAG on X0..X4; every non-root node is the sum of its parents."""
    nodes = [continuous("X0", "Normal(0, 1)")]
    for i in range(1, 5):
        nodes.append(continuous(f"X{i}", f"Arithmetic({_sum(f'X{j}' for j in range(i))})"))
    return HybridBn.of(nodes)


def fig1b() -> HybridBn:
    return binary_factorize(fig1a())[0]


def fig2() -> HybridBn:
    """Discrete D (4 states), constant parents X1..X4, partitioned child C.

    The constants and the observed value of C are stand-ins; the text gives
    only the structure and the partitioned CPD.
    """
    nodes = [discrete("D", _states(4), _uniform(4))]
    for i, tau in enumerate((10, 20, 30, 40), start=1):
        nodes.append(continuous(f"X{i}", f"Arithmetic({tau})"))
    nodes.append(partitioned("C", "D", {
        "d1": "Normal(X1 + X2 + X3, 1000)",
        "d2": "Normal(X2, 1000)",
        "d3": "Normal(X3, 1000)",
        "d4": "Normal(X4, 1000)",
    }))
    return HybridBn.of(nodes, {"C": 50.0})


def fig4_analog() -> HybridBn:
    """D uniform over 3 states, X_i ~ Normal(10 i, 100), C = Arithmetic(X_j) when D = d_j."""
    nodes = [discrete("D", _states(3), _uniform(3))]
    for i in (1, 2, 3):
        nodes.append(continuous(f"X{i}", f"Normal({10 * i}, 100)"))
    nodes.append(partitioned("C", "D", {f"d{i}": f"Arithmetic(X{i})" for i in (1, 2, 3)}))
    return HybridBn.of(nodes)


def fig6() -> HybridBn:
    return sf_bf(fig2())[0]


# ----------------------------------------------------------------------------
# Benchmark suite


def _roots(names) -> list:
    return [continuous(x, "Normal(0, 1)") for x in names]


def fig7(case: int) -> HybridBn:
    """Six benchmark networks of increasing cost, indexed 1..6.

    Every case has a uniform discrete control ``D``, standard Normal roots,
    sum nodes for continuous-only parents and a partitioned child ``C``
    whose components are ``Arithmetic`` of one continuous node each, except
    in case 6 where one component is a sum. The topologies:

    ======  =====  ==========================================  ======================
    case    |D|    continuous nodes                            components of C
    ======  =====  ==========================================  ======================
    1       3      X1, X2, X3 roots; X4 = X1 + X2              X2, X3, X4
    2       3      X1 root; X2 = X1; X3 = X1 + X2;             X2, X3, X4
                   X4 = X1 + X2 + X3
    3       3      X1..X4 roots; X5 = X1 + X2                  X3, X4, X5
    4       5      X1..X5 roots                                X1..X5
    5       5      X1..X4 roots; X5 = X1 + X2                  X1..X5
    6       6      X1..X5 roots                                X1..X5, X1 + X5
    ======  =====  ==========================================  ======================
    """
    if case not in FIG7_CASES:
        raise ValueError(f"fig7 case must be 1..6, got {case!r}")
    return FIG7_CASES[case]()


def _mixture(components) -> object:
    return partitioned("C", "D", {f"d{i}": f"Arithmetic({c})"
                                  for i, c in enumerate(components, start=1)})


def _fig7_1() -> HybridBn:
    return HybridBn.of([
        discrete("D", _states(3), _uniform(3)),
        *_roots(["X1", "X2", "X3"]),
        continuous("X4", "Arithmetic(X1 + X2)"),
        _mixture(["X2", "X3", "X4"]),
    ])


def _fig7_2() -> HybridBn:
    return HybridBn.of([
        discrete("D", _states(3), _uniform(3)),
        *_roots(["X1"]),
        continuous("X2", "Arithmetic(X1)"),
        continuous("X3", "Arithmetic(X1 + X2)"),
        continuous("X4", "Arithmetic(X1 + X2 + X3)"),
        _mixture(["X2", "X3", "X4"]),
    ])


def _fig7_3() -> HybridBn:
    return HybridBn.of([
        discrete("D", _states(3), _uniform(3)),
        *_roots(["X1", "X2", "X3", "X4"]),
        continuous("X5", "Arithmetic(X1 + X2)"),
        _mixture(["X3", "X4", "X5"]),
    ])


def _fig7_4() -> HybridBn:
    names = [f"X{i}" for i in range(1, 6)]
    return HybridBn.of([discrete("D", _states(5), _uniform(5)), *_roots(names),
                        _mixture(names)])


def _fig7_5() -> HybridBn:
    names = [f"X{i}" for i in range(1, 6)]
    return HybridBn.of([
        discrete("D", _states(5), _uniform(5)),
        *_roots(names[:4]),
        continuous("X5", "Arithmetic(X1 + X2)"),
        _mixture(names),
    ])


def _fig7_6() -> HybridBn:
    names = [f"X{i}" for i in range(1, 6)]
    return HybridBn.of([discrete("D", _states(6), _uniform(6)), *_roots(names),
                        _mixture(names + ["X1 + X5"])])


FIG7_CASES = {1: _fig7_1, 2: _fig7_2, 3: _fig7_3, 4: _fig7_4, 5: _fig7_5, 6: _fig7_6}


# ----------------------------------------------------------------------------
# Property-test generators


def v_structure(n: int, head: str = "Arithmetic") -> HybridBn:
    """n continuous roots feeding one partitioned child controlled by D (n states)."""
    nodes = [discrete("D", _states(n), _uniform(n))]
    nodes += [continuous(f"X{i}", f"Normal({i}, 1)") for i in range(1, n + 1)]
    fmt = "Arithmetic(X{i})" if head == "Arithmetic" else "Normal(X{i}, 2)"
    nodes.append(partitioned("C", "D", {f"d{i}": fmt.format(i=i) for i in range(1, n + 1)}))
    return HybridBn.of(nodes)


def random_partitioned(seed: int, max_components: int = 5, max_roots: int = 4) -> HybridBn:
    """Random mixture network: a discrete control D, continuous Normal roots on
    integer means, and a partitioned child whose cases are sums of one to
    three roots (Normal or Arithmetic heads) or a constant Normal."""
    rng = random.Random(seed)
    n = rng.randint(2, max_components)
    r = rng.randint(1, max_roots)
    prior = [rng.random() + 0.05 for _ in range(n)]
    s = sum(prior)
    prior = [p / s for p in prior]
    prior[-1] = 1.0 - sum(prior[:-1])
    roots = [f"X{i}" for i in range(1, r + 1)]
    nodes = [discrete("D", _states(n), prior)]
    nodes += [continuous(x, f"Normal({rng.randint(-1, 1)}, {rng.choice([0.5, 1, 2])})")
              for x in roots]
    cases = {}
    for j in range(1, n + 1):
        kind = rng.random()
        if kind < 0.1:
            cases[f"d{j}"] = f"Normal({rng.randint(-2, 2)}, {rng.choice([1, 3])})"
            continue
        picked = rng.sample(roots, rng.randint(1, min(3, r)))
        body = _sum(picked)
        if kind < 0.55:
            cases[f"d{j}"] = f"Arithmetic({body})"
        else:
            cases[f"d{j}"] = f"Normal({body}, {rng.choice([0.5, 1, 4])})"
    nodes.append(partitioned("C", "D", cases, range=(-8, 8)))
    return HybridBn.of(nodes)


def seed_from_env(default: int = 0) -> int:
    return int(os.environ.get("HBNF_SEED", default))


FIXTURES = {
    "fig1a": fig1a,
    "fig1b": fig1b,
    "fig2": fig2,
    "fig4_analog": fig4_analog,
    "fig6": fig6,
    **{f"fig7_{k}": (lambda k=k: fig7(k)) for k in range(1, 7)},
    "random_partitioned": lambda: random_partitioned(seed_from_env()),
}


def gen_fixture(name: str) -> HybridBn:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise ValueError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}") from None
