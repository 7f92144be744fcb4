"""Benchmark harness: factorize, dynamically discretize and propagate the
fig7 suite under time and memory budgets, one CSV row per case and variant.

The memory budget counts junction-tree cluster-table entries. Before every
compilation the harness projects the entries the next junction tree would
allocate and gives up with reason ``memory`` when the projection exceeds the
budget. Elapsed wall time is checked at the same points (reason ``time``).
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from .discretize import BudgetExceeded, DDConfig, dynamic_discretize
from .factorize import binary_factorize, sf_bf
from .fixtures import fig7
from .inference import structure_jt
from .model import HybridBn

__all__ = ["BenchRow", "CSV_HEADER", "VARIANTS", "DEFAULT_SECONDS", "DEFAULT_STATES",
           "run_case", "run_suite", "write_csv", "budget_check", "row_dict"]

CSV_HEADER = ("case", "variant", "tree_width", "max_potential", "seconds", "completed", "reason")
VARIANTS = {"bf": binary_factorize, "sfbf": sf_bf}
DEFAULT_SECONDS = 120.0
DEFAULT_STATES = 5e7


@dataclass(frozen=True)
class BenchRow:
    case: int
    variant: str
    tree_width: int
    max_potential: int
    seconds: float
    completed: bool
    reason: str = ""

    def __post_init__(self):
        if not self.completed and not self.reason:
            raise ValueError("a failed row needs a reason")

    def as_csv(self) -> list:
        return [self.case, self.variant, self.tree_width, self.max_potential,
                f"{self.seconds:.3f}", str(self.completed).lower(), self.reason]


def budget_check(bn: HybridBn, started: float, budget_seconds: float, budget_states: float):
    """Callback for ``dynamic_discretize`` enforcing both budgets.

    The cluster structure depends only on the graph, so it is computed once
    and re-costed with the current state counts on each call.
    """
    clusters = structure_jt(bn).clusters
    discrete = {k: len(bn[k].states) for k in bn.discrete_ids()}

    def check(_bn, partitions):
        elapsed = time.perf_counter() - started
        if elapsed > budget_seconds:
            raise BudgetExceeded("time", f"{elapsed:.1f} s > {budget_seconds:g} s")
        cards = {**discrete, **{k: p.m for k, p in partitions.items()}}
        entries = sum(math.prod(cards[v] for v in c) for c in clusters)
        if entries > budget_states:
            raise BudgetExceeded("memory", f"{entries:.3g} entries > {budget_states:g}")

    return check


def run_case(case: int, variant: str, budget_seconds: float = DEFAULT_SECONDS,
             budget_states: float = DEFAULT_STATES, config: DDConfig = DDConfig()) -> BenchRow:
    """Factorize one fig7 case with ``variant`` and run dynamic discretization.

    Timing covers discretization and propagation only.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {', '.join(VARIANTS)}")
    model, _ = VARIANTS[variant](fig7(case))
    jt = structure_jt(model)
    started = time.perf_counter()
    try:
        dynamic_discretize(model, config, check=budget_check(model, started, budget_seconds,
                                                            budget_states))
    except BudgetExceeded as e:
        return BenchRow(case, variant, jt.tree_width, jt.max_potential_size,
                        time.perf_counter() - started, False, e.reason)
    except MemoryError:
        return BenchRow(case, variant, jt.tree_width, jt.max_potential_size,
                        time.perf_counter() - started, False, "memory")
    seconds = time.perf_counter() - started
    if seconds > budget_seconds:
        return BenchRow(case, variant, jt.tree_width, jt.max_potential_size, seconds, False, "time")
    return BenchRow(case, variant, jt.tree_width, jt.max_potential_size, seconds, True)


def _run(args) -> BenchRow:
    return run_case(*args)


def run_suite(cases: Iterable[int] = range(1, 7), variants: Sequence[str] = ("bf", "sfbf"),
              budget_seconds: float = DEFAULT_SECONDS, budget_states: float = DEFAULT_STATES,
              config: DDConfig = DDConfig(), parallel: bool = False) -> list:
    """Rows for every case and variant, ordered by case then variant."""
    jobs = [(c, v, budget_seconds, budget_states, config) for c in cases for v in variants]
    if not jobs:
        raise ValueError("empty benchmark suite")
    if parallel:
        with ProcessPoolExecutor() as pool:
            return list(pool.map(_run, jobs))
    return [_run(j) for j in jobs]


def write_csv(rows: Iterable[BenchRow], stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.as_csv())


def row_dict(row: BenchRow) -> dict:
    return asdict(row)
