"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the summary lines are written
straight to the terminal so they also appear without ``-s``.
"""

import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import norm

from _support import LATTICE_STEP, equivalence_gap, fixture_names
from hbnfactor.bench import DEFAULT_SECONDS, run_suite
from hbnfactor.discretize import (DDConfig, compile, dynamic_discretize, inherit_partitions,
                                  initial_partitions, lattice_partition)
from hbnfactor.factorize import (MixtureSpec, alpha_weights, binary_factorize, sf_bf,
                                 stack_mixture, stacking_factorize)
from hbnfactor.fixtures import (FIXTURES, _states, fig1a, fig1b, fig2, fig4_analog, fig6, fig7,
                                random_partitioned, v_structure)
from hbnfactor.inference import brute_force_joint, infer, metrics
from hbnfactor.model import HybridBn, continuous, discrete, max_cpd_size, partitioned


@pytest.fixture
def verdict(capsys):
    def say(number: int, ok: bool, seconds: float, detail: str):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} ({seconds:.3f} s) {detail}")
        assert ok, detail
    return say


def test_criterion_1_stacking_weights(verdict):
    best = math.inf
    for _ in range(5):
        t0 = time.perf_counter()
        plan = alpha_weights((0.1, 0.2, 0.3, 0.4))
        best = min(best, time.perf_counter() - t0)
    ok = plan.exact == (Fraction(1, 3), Fraction(1, 2), Fraction(3, 5)) and best < 1e-3
    verdict(1, ok, best, f"alphas={[str(a) for a in plan.exact]}")


def test_criterion_2_mixture_identity(verdict):
    rng = np.random.default_rng(20240601)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 9))
        ws = rng.dirichlet(np.ones(n))
        ws[-1] = 1.0 - ws[:-1].sum()
        means, sds = rng.uniform(-5, 5, n), rng.uniform(0.3, 3, n)
        comps = tuple((lambda x, m=m, s=s: norm.pdf(x, m, s)) for m, s in zip(means, sds))
        x = rng.uniform(-10, 10, 50)
        direct = sum(w * norm.pdf(x, m, s) for w, m, s in zip(ws, means, sds))
        worst = max(worst, float(np.max(np.abs(stack_mixture(MixtureSpec(tuple(ws), comps), x) - direct))))
    seconds = time.perf_counter() - t0
    verdict(2, worst <= 1e-12 and seconds < 1.0, seconds, f"max deviation {worst:.2e}")


def test_criterion_3_factorization_preserves_joint(verdict):
    t0 = time.perf_counter()
    worst, rng = 0.0, random.Random(7)
    for _ in range(50):
        bn = random_partitioned(rng.randrange(10 ** 9))
        if rng.random() < 0.5:
            bn = bn.with_evidence({"C": float(rng.randint(-3, 3))})
        worst = max(worst, equivalence_gap(bn))
    for name in fixture_names():
        worst = max(worst, equivalence_gap(FIXTURES[name](), LATTICE_STEP.get(name, 1.0)))
    seconds = time.perf_counter() - t0
    verdict(3, worst <= 1e-9 and seconds < 60, seconds, f"max marginal deviation {worst:.2e}")


def test_criterion_4_structure_metrics(verdict):
    t0 = time.perf_counter()
    got = {
        "fig1a max cpd": max_cpd_size(fig1a()),
        "fig1b max cpd": max_cpd_size(fig1b()),
        "fig2 t.w.": metrics(fig2()).tree_width,
        "fig2 BF t.w.": metrics(binary_factorize(fig2())[0]).tree_width,
        "fig6 t.w.": metrics(fig6()).tree_width,
        "fig6 max potential": metrics(fig6()).max_potential_size,
        "fig2 max potential": metrics(fig2()).max_potential_size,
        "fig4 t.w.": metrics(fig4_analog()).tree_width,
        "fig4 SF t.w.": metrics(stacking_factorize(fig4_analog())[0]).tree_width,
    }
    want = {"fig1a max cpd": 5, "fig1b max cpd": 3, "fig2 t.w.": 5, "fig2 BF t.w.": 5,
            "fig6 t.w.": 4, "fig6 max potential": 4, "fig2 max potential": 6,
            "fig4 t.w.": 4, "fig4 SF t.w.": 3}
    seconds = time.perf_counter() - t0
    wrong = {k: (got[k], want[k]) for k in want if got[k] != want[k]}
    verdict(4, not wrong and seconds < 5, seconds, f"mismatches {wrong}" if wrong else str(got))


def test_criterion_5_v_structure_bounds(verdict):
    t0 = time.perf_counter()
    rows = []
    for n in range(3, 8):
        g = v_structure(n)
        rows.append((n, metrics(g).tree_width, metrics(sf_bf(g)[0]).tree_width))
    seconds = time.perf_counter() - t0
    ok = all(d == n + 1 and 3 <= d2 < n + 1 for n, d, d2 in rows) and seconds < 10
    verdict(5, ok, seconds, f"(n, before, after) = {rows}")


def test_criterion_6_indicator_accumulation(verdict):
    rng = np.random.default_rng(6)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(3, 7))
        prior = list(rng.dirichlet(np.ones(n)))
        prior[-1] = 1.0 - sum(prior[:-1])
        bn = HybridBn.of([discrete("D", _states(n), prior),
                          *[continuous(f"X{i}", f"Normal({i}, 1)") for i in range(1, n + 1)],
                          partitioned("C", "D", {f"d{i}": f"Arithmetic(X{i})" for i in range(1, n + 1)})])
        new, report = stacking_factorize(bn, "explicit")
        parts = {k: lattice_partition(k, (-2, n + 3), 1.0) for k in bn.continuous_ids()}
        cal = infer(compile(new, inherit_partitions(new, parts, report.created, 1.0)))
        for i, b in enumerate(report.created_ids("B"), start=1):
            worst = max(worst, abs(float(cal.marginal(b)[0]) - math.fsum(prior[:i])))
    seconds = time.perf_counter() - t0
    verdict(6, worst <= 1e-12 and seconds < 5, seconds, f"max deviation {worst:.2e}")


@pytest.fixture(scope="module")
def bench_rows():
    t0 = time.perf_counter()
    rows = run_suite(range(1, 7), ("bf", "sfbf"))
    return rows, time.perf_counter() - t0


def test_criterion_7_benchmark_trend(verdict, bench_rows):
    rows, seconds = bench_rows
    by = {(r.case, r.variant): r for r in rows}
    sf_all = all(by[c, "sfbf"].completed for c in range(1, 7))
    bf_fail = all(not by[c, "bf"].completed for c in (4, 5, 6))
    smaller = all(by[c, "sfbf"].max_potential <= by[c, "bf"].max_potential
                  for c in range(1, 7) if by[c, "bf"].completed and by[c, "sfbf"].completed)
    table = " ".join(f"{c}:{v}=({r.tree_width},{r.seconds:.1f}s,{'ok' if r.completed else r.reason})"
                     for (c, v), r in sorted(by.items()))
    ok = sf_all and bf_fail and smaller and seconds < DEFAULT_SECONDS * 12
    verdict(7, ok, seconds, table)


def test_criterion_8_state_band(verdict):
    t0 = time.perf_counter()
    counts = {}
    for case in range(1, 7):
        res = dynamic_discretize(sf_bf(fig7(case))[0], DDConfig())
        counts[case] = (min(p.m for p in res.partitions.values()),
                        max(p.m for p in res.partitions.values()))
    seconds = time.perf_counter() - t0
    ok = all(20 <= lo and hi <= 40 for lo, hi in counts.values())
    verdict(8, ok, seconds, f"(min, max) states per case {counts}")


def _corpus():
    """Fixtures and random nets, each at the finest grid (<= 10 intervals)
    whose joint state space stays within 10^6."""
    models = [(name, FIXTURES[name]()) for name in fixture_names()]
    models += [(f"random_{s}", random_partitioned(s)) for s in range(20)]
    for name, bn in models:
        for m in range(10, 1, -1):
            dbn = compile(bn, initial_partitions(bn, m))
            if math.prod(dbn.cards.values()) <= 10 ** 6:
                yield name, bn, dbn
                break


def test_criterion_9_junction_tree_vs_oracle(verdict):
    t0 = time.perf_counter()
    worst, checked = 0.0, 0
    for name, bn, dbn in _corpus():
        last = bn.topological_order()[-1]
        observed = {last: dbn.cards[last] // 2}
        for evidence in ({}, observed):
            cal = infer(dbn, evidence)
            oracle = brute_force_joint(dbn, evidence)
            assert cal.consistent == oracle.consistent, name
            if cal.consistent:
                for k in bn.ids():
                    worst = max(worst, float(np.max(np.abs(cal.marginal(k) - oracle.marginal(k)))))
            checked += 1
    seconds = time.perf_counter() - t0
    verdict(9, worst <= 1e-9 and seconds < 60, seconds,
            f"{checked} model/evidence pairs, max deviation {worst:.2e}")
