import io

import pytest

from hbnfactor.bench import CSV_HEADER, BenchRow, run_case, run_suite, write_csv
from hbnfactor.discretize import DDConfig

SMALL = DDConfig(initial_m=4, max_states=6, max_iters=3)


def test_failed_rows_need_a_reason():
    with pytest.raises(ValueError):
        BenchRow(1, "bf", 3, 4, 0.1, False)


def test_csv_layout():
    buf = io.StringIO()
    write_csv([BenchRow(1, "sfbf", 3, 4, 0.25, True), BenchRow(4, "bf", 6, 7, 0.0, False, "memory")], buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(CSV_HEADER) == "case,variant,tree_width,max_potential,seconds,completed,reason"
    assert lines[1] == "1,sfbf,3,4,0.250,true,"
    assert lines[2] == "4,bf,6,7,0.000,false,memory"


def test_memory_budget_stops_before_compiling():
    row = run_case(4, "bf", budget_states=1e3, config=SMALL)
    assert not row.completed and row.reason == "memory" and row.tree_width == 6


def test_time_budget():
    row = run_case(1, "sfbf", budget_seconds=0.0, config=SMALL)
    assert not row.completed and row.reason == "time"


def test_small_suite_completes():
    rows = run_suite([1, 2], ["bf", "sfbf"], config=SMALL)
    assert [(r.case, r.variant) for r in rows] == [(1, "bf"), (1, "sfbf"), (2, "bf"), (2, "sfbf")]
    assert all(r.completed for r in rows)


def test_parallel_matches_sequential_structure():
    seq = run_suite([1, 3], ["sfbf"], config=SMALL)
    par = run_suite([1, 3], ["sfbf"], config=SMALL, parallel=True)
    assert [(r.case, r.tree_width, r.max_potential, r.completed) for r in seq] == \
           [(r.case, r.tree_width, r.max_potential, r.completed) for r in par]


def test_empty_suite():
    with pytest.raises(ValueError):
        run_suite([], ["bf"])
    with pytest.raises(ValueError):
        run_case(1, "nope")
