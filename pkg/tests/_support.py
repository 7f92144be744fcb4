"""Shared helpers for the equivalence and acceptance tests."""

import numpy as np

from hbnfactor.discretize import compile, inherit_partitions, lattice_partition
from hbnfactor.factorize import sf_bf
from hbnfactor.fixtures import FIXTURES
from hbnfactor.inference import brute_force_joint, infer

# lattice step per fixture: constants and integer means sit on midpoints
LATTICE_STEP = {"fig2": 10.0, "fig4_analog": 10.0}


def shared_partitions(bn, step: float, half_width: int = 4) -> dict:
    """Nine-interval lattice on every continuous node, midpoints -4*step .. 4*step."""
    span = (-half_width * step, half_width * step)
    return {k: lattice_partition(k, span, step) for k in bn.continuous_ids()}


def equivalence_gap(bn, step: float = 1.0) -> float:
    """Largest marginal deviation between the brute-force joint of ``bn`` and
    junction-tree inference on its factorized form, over the original nodes.

    Both networks share the original nodes' partitions; stacked intermediates
    copy their child's partition and additive ones get a lattice with the
    same step, which keeps every rewritten link exact.
    """
    parts = shared_partitions(bn, step)
    new, report = sf_bf(bn)
    new_parts = inherit_partitions(new, parts, report.created, lattice_step=step)
    dbn = compile(bn, parts)
    cal = infer(compile(new, new_parts))
    gap = 0.0
    for k in bn.ids():
        # one contraction per node keeps the oracle within its size limit
        oracle = brute_force_joint(dbn, keep=[k])
        assert oracle.consistent == cal.consistent
        if oracle.consistent:
            gap = max(gap, float(np.max(np.abs(oracle.marginal(k) - cal.marginal(k)))))
    return gap


def fixture_names():
    return [n for n in FIXTURES if n != "random_partitioned"]
