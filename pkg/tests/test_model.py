import json

import pytest
from hypothesis import given, settings, strategies as st

from hbnfactor import io
from hbnfactor.fixtures import FIXTURES, fig1a, fig1b, fig2, fig6, random_partitioned
from hbnfactor.model import (ContinuousNode, HybridBn, UnknownNodeError, continuous,
                             continuous_parent_count, cpd_size, discrete, partitioned,
                             validate)


def kinds(bn):
    return [v.kind for v in validate(bn)]


def test_minimal_chain_is_valid():
    bn = HybridBn.of([continuous("X", "Normal(0, 1)"), continuous("C", "Normal(X, 1)")])
    assert validate(bn) == []
    assert bn.parents("C") == ("X",)
    assert list(bn.children("X")) == ["C"]


def test_missing_case_is_one_violation():
    bn = HybridBn.of([
        discrete("D", ["d1", "d2", "d3"], [0.2, 0.3, 0.5]),
        continuous("X", "Normal(0, 1)"),
        partitioned("C", "D", {"d1": "Arithmetic(X)", "d2": "Normal(X, 2)"}),
    ])
    assert kinds(bn) == ["incomplete-partition"]


def test_back_edge_is_one_cycle():
    g = fig2()
    x1 = g["X1"]
    bad = g.with_nodes([ContinuousNode("X1", continuous("X1", "Arithmetic(C)").cpd, ("C",))])
    assert kinds(g) == []
    assert kinds(bad) == ["cycle"]
    assert x1.id == "X1"


@pytest.mark.parametrize("rows, kind", [
    ([0.5, 0.6], "table-row-sum"),
    ([1.2, -0.2], "table-negative"),
    ([0.2, 0.3, 0.5], "table-shape"),
])
def test_table_checks(rows, kind):
    bn = HybridBn.of([discrete("D", ["a", "b"], rows)])
    assert kind in kinds(bn)


def test_unknown_parent_and_discrete_in_expression():
    bn = HybridBn.of([continuous("C", "Normal(Q, 1)")])
    assert "unknown-parent" in kinds(bn)
    bn = HybridBn.of([discrete("D", ["a", "b"], [0.5, 0.5]), continuous("C", "Normal(D, 1)")])
    assert "discrete-in-expression" in kinds(bn)


def test_evidence_checks():
    bn = fig2()
    assert "evidence-unknown-node" in kinds(bn.with_evidence({"Q": 1.0}))
    assert "evidence-value" in kinds(bn.with_evidence({"D": "nope"}))
    assert kinds(bn.with_evidence({"D": "d2", "C": 3.0})) == []


def test_unknown_node_lookup():
    with pytest.raises(UnknownNodeError):
        fig2()["nope"]


def test_cpd_sizes_of_reference_nets():
    assert cpd_size(fig1a(), "X4") == 5
    assert cpd_size(fig1b(), "X4") == 3
    assert cpd_size(fig1a(), "X0") == 1


def test_continuous_parent_counts():
    assert continuous_parent_count(fig2(), "C") == 4
    assert continuous_parent_count(fig6(), "C") == 2
    assert continuous_parent_count(fig2(), "D") == 0


def test_topological_order_respects_edges():
    for name in FIXTURES:
        bn = FIXTURES[name]()
        pos = {k: i for i, k in enumerate(bn.topological_order())}
        for n in bn:
            assert all(pos[p] < pos[n.id] for p in n.parents)


# ---------------------------------------------------------------- model files

@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_fixture_round_trip(name):
    bn = FIXTURES[name]()
    assert io.loads(io.dumps(bn)) == bn


@settings(max_examples=40)
@given(st.integers(0, 10_000))
def test_random_round_trip(seed):
    bn = random_partitioned(seed)
    assert io.loads(io.dumps(bn)) == bn


def test_partitions_round_trip(tmp_path):
    from hbnfactor.discretize import uniform_partition
    bn = fig2()
    parts = {"C": uniform_partition("C", (0, 100), 4)}
    path = tmp_path / "m.json"
    io.write_model(path, bn, parts)
    back, back_parts = io.read_model(path)
    assert back == bn
    assert back_parts["C"].cuts == parts["C"].cuts


def test_bad_expression_names_node_and_offset():
    doc = {"nodes": [{"id": "X", "kind": "continuous", "cpd": {"expression": "Normal(X,"}}]}
    with pytest.raises(io.ModelFormatError) as err:
        io.loads(json.dumps(doc))
    assert err.value.node == "X" and err.value.offset == 8
    assert "'X'" in str(err.value) and "offset 8" in str(err.value)


def test_invalid_json():
    with pytest.raises(io.ModelFormatError, match="invalid JSON"):
        io.loads("{nodes: ")
