import pytest

from hbnfactor import expr as ex
from hbnfactor.fixtures import FIXTURES, fig1a, fig2, fig7, gen_fixture, random_partitioned
from hbnfactor.model import ContinuousNode, Partitioned, validate


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_fixtures_validate(name):
    assert validate(gen_fixture(name)) == []


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_fixtures_are_deterministic(name):
    assert gen_fixture(name) == gen_fixture(name)


def test_unknown_fixture():
    with pytest.raises(ValueError, match="unknown fixture"):
        gen_fixture("fig9")
    with pytest.raises(ValueError):
        fig7(7)


def test_fig1a_is_complete_sum_dag():
    g = fig1a()
    assert len(g) == 5
    for i in range(1, 5):
        node = g[f"X{i}"]
        assert set(node.parents) == {f"X{j}" for j in range(i)}
        assert isinstance(node.cpd.head, ex.Arithmetic)


def test_fig2_cpd():
    g = fig2()
    assert g["D"].states == ("d1", "d2", "d3", "d4")
    cases = {k[0]: ex.unparse(h) for k, h in g["C"].cpd.cases.items()}
    assert cases == {"d1": "Normal(X1 + X2 + X3, 1000)", "d2": "Normal(X2, 1000)",
                     "d3": "Normal(X3, 1000)", "d4": "Normal(X4, 1000)"}


@pytest.mark.parametrize("case", range(1, 7))
def test_fig7_follows_construction_rules(case):
    g = fig7(case)
    assert 6 <= len(g) <= 7
    for node in g:
        if not isinstance(node, ContinuousNode):
            assert not node.parents
            continue
        if not node.parents:
            assert ex.unparse(node.cpd.head) == "Normal(0, 1)"
        elif isinstance(node.cpd, Partitioned):
            assert all(isinstance(h, ex.Arithmetic) for h in node.cpd.cases.values())
        else:
            assert isinstance(node.cpd.head, ex.Arithmetic)


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("HBNF_SEED", "17")
    assert gen_fixture("random_partitioned") == random_partitioned(17)
