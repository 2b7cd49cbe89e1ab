import itertools
import math

import hypothesis.extra.numpy as npst
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from pidcausal.probcore import (
    CIQuery,
    JointTable,
    ProbabilityError,
    TableSizeError,
    UnknownVariableError,
    Variable,
    condition,
    conditional_mutual_information,
    empirical_from_samples,
    entropy,
    is_conditionally_independent,
    marginalize,
    min_conditional_mi,
    mutual_information,
    read_samples_csv,
    specific_information,
    table_from_dict,
    table_to_dict,
)


@st.composite
def tables(draw, max_vars=4, max_card=3):
    n = draw(st.integers(2, max_vars))
    cards = draw(st.lists(st.integers(2, max_card), min_size=n, max_size=n))
    w = draw(npst.arrays(np.float64, (int(np.prod(cards)),),
                         elements=st.floats(0.0, 1.0, allow_nan=False, allow_infinity=False)))
    if w.sum() <= 0:
        w = np.ones_like(w)
    vs = [Variable(f"V{i}", c) for i, c in enumerate(cards)]
    return JointTable.from_unnormalized(vs, w.reshape(cards))


def fair_bits(n):
    return JointTable([Variable(f"X{i + 1}", 2) for i in range(n)], np.full((2,) * n, 1 / 2 ** n))


def xor_table():
    return JointTable.from_function([Variable(n, 2) for n in ("X1", "X2", "X3")],
                                    lambda s: 1.0 if s[2] == s[0] ^ s[1] else 0.0)


def test_rejects_bad_mass():
    with pytest.raises(ProbabilityError):
        JointTable([Variable("A", 2)], [0.7, 0.4])
    with pytest.raises(ProbabilityError):
        JointTable([Variable("A", 2)], [1.5, -0.5])
    with pytest.raises(ProbabilityError):
        Variable("A", 1)


def test_dense_cap():
    with pytest.raises(TableSizeError):
        JointTable([Variable(f"V{i}", 2) for i in range(21)], np.zeros(2 ** 21))


def test_unknown_variable():
    with pytest.raises(UnknownVariableError):
        marginalize(fair_bits(2), ["X9"])


def test_fair_bits_entropy():
    t = fair_bits(3)
    assert entropy(t, ["X1"]) == pytest.approx(1.0, abs=1e-12)
    assert entropy(t, ["X1", "X2", "X3"]) == pytest.approx(3.0, abs=1e-12)
    assert mutual_information(t, ["X1"], ["X2"]) == pytest.approx(0.0, abs=1e-12)


def test_xor_information():
    t = xor_table()
    assert mutual_information(t, ["X1"], ["X3"]) == pytest.approx(0.0, abs=1e-12)
    assert conditional_mutual_information(t, ["X1"], ["X3"], ["X2"]) == pytest.approx(1.0, abs=1e-12)
    assert not is_conditionally_independent(t, CIQuery("X1", "X3", {"X2"}))
    assert is_conditionally_independent(t, CIQuery("X1", "X3"))


def test_ciquery_validation():
    with pytest.raises(ProbabilityError):
        CIQuery("A", "A")
    with pytest.raises(ProbabilityError):
        CIQuery("A", "B", {"A"})


def test_condition_renormalizes():
    t = xor_table()
    c = condition(t, {"X3": 1})
    assert c.names == ("X1", "X2")
    assert c.array.sum() == pytest.approx(1.0, abs=1e-12)
    assert c.prob({"X1": 0, "X2": 1}) == pytest.approx(0.5)
    with pytest.raises(ProbabilityError):
        condition(JointTable.from_function([Variable("A", 2), Variable("B", 2)],
                                           lambda s: float(s[0] == 0)), {"A": 1})


def test_specific_information_against_oracle():
    t = xor_table()
    names, d = oracles.as_dict(t)
    for s in range(2):
        assert specific_information(t, ["X3"], (s,), ["X1", "X2"]) == pytest.approx(
            oracles.specific_info(names, d, ["X3"], ["X1", "X2"], (s,)), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(tables())
def test_entropy_and_mi_match_enumeration(t):
    names, d = oracles.as_dict(t)
    a, b = names[0], names[1]
    rest = list(names[2:])
    assert entropy(t, names) == pytest.approx(oracles.H(names, d, names), abs=1e-9)
    assert mutual_information(t, [a], [b]) == pytest.approx(oracles.mi(names, d, [a], [b]), abs=1e-9)
    assert conditional_mutual_information(t, [a], [b], rest) == pytest.approx(
        oracles.mi(names, d, [a], [b], rest), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(tables())
def test_information_identities(t):
    names = t.names
    a, b = names[0], names[1]
    i_ab = mutual_information(t, [a], [b])
    assert i_ab >= 0
    assert i_ab == pytest.approx(mutual_information(t, [b], [a]), abs=1e-12)
    assert i_ab == pytest.approx(entropy(t, [a]) + entropy(t, [b]) - entropy(t, [a, b]), abs=1e-9)
    m = marginalize(t, [b, a])
    assert m.names == tuple(n for n in names if n in (a, b))
    assert m.array.sum() == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(tables(max_vars=4))
def test_min_cmi_is_minimum_over_subsets(t):
    x, y, *pool = t.names
    v, cset = min_conditional_mi(t, x, y)
    every = [conditional_mutual_information(t, [x], [y], list(c))
             for k in range(len(pool) + 1) for c in itertools.combinations(pool, k)]
    assert v == pytest.approx(min(every), abs=1e-12)
    assert conditional_mutual_information(t, [x], [y], list(cset)) == pytest.approx(v, abs=1e-12)


def test_round_trip_dict():
    t = xor_table()
    assert table_from_dict(table_to_dict(t)).allclose(t)
    with pytest.raises(ProbabilityError, match="probabilities\\[0\\]"):
        table_from_dict({"variables": [{"name": "A", "cardinality": 2}], "probabilities": [{"state": [5], "p": 1}]})


def test_samples_csv():
    t = read_samples_csv("A,B\n0,1\n1,0\n0,1\n1,1\n")
    assert t.prob({"A": 0, "B": 1}) == pytest.approx(0.5)
    with pytest.raises(ProbabilityError, match="line 3"):
        read_samples_csv("A,B\n0,1\nx,0\n")
    with pytest.raises(ProbabilityError):
        empirical_from_samples([[0, 2]], [Variable("A", 2), Variable("B", 2)])


def test_mutual_information_is_in_bits():
    t = JointTable.from_function([Variable("A", 4), Variable("B", 4)], lambda s: float(s[0] == s[1]))
    assert mutual_information(t, ["A"], ["B"]) == pytest.approx(math.log2(4), abs=1e-12)
