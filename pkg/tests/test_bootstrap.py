import json
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from yamabe.bootstrap import (Terminal, bootstrap_trace, embedding_oracle, oracle_trace, regularity_class,
                              threshold)
from yamabe.errors import DomainError


def test_n4_p3():
    t = bootstrap_trace(4, 3)
    assert t.sequence == [Fraction(4), Fraction(12)]
    assert t.threshold == 6
    assert t.terminal is Terminal.SOBOLEV
    assert t.embedding_class == "C^{0,beta}"


def test_equality_branch():
    t = bootstrap_trace(3, 2)
    assert t.sequence == [Fraction(6)]
    assert t.terminal is Terminal.LINF
    assert t.embedding_class == "C^{0,beta}"


def test_p_above_n():
    t = bootstrap_trace(3, 4)
    assert t.terminal is Terminal.SOBOLEV
    assert t.embedding_class == "C^{1,beta}"


def test_n5_p3_chain():
    t = bootstrap_trace(5, "3")
    assert t.sequence == [Fraction(10, 3), Fraction(30, 7), Fraction(6), Fraction(10), Fraction(30)]
    assert t.sequence[-2] < threshold(5, Fraction(3)) < t.sequence[-1]


def test_regularity_class_examples():
    assert regularity_class(5, 3) == "C^{0,beta}"
    assert regularity_class(3, 100) == "C^{1,beta}"
    assert regularity_class(3, "7/4") == "C^{0,beta}"
    with pytest.raises(DomainError):
        regularity_class(4, 2)


def test_domain_errors():
    with pytest.raises(DomainError):
        bootstrap_trace(4, 2)
    with pytest.raises(DomainError):
        bootstrap_trace(2, 5)
    with pytest.raises(DomainError):
        bootstrap_trace(4, 3.0)


def test_descending_recurrence():
    t = bootstrap_trace(4, 3, descending=True)
    assert t.terminal is Terminal.DIVERGED
    assert t.sequence[1] < t.sequence[0]
    assert t.recurrence == "descending"


def test_json_pairs():
    d = bootstrap_trace(4, 3).to_dict()
    assert d["sequence"] == [[4, 1], [12, 1]]
    assert d["terminal"] == "SobolevH2p"
    assert d["p"] == [3, 1] and d["steps"] == 1
    json.dumps(d)


def test_oracle_step_values():
    assert embedding_oracle(4, 3, 4) == (Fraction(12, 7), Fraction(12))
    r, nxt = embedding_oracle(3, 4, 6)
    assert r == Fraction(12, 5) and nxt is None


_cases = st.tuples(st.integers(3, 10), st.integers(1, 64)).flatmap(
    lambda nd: st.tuples(st.just(nd[0]), st.integers(nd[0] * nd[1] // 2 + 1, 4 * nd[0] * nd[1]).map(
        lambda a, d=nd[1]: Fraction(a, d))))


@settings(max_examples=300, deadline=None)
@given(_cases)
def test_matches_oracle(case):
    n, p = case
    t = bootstrap_trace(n, p)
    seq, term = oracle_trace(n, p)
    assert t.sequence == seq
    assert t.terminal.value == term


@settings(max_examples=300, deadline=None)
@given(_cases)
def test_monotone_and_terminating(case):
    n, p = case
    t = bootstrap_trace(n, p)
    assert t.terminal is not Terminal.DIVERGED
    assert t.sequence[0] == Fraction(2 * n, n - 2)
    assert all(a < b for a, b in zip(t.sequence, t.sequence[1:]))
    assert all(s < t.threshold for s in t.sequence[:-1])
