import itertools

import pytest
from hypothesis import given, settings, strategies as st

from idealcp.cliques import (CliqueSet, brute_force_cliques, from_mask, maximal_cliques,
                             necessary_condition, to_mask)
from idealcp.errors import DimensionTooLarge, NotNonnegative
from idealcp.tensor import SymmetricTensor, random_binary_sparse, random_cp


def test_mask_roundtrip():
    assert to_mask((1, 3)) == 0b101
    assert from_mask(0b101) == (1, 3)
    assert from_mask(to_mask(range(1, 70))) == tuple(range(1, 70))


def test_worked_example_cliques(ex1):
    c = maximal_cliques(ex1)
    assert c.cliques == ((1, 2), (1, 3))
    assert brute_force_cliques(ex1).cliques == ((1, 2), (1, 3))


def test_worked_example_trace(ex1):
    trace = []
    maximal_cliques(ex1, trace=trace)
    zeros = [row[0] for row in trace]
    assert zeros == [(1, 2, 3), (2, 2, 3), (2, 3, 3)]
    # after (1,2,3) the candidates are the three pairs
    assert set(trace[1][1]) == {(2, 3), (1, 3), (1, 2)}
    # (2,2,3) removes {2,3}; its proposals {2} and {3} are subsets of survivors
    assert set(trace[1][2]) == {(2,), (3,)}
    assert set(trace[2][1]) == {(1, 3), (1, 2)}
    # (2,3,3) changes nothing
    assert trace[2][2] == []


def test_fully_positive_single_clique():
    a = random_binary_sparse(5, 3, 1.0, seed=0)
    assert maximal_cliques(a).cliques == ((1, 2, 3, 4, 5),)


def test_diagonal_gives_singletons():
    a = SymmetricTensor(3, 4, {(i, i, i): 1.0 for i in range(1, 5)})
    c = maximal_cliques(a)
    assert c.cliques == ((1,), (2,), (3,), (4,))
    assert necessary_condition(a, c).passed


def test_zero_diagonal_vertex_vanishes():
    a = SymmetricTensor(2, 3, {(1, 1): 1.0, (2, 2): 1.0, (1, 2): 1.0})
    assert maximal_cliques(a).cliques == ((1, 2),)


def test_necessary_condition_examples(ex1, screen_fail):
    rep = necessary_condition(ex1, maximal_cliques(ex1))
    assert rep.passed and rep.uncovered == []
    rep = necessary_condition(screen_fail, maximal_cliques(screen_fail))
    assert not rep.passed and (1, 2, 3) in rep.uncovered


def test_negative_rejected():
    with pytest.raises(NotNonnegative):
        maximal_cliques(SymmetricTensor(2, 2, {(1, 2): -1.0}))


def test_brute_force_bound():
    with pytest.raises(DimensionTooLarge):
        brute_force_cliques(SymmetricTensor(2, 21))


def test_clique_set_sorted_and_antichain():
    c = CliqueSet(((3, 1), (2,), (1, 2, 4)), 4)
    assert c.cliques == ((1, 2, 4), (1, 3), (2,))
    assert not c.is_antichain()
    assert c.containing((1,)) == [0, 1]


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.sampled_from([2, 3, 4]), st.floats(0, 1), st.integers(0, 10 ** 6))
def test_matches_brute_force(n, m, nzd, seed):
    a = random_binary_sparse(n, m, nzd, seed=seed)
    c = maximal_cliques(a)
    assert c == brute_force_cliques(a)
    assert c.is_antichain()


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 7), st.sampled_from([2, 3]), st.floats(0, 1), st.integers(0, 10 ** 6))
def test_cliques_are_sound(n, m, nzd, seed):
    a = random_binary_sparse(n, m, nzd, seed=seed)
    for cl in maximal_cliques(a):
        for e in itertools.combinations_with_replacement(cl, m):
            assert a[e] > 0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(2, 4), st.integers(0, 6), st.integers(0, 10 ** 6))
def test_cp_witness_supports_inside_cliques(n, m, r, seed):
    a, w = random_cp(n, m, r, max(1, n // 2), seed=seed)
    c = maximal_cliques(a)
    assert necessary_condition(a, c).passed
    for at in w.atoms:
        assert c.containing(at.clique), at.clique


def test_deterministic_order():
    a = random_binary_sparse(9, 3, 0.6, seed=11)
    assert maximal_cliques(a).cliques == maximal_cliques(a).cliques
