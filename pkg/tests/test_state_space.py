import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cachestat.state_space import (
    Space, StateSpaceTooLarge, check_complete_cap, combination_rank, combination_unrank, enumerate_complete,
    enumerate_ranked, enumerate_sets, ranked_states, set_states, sjt_permutations, sjt_rank, sjt_unrank,
    state_from_index, state_index,
)

SIZES = [(N, B) for N in range(1, 10) for B in range(1, N + 1)]


def test_small_ranked_enumeration():
    states = list(enumerate_ranked(3, 2))
    assert sorted(states) == [(1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2)]
    assert list(enumerate_ranked(2, 2)) == [(1, 2), (2, 1)]


def test_small_set_enumeration():
    assert list(enumerate_sets(3, 2)) == [frozenset({1, 2}), frozenset({1, 3}), frozenset({2, 3})]
    assert Space.sets(12, 3).size == 220
    assert Space.sets(12, 6).size == 924
    assert Space.ranked(12, 6).size == 665280


@pytest.mark.parametrize("N,B", [(N, B) for N, B in SIZES if math.perm(N, B) <= 70_000])
def test_ranked_counts_and_uniqueness(N, B):
    states = list(enumerate_ranked(N, B))
    assert len(states) == math.perm(N, B)
    assert len(set(states)) == len(states)


def test_ranked_count_largest():
    assert sum(1 for _ in enumerate_ranked(9, 9)) == math.factorial(9)
    assert len(ranked_states(9, 6)) == math.perm(9, 6)


@pytest.mark.parametrize("N,B", SIZES)
def test_set_counts_and_uniqueness(N, B):
    states = list(enumerate_sets(N, B))
    assert len(states) == math.comb(N, B) == len(set(states))


@pytest.mark.parametrize("N,B", [(3, 2), (5, 3), (6, 6), (7, 2)])
def test_index_round_trip(N, B):
    space = Space.ranked(N, B)
    for i, s in enumerate(enumerate_ranked(N, B)):
        assert state_index(s, N) == i
        assert state_from_index(i, space) == s
    sets = Space.sets(N, B)
    for i, s in enumerate(enumerate_sets(N, B)):
        assert state_index(s, N) == i
        assert state_from_index(i, sets) == s


def test_index_anchors():
    states = list(enumerate_ranked(3, 2))
    assert state_index(states[0], 3) == 0
    assert state_index(states[-1], 3) == 5


def test_invalid_states_rejected():
    with pytest.raises(ValueError):
        state_index((1, 1), 3)
    with pytest.raises(ValueError):
        state_index((1, 4), 3)
    with pytest.raises(ValueError):
        list(enumerate_ranked(3, 4))
    with pytest.raises(ValueError):
        list(enumerate_sets(3, 0))


@pytest.mark.parametrize("n", range(1, 7))
def test_sjt_adjacent_transpositions(n):
    perms = list(sjt_permutations(n))
    assert len(set(perms)) == math.factorial(n)
    for a, b in zip(perms, perms[1:]):
        diff = [i for i in range(n) if a[i] != b[i]]
        assert len(diff) == 2 and diff[1] == diff[0] + 1


@given(st.integers(1, 8).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, math.factorial(n) - 1))))
def test_sjt_rank_inverse(args):
    n, r = args
    assert sjt_rank(sjt_unrank(n, r)) == r


@given(st.integers(1, 15).flatmap(lambda N: st.tuples(st.just(N), st.integers(1, N))).flatmap(
    lambda nb: st.tuples(st.just(nb[0]), st.just(nb[1]), st.integers(0, math.comb(*nb) - 1))))
def test_combination_rank_inverse(args):
    N, B, r = args
    assert combination_rank(combination_unrank(r, N, B), N) == r


def test_arrays_match_streams():
    assert [tuple(row) for row in ranked_states(5, 3)] == list(enumerate_ranked(5, 3))
    assert [frozenset(row) for row in set_states(6, 3)] == list(enumerate_sets(6, 3))
    whole = ranked_states(6, 4)
    assert np.array_equal(np.concatenate([ranked_states(6, 4, 0, 100), ranked_states(6, 4, 100, None)]), whole)
    assert list(enumerate_ranked(6, 4, 50, 60)) == [tuple(r) for r in whole[50:60]]


def test_complete_cap():
    assert sum(1 for _ in enumerate_complete(4)) == 24
    with pytest.raises(StateSpaceTooLarge):
        check_complete_cap(10)
    check_complete_cap(10, allow_large=True)
