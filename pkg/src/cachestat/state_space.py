"""Enumeration and indexing of cache states.

Ranked policies live on B-permutations of {1..N}: tuples whose first entry
is rank 1 (youngest). Random eviction lives on B-combinations, represented
as frozensets. Complete rankings are the N-permutations.

Ordering: subsets in lexicographic order, and within a subset the orderings
follow the Steinhaus-Johnson-Trotter (adjacent transposition) sequence.
``state_index`` ranks a state into exactly that enumeration order, so dense
arrays built from the enumeration are indexed by ``state_index``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Union

import numpy as np

RankedState = tuple  # tuple[int, ...]
SetState = frozenset  # frozenset[int]
State = Union[RankedState, SetState]

COMPLETE_RANKINGS_MAX_N = 9


class StateSpaceTooLarge(ValueError):
    """The requested state space exceeds a configured size cap."""


@dataclass(frozen=True)
class Space:
    """Descriptor of an enumerated state space."""

    kind: str  # "ranked" | "sets" | "complete"
    N: int
    B: int

    def __post_init__(self):
        if self.kind not in ("ranked", "sets", "complete"):
            raise ValueError(f"unknown space kind {self.kind!r}")
        _check_sizes(self.N, self.B)
        if self.kind == "complete" and self.B != self.N:
            raise ValueError("complete rankings need B == N")

    @property
    def size(self) -> int:
        if self.kind == "sets":
            return math.comb(self.N, self.B)
        return math.perm(self.N, self.B)

    @classmethod
    def ranked(cls, N: int, B: int) -> "Space":
        return cls("ranked", N, B)

    @classmethod
    def sets(cls, N: int, B: int) -> "Space":
        return cls("sets", N, B)

    @classmethod
    def complete(cls, N: int) -> "Space":
        return cls("complete", N, N)


def _check_sizes(N: int, B: int) -> None:
    if not 1 <= B <= N:
        raise ValueError(f"need 1 <= B <= N, got N={N}, B={B}")


def check_complete_cap(N: int, allow_large: bool = False) -> None:
    if N > COMPLETE_RANKINGS_MAX_N and not allow_large:
        raise StateSpaceTooLarge(
            f"complete rankings over N={N} objects means {math.factorial(N)} states; "
            f"cap is N <= {COMPLETE_RANKINGS_MAX_N} (pass allow_large to override)"
        )


# -- Steinhaus-Johnson-Trotter --------------------------------------------

def sjt_permutations(n: int) -> Iterator[tuple[int, ...]]:
    """Permutations of 0..n-1 in Steinhaus-Johnson-Trotter order.

    Each successive permutation differs from the previous one by one adjacent
    transposition. Uses directed integers; O(n) memory.
    """
    perm = list(range(n))
    direction = [-1] * n  # -1: looking left
    pos = list(range(n))
    yield tuple(perm)
    while True:
        mobile = -1
        for v in range(n - 1, -1, -1):
            p = pos[v]
            q = p + direction[v]
            if 0 <= q < n and perm[q] < v:
                mobile = v
                break
        if mobile < 0:
            return
        p = pos[mobile]
        q = p + direction[mobile]
        other = perm[q]
        perm[p], perm[q] = other, mobile
        pos[mobile], pos[other] = q, p
        for v in range(mobile + 1, n):
            direction[v] = -direction[v]
        yield tuple(perm)


def sjt_rank(perm) -> int:
    """Position of a permutation of 0..n-1 in the SJT order of ``sjt_permutations``."""
    n = len(perm)
    r = 0
    for j in range(1, n):
        # position of value j among values 0..j
        k = 0
        for v in perm:
            if v == j:
                break
            if v < j:
                k += 1
        if r % 2 == 0:
            r = (j + 1) * r + j - k
        else:
            r = (j + 1) * r + k
    return r


def sjt_unrank(n: int, r: int) -> tuple[int, ...]:
    if not 0 <= r < math.factorial(n):
        raise ValueError(f"rank {r} out of range for n={n}")
    digits = []
    for j in range(n, 1, -1):
        digits.append(r % j)
        r //= j
    digits.reverse()  # digits[j-2] is the offset when inserting value j-1
    perm = [0]
    parent = 0
    for j in range(1, n):
        d = digits[j - 1]
        k = j - d if parent % 2 == 0 else d
        perm.insert(k, j)
        parent = parent * (j + 1) + d
    return tuple(perm)


@lru_cache(maxsize=16)
def sjt_table(n: int) -> np.ndarray:
    """All permutations of 0..n-1 in SJT order, as an (n!, n) array."""
    if n > 10:
        raise StateSpaceTooLarge(f"SJT table for n={n} is too large to materialize")
    table = np.array(list(sjt_permutations(n)), dtype=np.int16).reshape(-1, n)
    table.setflags(write=False)
    return table


# -- combinations ------------------------------------------------------------

def combination_rank(members, N: int) -> int:
    """Lexicographic rank of a subset of {1..N} among subsets of the same size."""
    c = sorted(members)
    B = len(c)
    r = 0
    prev = 0
    for i, v in enumerate(c, start=1):
        for u in range(prev + 1, v):
            r += math.comb(N - u, B - i)
        prev = v
    return r


def combination_unrank(r: int, N: int, B: int) -> tuple[int, ...]:
    if not 0 <= r < math.comb(N, B):
        raise ValueError(f"rank {r} out of range for C({N},{B})")
    out = []
    v = 1
    for i in range(1, B + 1):
        while True:
            block = math.comb(N - v, B - i)
            if r < block:
                break
            r -= block
            v += 1
        out.append(v)
        v += 1
    return tuple(out)


# -- enumeration -------------------------------------------------------------

def enumerate_ranked(N: int, B: int, start: int = 0, stop: int | None = None) -> Iterator[RankedState]:
    """Yield B-permutations of {1..N} in index order (optionally an index range)."""
    _check_sizes(N, B)
    size = math.perm(N, B)
    stop = size if stop is None else min(stop, size)
    if start >= stop:
        return
    per = math.factorial(B)
    c_first, p_first = divmod(start, per)
    i = c_first * per
    for combo in itertools.islice(itertools.combinations(range(1, N + 1), B), c_first, None):
        for perm in sjt_permutations(B):
            if i >= stop:
                return
            if i >= start:
                yield tuple(combo[p] for p in perm)
            i += 1


def enumerate_sets(N: int, B: int, start: int = 0, stop: int | None = None) -> Iterator[SetState]:
    _check_sizes(N, B)
    stop = math.comb(N, B) if stop is None else stop
    for combo in itertools.islice(itertools.combinations(range(1, N + 1), B), start, stop):
        yield frozenset(combo)


def enumerate_complete(N: int, allow_large: bool = False) -> Iterator[RankedState]:
    check_complete_cap(N, allow_large)
    return enumerate_ranked(N, N)


def enumerate_space(space: Space) -> Iterator[State]:
    if space.kind == "sets":
        return enumerate_sets(space.N, space.B)
    return enumerate_ranked(space.N, space.B)


def _validate_ranked(state, N: int) -> None:
    if not 1 <= len(state) <= N:
        raise ValueError(f"state {state!r} has invalid length for N={N}")
    if len(set(state)) != len(state):
        raise ValueError(f"state {state!r} has repeated objects")
    if any(not (isinstance(x, (int, np.integer)) and 1 <= x <= N) for x in state):
        raise ValueError(f"state {state!r} has objects outside 1..{N}")


def state_index(state: State, N: int) -> int:
    """Position of ``state`` in its enumeration order (a bijection onto [0, size))."""
    if isinstance(state, (set, frozenset)):
        _validate_ranked(tuple(state), N)
        return combination_rank(state, N)
    state = tuple(state)
    _validate_ranked(state, N)
    combo = sorted(state)
    where = {v: i for i, v in enumerate(combo)}
    pattern = [where[v] for v in state]
    return combination_rank(combo, N) * math.factorial(len(state)) + sjt_rank(pattern)


def state_from_index(index: int, space: Space) -> State:
    """Inverse of ``state_index``."""
    if not 0 <= index < space.size:
        raise ValueError(f"index {index} out of range for {space}")
    if space.kind == "sets":
        return frozenset(combination_unrank(index, space.N, space.B))
    c, p = divmod(index, math.factorial(space.B))
    combo = combination_unrank(c, space.N, space.B)
    return tuple(combo[i] for i in sjt_unrank(space.B, p))


# -- dense arrays ------------------------------------------------------------

def _dtype(N: int):
    return np.int8 if N < 127 else np.int32


def set_states(N: int, B: int) -> np.ndarray:
    """(C(N,B), B) array of subsets, rows in index order, members ascending."""
    _check_sizes(N, B)
    arr = np.fromiter(
        itertools.chain.from_iterable(itertools.combinations(range(1, N + 1), B)),
        dtype=_dtype(N),
        count=math.comb(N, B) * B,
    )
    return arr.reshape(-1, B)


def ranked_states(N: int, B: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """(M, B) array of B-permutations in index order; column 0 is rank 1.

    ``start``/``stop`` select an index range so large spaces can be processed
    in blocks.
    """
    _check_sizes(N, B)
    size = math.perm(N, B)
    stop = size if stop is None else min(stop, size)
    per = math.factorial(B)
    table = sjt_table(B)
    c0, c1 = start // per, -(-stop // per)
    combos = np.array(
        list(itertools.islice(itertools.combinations(range(1, N + 1), B), c0, c1)),
        dtype=_dtype(N),
    ).reshape(-1, B)
    block = combos[:, table].reshape(-1, B)
    offset = start - c0 * per
    return block[offset:offset + (stop - start)]


def complete_states(N: int, allow_large: bool = False) -> np.ndarray:
    check_complete_cap(N, allow_large)
    return ranked_states(N, N)


def space_states(space: Space) -> np.ndarray:
    if space.kind == "sets":
        return set_states(space.N, space.B)
    return ranked_states(space.N, space.B)
