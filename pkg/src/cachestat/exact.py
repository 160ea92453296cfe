"""Closed-form stationary distributions and the hit statistics derived from them.

Scalar functions (``lru_invariant`` and friends) evaluate one state with
``math.fsum`` denominators. The ``*_distribution`` functions evaluate whole
state spaces at once on arrays from :mod:`cachestat.state_space`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .domain import Catalog, Policy
from .state_space import (
    Space,
    State,
    check_complete_cap,
    complete_states,
    ranked_states,
    set_states,
    space_states,
    state_index,
)

# Denominator conventions for the ranks-1..k block of the kRU invariant.
# "prefix": rate total minus ranks 1..j-1 (reduces to the LRU invariant at k = B).
# "offset": rate total minus ranks 2..j.
KRU_CONVENTIONS = ("prefix", "offset")
KRU_CONVENTION = "prefix"


@dataclass
class Distribution:
    """Probability mass over an enumerated state space, indexed by ``state_index``."""

    space: Space
    mass: np.ndarray

    def __post_init__(self):
        self.mass = np.asarray(self.mass, dtype=float)
        if self.mass.shape != (self.space.size,):
            raise ValueError(
                f"mass has shape {self.mass.shape}, space {self.space} needs ({self.space.size},)"
            )

    @cached_property
    def states(self) -> np.ndarray:
        return space_states(self.space)

    def __getitem__(self, state: State) -> float:
        return float(self.mass[state_index(state, self.space.N)])

    def total(self) -> float:
        return math.fsum(self.mass)

    def max_abs_diff(self, other: "Distribution") -> float:
        if other.space != self.space:
            raise ValueError(f"space mismatch: {self.space} vs {other.space}")
        return float(np.max(np.abs(self.mass - other.mass)))


@dataclass
class HitProfile:
    """Per-object hit probabilities ``h`` (entry n-1 is object n) and aggregate ``H``."""

    h: np.ndarray
    H: float
    rates: np.ndarray

    @classmethod
    def from_hits(cls, h, rates) -> "HitProfile":
        h = np.asarray(h, dtype=float)
        rates = np.asarray(rates, dtype=float)
        H = math.fsum(h * rates) / math.fsum(rates)
        return cls(h, H, rates)

    @property
    def N(self) -> int:
        return len(self.h)

    def __getitem__(self, n: int) -> float:
        return float(self.h[n - 1])

    @property
    def spread(self) -> float:
        """Range of hit probabilities, ``max h - min h``."""
        return float(self.h.max() - self.h.min())


def _check_capacity(cat: Catalog, B: int) -> None:
    if not 1 <= B < cat.N:
        raise ValueError(f"need 1 <= B < N, got B={B}, N={cat.N}")


def _check_ranked(r, cat: Catalog, B: int) -> tuple:
    r = tuple(r)
    if len(r) != B or len(set(r)) != B or not all(1 <= x <= cat.N for x in r):
        raise ValueError(f"{r!r} is not a {B}-permutation of 1..{cat.N}")
    return r


def _complement_total(cat: Catalog, excluded) -> float:
    excluded = set(excluded)
    return math.fsum(cat.rate(m) for m in range(1, cat.N + 1) if m not in excluded)


# -- scalar closed forms ----------------------------------------------------

def lru_invariant(cat: Catalog, B: int, r) -> float:
    """Stationary probability of LRU state ``r``."""
    _check_capacity(cat, B)
    r = _check_ranked(r, cat, B)
    p = 1.0
    for k in range(B):
        p *= cat.rate(r[k]) / _complement_total(cat, r[:k])
    return p


def _ordering_tail(cat: Catalog, r, first: int) -> float:
    # ranks first+1..B ordered by sampling without replacement within the cache
    B = len(r)
    p = 1.0
    for j in range(first, B - 1):
        p *= cat.rate(r[j]) / math.fsum(cat.rate(x) for x in r[j:])
    return p


def mru_invariant(cat: Catalog, B: int, r) -> float:
    """Stationary probability of MRU state ``r``; B = 1 falls back to LRU."""
    _check_capacity(cat, B)
    r = _check_ranked(r, cat, B)
    if B == 1:
        return lru_invariant(cat, B, r)
    head = cat.rate(r[0]) / cat.total_rate / math.comb(cat.N - 1, B - 1)
    return head * _ordering_tail(cat, r, 1)


def kru_invariant(cat: Catalog, B: int, k: int, r, convention: str = KRU_CONVENTION) -> float:
    """Stationary probability of kRU state ``r`` (evict rank ``k`` on a miss)."""
    _check_capacity(cat, B)
    if not 1 <= k <= B:
        raise ValueError(f"k={k} outside 1..{B}")
    if convention not in KRU_CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    r = _check_ranked(r, cat, B)
    p = 1.0
    for j in range(k):
        skipped = r[:j] if convention == "prefix" else r[1:j + 1]
        p *= cat.rate(r[j]) / _complement_total(cat, skipped)
    p /= math.comb(cat.N - k, B - k)
    return p * _ordering_tail(cat, r, k)


# -- vectorized distributions ---------------------------------------------

def _kahan_cumsum(c: np.ndarray) -> np.ndarray:
    """Compensated inclusive cumulative sum along axis 1."""
    out = np.empty_like(c)
    s = np.zeros(c.shape[0])
    comp = np.zeros(c.shape[0])
    for j in range(c.shape[1]):
        y = c[:, j] - comp
        t = s + y
        comp = (t - s) - y
        s = t
        out[:, j] = s
    return out


def kru_weights(states: np.ndarray, cat: Catalog, k: int, convention: str = KRU_CONVENTION) -> np.ndarray:
    """kRU invariant evaluated on each row of a ranked-state array."""
    B = states.shape[1]
    if not 1 <= k <= B:
        raise ValueError(f"k={k} outside 1..{B}")
    if convention not in KRU_CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    c = cat.rate_array[states - 1]
    prefix = np.zeros_like(c)
    prefix[:, 1:] = _kahan_cumsum(c[:, :-1])  # column j: ranks < j
    total = cat.total_rate
    p = np.ones(len(states))
    for j in range(k):
        if convention == "prefix":
            den = total - prefix[:, j]
        else:
            den = total - (prefix[:, j] + c[:, j] - c[:, 0])
        p *= c[:, j] / den
    p /= math.comb(cat.N - k, B - k)
    if k < B - 1:
        suffix = _kahan_cumsum(c[:, ::-1])[:, ::-1]  # column j: ranks >= j
        for j in range(k, B - 1):
            p *= c[:, j] / suffix[:, j]
    return p


def _blocks(size: int, block_size: int | None):
    step = size if not block_size else block_size
    for start in range(0, size, step):
        yield start, min(size, start + step)


def kru_distribution(cat: Catalog, B: int, k: int, convention: str = KRU_CONVENTION,
                     block_size: int | None = None) -> Distribution:
    _check_capacity(cat, B)
    space = Space.ranked(cat.N, B)
    mass = np.concatenate([
        kru_weights(ranked_states(cat.N, B, a, b), cat, k, convention)
        for a, b in _blocks(space.size, block_size)
    ])
    return Distribution(space, mass)


def lru_distribution(cat: Catalog, B: int, **kw) -> Distribution:
    return kru_distribution(cat, B, B, **kw)


def mru_distribution(cat: Catalog, B: int, **kw) -> Distribution:
    return kru_distribution(cat, B, 1, **kw)


def irp_invariant(cat: Catalog, B: int, block_size: int | None = None) -> Distribution:
    """IRP (CLIMB) stationary distribution: weight prod_k rate(r(k))**(B+1-k), normalized."""
    _check_capacity(cat, B)
    space = Space.ranked(cat.N, B)
    powers = np.arange(B, 0, -1)
    w = np.concatenate([
        np.prod(cat.rate_array[ranked_states(cat.N, B, a, b) - 1] ** powers, axis=1)
        for a, b in _blocks(space.size, block_size)
    ])
    return Distribution(space, w / math.fsum(w))


def re_invariant(cat: Catalog, B: int) -> Distribution:
    """Random-eviction stationary distribution over B-subsets: weight prod of member rates."""
    _check_capacity(cat, B)
    states = set_states(cat.N, B)
    w = np.prod(cat.rate_array[states - 1], axis=1)
    return Distribution(Space.sets(cat.N, B), w / math.fsum(w))


def distribution(policy: Policy, cat: Catalog, B: int, **kw) -> Distribution:
    """Closed-form stationary distribution for any policy that has one."""
    if policy.is_kru_family:
        return kru_distribution(cat, B, policy.eviction_rank(B), **kw)
    if policy.kind == "irp":
        return irp_invariant(cat, B, **kw)
    if policy.kind == "re":
        return re_invariant(cat, B)
    raise ValueError(f"{policy} has no closed-form invariant; simulate it instead")


# -- hit statistics ---------------------------------------------------------

def occupancy(dist: Distribution, states: np.ndarray | None = None) -> np.ndarray:
    """Per-object probability of being cached: sum of mass over states containing n."""
    states = dist.states if states is None else states
    w = np.repeat(dist.mass, states.shape[1])
    return np.bincount(states.ravel().astype(np.intp), weights=w, minlength=dist.space.N + 1)[1:]


def profile_from_distribution(dist: Distribution, cat: Catalog) -> HitProfile:
    return HitProfile.from_hits(occupancy(dist), cat.rate_array)


def hit_profile(policy: Policy, cat: Catalog, B: int) -> HitProfile:
    """Stationary per-object hit probabilities (by PASTA, the cached probabilities)."""
    if not policy.has_closed_form:
        raise ValueError(f"{policy} has no closed-form invariant; use cachestat.sim.simulate")
    return profile_from_distribution(distribution(policy, cat, B), cat)


def mru_conditional_hits(cat: Catalog, B: int) -> np.ndarray:
    """Matrix ``C`` with ``C[j-1, n-1]`` = P(object j cached | object n at rank 1) under MRU."""
    if not 2 <= B < cat.N:
        raise ValueError(f"need 2 <= B < N, got B={B}, N={cat.N}")
    dist = mru_distribution(cat, B)
    states = dist.states.astype(np.intp) - 1
    N = cat.N
    joint = np.zeros((N, N))
    np.add.at(joint, (states.ravel(), np.repeat(states[:, 0], B)), np.repeat(dist.mass, B))
    top = np.bincount(states[:, 0], weights=dist.mass, minlength=N)
    cond = joint / top[None, :]
    np.fill_diagonal(cond, 1.0)
    return cond


def byte_hit_profile(cat: Catalog, capacity_bytes: int, allow_large: bool = False) -> HitProfile:
    """Hit probabilities of variable-length objects under complete-rankings LRU.

    Every object keeps an LRU rank; a ranking caches its longest prefix whose
    lengths fit in ``capacity_bytes``.
    """
    if cat.lengths is None:
        raise ValueError("byte_hit_profile needs a catalog with lengths")
    if capacity_bytes < min(cat.lengths):
        raise ValueError(f"capacity {capacity_bytes} is below the smallest object length")
    check_complete_cap(cat.N, allow_large)
    states = complete_states(cat.N, allow_large)
    pi = kru_weights(states, cat, cat.N)
    lengths = np.asarray(cat.lengths)[states - 1]
    cached = np.cumsum(lengths, axis=1) <= capacity_bytes
    w = (cached * pi[:, None]).ravel()
    h = np.bincount(states.ravel().astype(np.intp), weights=w, minlength=cat.N + 1)[1:]
    return HitProfile.from_hits(h, cat.rate_array)


def complete_rankings_distribution(cat: Catalog, allow_large: bool = False) -> Distribution:
    check_complete_cap(cat.N, allow_large)
    return Distribution(Space.complete(cat.N), kru_weights(complete_states(cat.N, allow_large), cat, cat.N))


# -- total-probability identities ------------------------------------------

def total_probability_identity_residual(rates: Sequence[float], B: int, variant: str) -> float:
    """``|RHS - 1|`` of the total-probability identity behind a balance proof.

    The state is ``r = (1, ..., B)``: the first ``B`` rates, in order. ``variant``
    is ``"lru"`` (denominators over the whole catalog) or ``"mru"``
    (denominators restricted to the cached objects).
    """
    lam = [float(x) for x in rates]
    if not all(math.isfinite(x) and x > 0 for x in lam):
        raise ValueError("rates must be finite and positive")
    if not 1 <= B <= len(lam):
        raise ValueError(f"need 1 <= B <= {len(lam)}, got {B}")
    if variant == "lru":
        # tail[k] = sum of rates at 1-based positions >= k
        tail = {k: math.fsum(lam[k - 1:]) for k in range(1, B + 2)}

        def a(k):  # total minus ranks 1..k-1
            return tail[k]

        def b(k):  # total minus ranks 2..k-1
            return lam[0] + tail[k]

        terms = [math.prod(a(k) / b(k) for k in range(3, B + 2))]
        for j in range(2, B + 1):
            terms.append(math.prod(a(k) / b(k) for k in range(3, j + 1)) * lam[0] / b(j + 1))
    elif variant == "mru":
        cached = lam[:B]

        def c(k):  # cached total minus ranks 1..k
            return math.fsum(cached[k:])

        def d(k):  # cached total minus ranks 2..k
            return lam[0] + math.fsum(cached[k:])

        terms = []
        for j in range(2, B):
            terms.append(math.prod(c(k) / d(k) for k in range(2, j)) * lam[0] / d(j))
        terms.append(math.prod(c(k) / d(k) for k in range(2, B)))
    else:
        raise ValueError(f"variant must be 'lru' or 'mru', got {variant!r}")
    return abs(math.fsum(terms) - 1.0)
