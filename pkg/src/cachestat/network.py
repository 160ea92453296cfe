"""Two-level tree of random-eviction caches.

Q independent local caches forward their misses to one internet cache. A
local miss on n evicts a uniformly chosen local object; if the internet cache
misses too, it also evicts a uniformly chosen object and stores n. Hits change
nothing anywhere.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .domain import Catalog, make_rng
from .exact import HitProfile, profile_from_distribution, re_invariant
from .oracle import (
    DEFAULT_CAP,
    assemble_generator,
    generator_balance_residual,
    generator_detailed_balance_violation,
    solve_generator,
)
from .state_space import StateSpaceTooLarge


class JointState(NamedTuple):
    locals: tuple  # tuple[frozenset[int], ...], one per local cache
    internet: frozenset


@dataclass(frozen=True)
class NetworkSpec:
    """``rates[q][n-1]`` is the query rate for object n at local cache q."""

    rates: tuple
    capacities: tuple
    internet_capacity: int = 1

    def __post_init__(self):
        rates = tuple(tuple(float(x) for x in row) for row in self.rates)
        if not rates:
            raise ValueError("need at least one local cache")
        N = len(rates[0])
        if N < 2 or any(len(row) != N for row in rates):
            raise ValueError("rates must be a Q x N matrix with N >= 2")
        if not all(math.isfinite(x) and x > 0 for row in rates for x in row):
            raise ValueError("all rates must be finite and positive")
        caps = tuple(int(c) for c in self.capacities)
        if len(caps) != len(rates):
            raise ValueError(f"{len(caps)} capacities for {len(rates)} caches")
        if not all(1 <= c < N for c in caps):
            raise ValueError(f"local capacities must lie in 1..{N - 1}")
        if not 1 <= self.internet_capacity < N:
            raise ValueError(f"internet capacity must lie in 1..{N - 1}")
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "capacities", caps)

    @property
    def Q(self) -> int:
        return len(self.rates)

    @property
    def N(self) -> int:
        return len(self.rates[0])

    @property
    def b(self) -> int:
        return self.internet_capacity

    @cached_property
    def rate_matrix(self) -> np.ndarray:
        return np.array(self.rates)

    def catalog(self, q: int) -> Catalog:
        return Catalog(self.rates[q])

    def missing_rate(self, q: int, members) -> float:
        """Total rate at cache q of objects outside ``members``."""
        return math.fsum(x for n, x in enumerate(self.rates[q], start=1) if n not in members)


def _check_locals(net: NetworkSpec, locals_) -> tuple:
    locals_ = tuple(frozenset(r) for r in locals_)
    if len(locals_) != net.Q:
        raise ValueError(f"expected {net.Q} local states, got {len(locals_)}")
    for q, r in enumerate(locals_):
        if len(r) != net.capacities[q] or not all(1 <= n <= net.N for n in r):
            raise ValueError(f"local state {set(r)} invalid for cache {q}")
    return locals_


def conditional_internet_invariant(net: NetworkSpec, locals_, R: int) -> float:
    """Stationary P(internet cache holds R | local states), internet capacity 1."""
    if net.b != 1:
        raise ValueError("the conditional internet invariant needs internet capacity 1")
    locals_ = _check_locals(net, locals_)
    missing = [net.missing_rate(q, r) for q, r in enumerate(locals_)]
    num = math.fsum(m / net.capacities[q] for q, (m, r) in enumerate(zip(missing, locals_)) if R in r)
    return num / math.fsum(missing) if num else 0.0


def local_hit_profiles(net: NetworkSpec) -> list[HitProfile]:
    return [profile_from_distribution(re_invariant(net.catalog(q), B), net.catalog(q))
            for q, B in enumerate(net.capacities)]


def miss_stream_rates(net: NetworkSpec, profiles: Optional[Sequence[HitProfile]] = None) -> np.ndarray:
    """Per-object query rate arriving at the internet cache: ``sum_q rate_qn (1 - h_qn)``."""
    if profiles is None:
        profiles = local_hit_profiles(net)
    if len(profiles) != net.Q or any(p.N != net.N for p in profiles):
        raise ValueError("need one N-object hit profile per local cache")
    h = np.array([p.h for p in profiles])
    return np.sum(net.rate_matrix * (1.0 - h), axis=0)


@dataclass
class NetworkDistribution:
    net: NetworkSpec
    states: list
    mass: np.ndarray
    generator: sp.csr_matrix = field(repr=False)

    def locals_marginal(self) -> dict:
        out: dict = {}
        for s, p in zip(self.states, self.mass):
            out[s.locals] = out.get(s.locals, 0.0) + p
        return out

    def local_marginal(self, q: int) -> dict:
        out: dict = {}
        for s, p in zip(self.states, self.mass):
            out[s.locals[q]] = out.get(s.locals[q], 0.0) + p
        return out

    def conditional(self, locals_) -> dict:
        """P(internet state | local states) as ``{frozenset: prob}``."""
        locals_ = _check_locals(self.net, locals_)
        rows = [(s.internet, p) for s, p in zip(self.states, self.mass) if s.locals == locals_]
        total = math.fsum(p for _, p in rows)
        return {R: p / total for R, p in rows}

    def internet_occupancy(self) -> np.ndarray:
        """P(object n is in the internet cache), entry n-1."""
        occ = np.zeros(self.net.N)
        for s, p in zip(self.states, self.mass):
            for n in s.internet:
                occ[n - 1] += p
        return occ

    def balance_residual(self) -> float:
        return generator_balance_residual(self.generator, self.mass)

    def detailed_balance_violation(self) -> float:
        return generator_detailed_balance_violation(self.generator, self.mass)

    def product_form_gap(self) -> float:
        """max_n |P(n in internet) - rate_hat_n / sum(rate_hat)|."""
        lam_hat = miss_stream_rates(self.net)
        return float(np.max(np.abs(self.internet_occupancy() - lam_hat / lam_hat.sum())))


def joint_space_size(net: NetworkSpec) -> int:
    return math.prod(math.comb(net.N, B) for B in net.capacities) * math.comb(net.N, net.b)


def full_chain_solve(net: NetworkSpec, cap: int = DEFAULT_CAP, method: str = "auto") -> NetworkDistribution:
    """Stationary distribution of the whole joint chain by brute force."""
    size = joint_space_size(net)
    if size > cap:
        raise StateSpaceTooLarge(f"joint chain has {size} states, cap is {cap}")
    objs = range(1, net.N + 1)
    local_spaces = [[frozenset(c) for c in itertools.combinations(objs, B)] for B in net.capacities]
    internet_space = [frozenset(c) for c in itertools.combinations(objs, net.b)]
    states = [JointState(tuple(loc), R)
              for loc in itertools.product(*local_spaces) for R in internet_space]
    index = {s: i for i, s in enumerate(states)}
    rows, cols, vals = [], [], []
    for i, s in enumerate(states):
        for q, r in enumerate(s.locals):
            Bq = net.capacities[q]
            for n in objs:
                if n in r:
                    continue
                lam = net.rates[q][n - 1]
                for m in r:
                    new_locals = s.locals[:q] + ((r - {m}) | {n},) + s.locals[q + 1:]
                    if n in s.internet:
                        targets = [(s.internet, lam / Bq)]
                    else:
                        targets = [((s.internet - {l}) | {n}, lam / (Bq * net.b)) for l in s.internet]
                    for R, rate in targets:
                        rows.append(i)
                        cols.append(index[JointState(new_locals, R)])
                        vals.append(rate)
    Q = assemble_generator(rows, cols, vals, len(states))
    total = float(net.rate_matrix.sum())
    pi = solve_generator(Q, method, uniformization=total)
    return NetworkDistribution(net, states, pi, Q)


@dataclass
class NetworkSimEstimate:
    """Simulation output. Objects are 1-based in ``conditional_occupancy`` keys."""

    events: int
    lam_hat: np.ndarray
    lam_hat_stderr: np.ndarray
    local_h_hat: np.ndarray
    conditional_occupancy: Optional[dict]  # {locals: (occupancy per object, visits)}


MAX_TRACKED_BITS = 20


def simulate_network(net: NetworkSpec, events: int, seed: int = 0, warmup: Optional[int] = None,
                     batches: int = 20) -> NetworkSimEstimate:
    """Simulate the joint chain for ``events`` measured queries.

    Because every query arrives at the same total rate whatever the state,
    averages over query instants are time averages.
    """
    if events < batches:
        raise ValueError(f"need at least {batches} events")
    N, Qn = net.N, net.Q
    rng = make_rng(seed, 0)
    rates = net.rate_matrix.ravel()
    total = float(rates.sum())
    cum = np.cumsum(rates / total)
    caps = np.array(net.capacities, dtype=np.int64)
    local = np.zeros((Qn, int(caps.max())), dtype=np.int64)
    for q, B in enumerate(net.capacities):
        local[q, :B] = np.arange(B)
    internet = np.zeros(net.b, dtype=np.int64)
    b_size = np.zeros(1, dtype=np.int64)
    track = Qn * N <= MAX_TRACKED_BITS
    counts = np.zeros((1 << (Qn * N), N + 1) if track else (0, N + 1), dtype=np.int64)
    local_hits = np.zeros((Qn, N), dtype=np.int64)
    local_queries = np.zeros((Qn, N), dtype=np.int64)
    warmup = 100 * N * Qn if warmup is None else warmup

    def run(m, measure, misses):
        done = 0
        while done < m:
            step = min(1 << 18, m - done)
            idx = np.minimum(np.searchsorted(cum, rng.random(step), side="right"), len(rates) - 1)
            u1, u2 = rng.random(step), rng.random(step)
            _kernels.run_network(N, caps, local, internet, b_size, net.b,
                                 (idx // N).astype(np.int64), (idx % N).astype(np.int64), u1, u2,
                                 measure, counts, 1 << N, local_hits, local_queries, misses)
            done += step

    run(warmup, False, np.zeros(N, dtype=np.int64))
    sizes = [events // batches + (1 if i < events % batches else 0) for i in range(batches)]
    batch_rates = []
    for m in sizes:
        misses = np.zeros(N, dtype=np.int64)
        run(m, True, misses)
        batch_rates.append(misses / m * total)
    batch_rates = np.array(batch_rates)
    weights = np.array(sizes) / events
    lam_hat = weights @ batch_rates
    lam_stderr = batch_rates.std(axis=0, ddof=1) / math.sqrt(batches)
    with np.errstate(invalid="ignore", divide="ignore"):
        local_h = local_hits / local_queries

    cond = None
    if track:
        cond = {}
        for key in np.flatnonzero(counts[:, N]):
            masks = []
            rest = int(key)
            for _ in range(Qn):
                rest, mask = divmod(rest, 1 << N)
                masks.append(mask)
            masks.reverse()
            loc = tuple(frozenset(n + 1 for n in range(N) if mask >> n & 1) for mask in masks)
            visits = int(counts[key, N])
            cond[loc] = (counts[key, :N] / visits, visits)
    return NetworkSimEstimate(events, lam_hat, lam_stderr, local_h, cond)
