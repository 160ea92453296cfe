"""Discrete-event simulation of a single cache.

Each replication draws its randomness from ``make_rng(seed, replication)``,
so identical configurations give bit-identical estimates. Demand for a
replication is generated in blocks, then pushed through the compiled cache
kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .domain import Catalog, DemandModel, IRM, Policy, kru, make_rng
from .exact import hit_profile

BLOCK = 1 << 18


@dataclass(frozen=True)
class SimConfig:
    policy: Policy
    cat: Catalog
    B: int
    demand: DemandModel = IRM
    warmup_queries: Optional[int] = None  # default 10 * N * B
    measured_queries: int = 1_000_000  # per replication
    seed: int = 0
    replications: int = 10

    def __post_init__(self):
        if not 1 <= self.B < self.cat.N:
            raise ValueError(f"need 1 <= B < N, got B={self.B}, N={self.cat.N}")
        if self.policy.is_kru_family:
            self.policy.eviction_rank(self.B)
        if self.measured_queries < 1:
            raise ValueError("measured_queries must be >= 1")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.warmup_queries is not None and self.warmup_queries < 0:
            raise ValueError("warmup_queries must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    @property
    def warmup(self) -> int:
        if self.warmup_queries is None:
            return 10 * self.cat.N * self.B
        return self.warmup_queries


@dataclass
class SimEstimate:
    """Pooled hit estimates; ``stderr`` comes from the spread across replications.

    Objects never queried in the measurement window have ``h_hat`` = NaN.
    """

    h_hat: np.ndarray
    H_hat: float
    stderr: np.ndarray
    queries_n: np.ndarray
    hits_n: np.ndarray
    H_stderr: float
    per_replication_h: np.ndarray = field(repr=False)

    @property
    def no_data(self) -> np.ndarray:
        return self.queries_n == 0

    @property
    def spread(self) -> float:
        return float(np.nanmax(self.h_hat) - np.nanmin(self.h_hat))


@dataclass
class EventLog:
    """Per-query record of a replication; objects 1-based, -1 marks no eviction."""

    objects: np.ndarray
    hit: np.ndarray
    evicted: np.ndarray
    evicted_rank: np.ndarray


def _policy_code(policy: Policy, B: int) -> tuple[int, int]:
    if policy.is_kru_family:
        return _kernels.KRU, policy.eviction_rank(B)
    if policy.kind in ("irp", "krp"):
        return _kernels.KRP, policy.promotion_step()
    return _kernels.RANDOM, 0


class _Replication:
    """Cache and demand state of one replication."""

    def __init__(self, cfg: SimConfig, index: int):
        self.cfg = cfg
        self.rng = make_rng(cfg.seed, index)
        self.code, self.k = _policy_code(cfg.policy, cfg.B)
        self.order = np.zeros(cfg.B, dtype=np.int64)
        self.size = np.zeros(1, dtype=np.int64)
        self.rates = cfg.cat.rate_array
        self.cum = np.cumsum(cfg.cat.probabilities)
        # a zero delay is the IRM, which samples the next object directly
        self.delayed = not cfg.demand.is_irm
        if self.delayed:
            u = self.rng.random(cfg.cat.N)
            self.clock = cfg.demand.delay - np.log1p(-u) / self.rates

    def demand(self, m: int) -> np.ndarray:
        u = self.rng.random(m)
        if self.delayed:
            out = np.empty(m, dtype=np.int64)
            _kernels.delayed_arrivals(self.clock, self.rates, self.cfg.demand.delay, u, out)
            return out
        objs = np.searchsorted(self.cum, u, side="right")
        return np.minimum(objs, self.cfg.cat.N - 1).astype(np.int64)

    def advance(self, m: int, measure: bool, hits, queries, log=None) -> None:
        empty_i = np.empty(0, dtype=np.int64)
        done = 0
        while done < m:
            step = min(BLOCK, m - done)
            objs = self.demand(step)
            evict_u = self.rng.random(step) if self.code == _kernels.RANDOM else np.empty(step)
            if log is not None:
                lh = np.zeros(step, dtype=np.bool_)
                le = np.empty(step, dtype=np.int64)
                lr = np.empty(step, dtype=np.int64)
            else:
                lh, le, lr = np.empty(0, dtype=np.bool_), empty_i, empty_i
            _kernels.run_cache(self.code, self.k, self.cfg.B, self.order, self.size, objs,
                               evict_u, measure, hits, queries, lh, le, lr)
            if log is not None:
                log.append((objs, lh, le, lr))
            done += step


def _replicate(cfg: SimConfig, index: int) -> tuple[np.ndarray, np.ndarray]:
    rep = _Replication(cfg, index)
    N = cfg.cat.N
    hits = np.zeros(N, dtype=np.int64)
    queries = np.zeros(N, dtype=np.int64)
    rep.advance(cfg.warmup, False, hits, queries)
    rep.advance(cfg.measured_queries, True, hits, queries)
    return hits, queries


def simulate(cfg: SimConfig) -> SimEstimate:
    """Run ``cfg.replications`` independent replications from an empty cache."""
    per_hits, per_queries = zip(*(_replicate(cfg, r) for r in range(cfg.replications)))
    per_hits = np.array(per_hits)
    per_queries = np.array(per_queries)
    hits = per_hits.sum(axis=0)
    queries = per_queries.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        h_hat = np.where(queries > 0, hits / np.maximum(queries, 1), np.nan)
        per_h = np.where(per_queries > 0, per_hits / np.maximum(per_queries, 1), np.nan)
    per_H = per_hits.sum(axis=1) / per_queries.sum(axis=1)
    R = cfg.replications
    if R > 1:
        counts = np.sum(~np.isnan(per_h), axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = np.nansum(per_h, axis=0) / np.maximum(counts, 1)
            dev = np.nansum((per_h - mean) ** 2, axis=0)
            stderr = np.where(counts > 1, np.sqrt(dev / np.maximum(counts - 1, 1) / counts), np.nan)
        H_stderr = float(np.std(per_H, ddof=1) / math.sqrt(R))
    else:
        stderr = np.full(cfg.cat.N, np.nan)
        H_stderr = math.nan
    H_hat = float(hits.sum() / queries.sum())
    return SimEstimate(h_hat, H_hat, stderr, queries, hits, H_stderr, per_h)


def trace(cfg: SimConfig, n_queries: int, replication: int = 0) -> EventLog:
    """Event log of the first ``n_queries`` of a replication (warmup not skipped)."""
    rep = _Replication(cfg, replication)
    N = cfg.cat.N
    chunks = []
    rep.advance(n_queries, False, np.zeros(N, np.int64), np.zeros(N, np.int64), log=chunks)
    objs, lh, le, lr = (np.concatenate(c) for c in zip(*chunks))
    evicted = np.where(le >= 0, le + 1, -1)
    return EventLog(objs + 1, lh, evicted, lr)


@dataclass
class HitRateTable:
    """Aggregate hit rates for each (rank k, delay D); exact cells have NaN stderr."""

    ks: tuple[int, ...]
    delays: tuple[float, ...]
    values: np.ndarray
    stderr: np.ndarray

    def value(self, k: int, delay: float) -> float:
        return float(self.values[self.ks.index(k), self.delays.index(delay)])


def hit_rate_table(cat: Catalog, B: int, ks: Sequence[int], delays: Sequence[float], *,
                   measured_queries: int = 1_000_000, replications: int = 10, seed: int = 0,
                   warmup_queries: Optional[int] = None) -> HitRateTable:
    """kRU aggregate hit rates: closed form for D = 0, simulation otherwise.

    All simulated cells share the seed (common random numbers across cells).
    """
    ks, delays = tuple(ks), tuple(float(d) for d in delays)
    values = np.empty((len(ks), len(delays)))
    stderr = np.full_like(values, np.nan)
    for i, k in enumerate(ks):
        for j, d in enumerate(delays):
            if d == 0:
                values[i, j] = hit_profile(kru(k), cat, B).H
                continue
            est = simulate(SimConfig(kru(k), cat, B, DemandModel.delayed(d), warmup_queries,
                                     measured_queries, seed, replications))
            values[i, j] = est.H_hat
            stderr[i, j] = est.H_stderr
    return HitRateTable(ks, delays, values, stderr)
