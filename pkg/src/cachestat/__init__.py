"""Exact and simulated hit probabilities for rank-based cache eviction policies."""

from .domain import IRM, IRP, LRU, MRU, RE, Catalog, DemandModel, Policy, krp, kru, make_rng, zipf_catalog
from .exact import Distribution, HitProfile, byte_hit_profile, distribution, hit_profile
from .network import NetworkSpec, conditional_internet_invariant, full_chain_solve, miss_stream_rates, simulate_network
from .oracle import stationary_solve
from .sim import SimConfig, SimEstimate, hit_rate_table, simulate, trace
from .state_space import Space, StateSpaceTooLarge, state_from_index, state_index

__all__ = [
    "Catalog", "DemandModel", "IRM", "Policy", "LRU", "MRU", "IRP", "RE", "kru", "krp",
    "make_rng", "zipf_catalog",
    "Distribution", "HitProfile", "distribution", "hit_profile", "byte_hit_profile",
    "stationary_solve",
    "SimConfig", "SimEstimate", "simulate", "trace", "hit_rate_table",
    "NetworkSpec", "conditional_internet_invariant", "miss_stream_rates", "full_chain_solve",
    "simulate_network",
    "Space", "StateSpaceTooLarge", "state_index", "state_from_index",
]
