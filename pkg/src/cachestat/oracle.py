"""Brute-force Markov chains for single caches.

Transitions are generated forward (state + query -> next state). The
predecessor maps used in hand balance arguments (``lru_miss_predecessor`` and
friends) are provided so the two descriptions can be checked against each
other.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from .domain import Catalog, Policy
from .exact import Distribution
from .state_space import Space, State, StateSpaceTooLarge, enumerate_space

log = logging.getLogger(__name__)

DEFAULT_CAP = 50_000
DIRECT_SOLVE_MAX = 5_000


class NotIrreducibleError(RuntimeError):
    """The chain has more than one closed communicating class."""


@dataclass
class TransitionSet:
    """Outgoing transitions of one state; ``self_rate`` collects queries that change nothing."""

    source: State
    targets: list[tuple[State, float]]
    self_rate: float

    @property
    def out_rate(self) -> float:
        return sum(rate for _, rate in self.targets)


def policy_space(policy: Policy, N: int, B: int) -> Space:
    return Space.ranked(N, B) if policy.ranked else Space.sets(N, B)


def next_state(policy: Policy, state: tuple, n: int, B: int) -> tuple:
    """State of a full ranked cache after a query for object ``n``."""
    if not policy.ranked:
        raise ValueError("random eviction has no deterministic successor; use transitions()")
    r = list(state)
    if policy.is_kru_family:
        if n in r:
            j = r.index(n)
            return tuple([n] + r[:j] + r[j + 1:])
        k = policy.eviction_rank(B)
        return tuple([n] + r[:k - 1] + r[k:])
    step = policy.promotion_step()
    if n in r:
        j = r.index(n)
        m = min(step, j)
        del r[j]
        r.insert(j - m, n)
        return tuple(r)
    return tuple(r[:-1] + [n])


def transitions(policy: Policy, state: State, cat: Catalog, B: int) -> TransitionSet:
    if len(state) != B:
        raise ValueError(f"state {state!r} is not a full cache of size {B}")
    if policy.ranked:
        if not isinstance(state, tuple):
            raise ValueError(f"{policy} needs a ranked (tuple) state")
        targets, self_rate = [], 0.0
        for n in range(1, cat.N + 1):
            t = next_state(policy, state, n, B)
            if t == state:
                self_rate += cat.rate(n)
            else:
                targets.append((t, cat.rate(n)))
        return TransitionSet(state, targets, self_rate)
    if not isinstance(state, frozenset):
        raise ValueError("random eviction needs a set (frozenset) state")
    targets = []
    self_rate = 0.0
    for n in range(1, cat.N + 1):
        if n in state:
            self_rate += cat.rate(n)
            continue
        for m in sorted(state):
            targets.append(((state - {m}) | {n}, cat.rate(n) / B))
    return TransitionSet(state, targets, self_rate)


# -- predecessor maps (inverse operators) -----------------------------------

def lru_miss_predecessor(r: tuple, n: int) -> tuple:
    """State from which a miss on ``r[0]`` leads to ``r`` under LRU; ``n`` is evicted."""
    return tuple(r[1:]) + (n,)


def mru_miss_predecessor(r: tuple, n: int) -> tuple:
    return (n,) + tuple(r[1:])


def hit_predecessor(r: tuple, j: int) -> tuple:
    """State with ``r[0]`` at rank ``j`` that a hit on it turns into ``r`` (LRU and MRU)."""
    return tuple(r[1:j]) + (r[0],) + tuple(r[j:])


def irp_hit_predecessor(r: tuple, k: int) -> tuple:
    """``r`` with ranks k and k+1 swapped; a hit on ``r[k-1]`` there yields ``r``."""
    s = list(r)
    s[k - 1], s[k] = s[k], s[k - 1]
    return tuple(s)


def irp_miss_predecessor(r: tuple, n: int) -> tuple:
    return tuple(r[:-1]) + (n,)


# -- generators and solvers -------------------------------------------------

def generator(policy: Policy, cat: Catalog, B: int, cap: int = DEFAULT_CAP) -> tuple[Space, sp.csr_matrix]:
    """Infinitesimal generator over the policy's state space, in ``state_index`` order."""
    if not 1 <= B < cat.N:
        raise ValueError(f"need 1 <= B < N, got B={B}, N={cat.N}")
    space = policy_space(policy, cat.N, B)
    if space.size > cap:
        raise StateSpaceTooLarge(f"{space.size} states exceeds the oracle cap of {cap}")
    states = list(enumerate_space(space))
    index = {s: i for i, s in enumerate(states)}
    rows, cols, vals = [], [], []
    for i, s in enumerate(states):
        for t, rate in transitions(policy, s, cat, B).targets:
            rows.append(i)
            cols.append(index[t])
            vals.append(rate)
    return space, assemble_generator(rows, cols, vals, space.size)


def assemble_generator(rows, cols, vals, size: int) -> sp.csr_matrix:
    off = sp.csr_matrix((vals, (rows, cols)), shape=(size, size))
    exit_rates = np.asarray(off.sum(axis=1)).ravel()
    return (off - sp.diags(exit_rates)).tocsr()


def _closed_class(Q: sp.csr_matrix) -> np.ndarray:
    off = Q - sp.diags(Q.diagonal())
    off.eliminate_zeros()
    n_comp, labels = connected_components(off, directed=True, connection="strong")
    if n_comp == 1:
        return np.arange(Q.shape[0])
    coo = off.tocoo()
    leaving = labels[coo.row] != labels[coo.col]
    open_ = np.zeros(n_comp, dtype=bool)
    open_[labels[coo.row[leaving]]] = True
    closed = np.flatnonzero(~open_)
    if len(closed) != 1:
        raise NotIrreducibleError(f"chain has {len(closed)} closed classes")
    return np.flatnonzero(labels == closed[0])


def _direct(Q: sp.csr_matrix) -> np.ndarray:
    A = Q.T.tolil()
    A[A.shape[0] - 1, :] = 1.0
    b = np.zeros(A.shape[0])
    b[-1] = 1.0
    pi = spsolve(A.tocsr(), b)
    return np.clip(pi, 0.0, None)


def _power(Q: sp.csr_matrix, uniformization: float, tol: float, patience: int, max_sweeps: int) -> np.ndarray:
    n = Q.shape[0]
    PT = (sp.identity(n, format="csr") + Q / uniformization).T.tocsr()
    pi = np.full(n, 1.0 / n)
    calm = 0
    for _ in range(max_sweeps):
        nxt = PT @ pi
        nxt /= nxt.sum()
        change = np.max(np.abs(nxt - pi))
        pi = nxt
        calm = calm + 1 if change <= tol else 0
        if calm >= patience:
            return pi
    raise RuntimeError(f"power iteration did not converge in {max_sweeps} sweeps")


def solve_generator(Q: sp.csr_matrix, method: str = "auto", uniformization: float | None = None,
                    tol: float = 1e-14, patience: int = 10, max_sweeps: int = 200_000) -> np.ndarray:
    """Stationary vector of a generator; transient states get zero mass.

    ``method`` is ``"direct"`` (sparse LU), ``"power"`` (uniformized jump chain)
    or ``"auto"`` (direct up to 5,000 recurrent states).
    """
    keep = _closed_class(Q)
    Qc = Q[keep][:, keep].tocsr() if len(keep) < Q.shape[0] else Q
    if method == "auto":
        method = "direct" if len(keep) <= DIRECT_SOLVE_MAX else "power"
    if method == "direct":
        sub = _direct(Qc)
    elif method == "power":
        lam = uniformization if uniformization is not None else float(np.max(-Qc.diagonal()))
        sub = _power(Qc, lam, tol, patience, max_sweeps)
    else:
        raise ValueError(f"unknown method {method!r}")
    sub /= sub.sum()
    pi = np.zeros(Q.shape[0])
    pi[keep] = sub
    scale = float(np.max(-Q.diagonal()))
    resid = float(np.max(np.abs(Q.T @ pi))) / scale
    if resid > 1e-12:
        log.warning("stationary residual %.3g above 1e-12 (method=%s)", resid, method)
    return pi


def stationary_solve(policy: Policy, cat: Catalog, B: int, method: str = "auto",
                     cap: int = DEFAULT_CAP) -> Distribution:
    """Numerical stationary distribution of the policy's chain."""
    space, Q = generator(policy, cat, B, cap)
    return Distribution(space, solve_generator(Q, method, uniformization=cat.total_rate))


def _flows(Q: sp.csr_matrix, pi: np.ndarray) -> sp.csr_matrix:
    off = Q - sp.diags(Q.diagonal())
    off.eliminate_zeros()
    return sp.diags(pi) @ off


def generator_balance_residual(Q: sp.csr_matrix, pi: np.ndarray, floor: float = 1e-300) -> float:
    F = _flows(Q, pi)
    inflow = np.asarray(F.sum(axis=0)).ravel()
    outflow = np.asarray(F.sum(axis=1)).ravel()
    live = (pi >= floor) & (outflow > 0)
    return float(np.max(np.abs(inflow[live] - outflow[live]) / outflow[live]))


def generator_detailed_balance_violation(Q: sp.csr_matrix, pi: np.ndarray) -> float:
    F = _flows(Q, pi).tocsr()
    R = F.T.tocsr()
    coo = F.tocoo()
    live = coo.data > 0
    rows, cols, fwd = coo.row[live], coo.col[live], coo.data[live]
    back = np.asarray(R[rows, cols]).ravel()
    if len(fwd) == 0:
        return 0.0
    return float(np.max(np.abs(fwd - back) / fwd))


def _checked_generator(dist: Distribution, policy: Policy, cat: Catalog, B: int, cap: int):
    space, Q = generator(policy, cat, B, cap)
    if dist.space != space:
        raise ValueError(f"distribution lives on {dist.space}, {policy} needs {space}")
    return Q


def balance_residual(dist: Distribution, policy: Policy, cat: Catalog, B: int,
                     cap: int = DEFAULT_CAP) -> float:
    """Max over states of ``|inflow - outflow| / outflow`` under ``dist``."""
    return generator_balance_residual(_checked_generator(dist, policy, cat, B, cap), dist.mass)


def detailed_balance_violation(dist: Distribution, policy: Policy, cat: Catalog, B: int,
                               cap: int = DEFAULT_CAP) -> float:
    """Max over transitions ``s -> t`` of ``|pi(s)q(s,t) - pi(t)q(t,s)| / (pi(s)q(s,t))``."""
    return generator_detailed_balance_violation(_checked_generator(dist, policy, cat, B, cap), dist.mass)
