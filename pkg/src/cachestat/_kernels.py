"""Compiled inner loops for the cache and network simulators.

Objects are 0-based here. Random inputs arrive as pre-drawn uniform arrays so
the kernels themselves are deterministic.
"""

import math

import numpy as np
from numba import njit

KRU = 0  # evict rank k on a miss, hits promote to rank 1
KRP = 1  # hits promote by up to k ranks, misses enter at rank B
RANDOM = 2


@njit(cache=True)
def run_cache(code, k, B, order, size, objs, evict_u, measure, hits, queries,
              log_hit, log_evicted, log_rank):
    """Feed the query stream ``objs`` through one cache.

    ``order[:size[0]]`` holds the cached objects by rank. With ``measure`` set,
    per-object hit and query counts accumulate into ``hits``/``queries``.
    Passing non-empty ``log_*`` arrays records, per query, whether it hit and
    which object (and rank, 1-based) was evicted, or -1.
    """
    logging = log_hit.shape[0] > 0
    s = size[0]
    for t in range(objs.shape[0]):
        n = objs[t]
        j = -1
        for i in range(s):
            if order[i] == n:
                j = i
                break
        evicted = -1
        erank = -1
        if j >= 0:
            if measure:
                hits[n] += 1
            if code == KRU:
                for i in range(j, 0, -1):
                    order[i] = order[i - 1]
                order[0] = n
            elif code == KRP:
                m = min(k, j)
                for i in range(j, j - m, -1):
                    order[i] = order[i - 1]
                order[j - m] = n
        else:
            if code == KRU:
                if s < B:
                    for i in range(s, 0, -1):
                        order[i] = order[i - 1]
                    s += 1
                else:
                    evicted = order[k - 1]
                    erank = k
                    for i in range(k - 1, 0, -1):
                        order[i] = order[i - 1]
                order[0] = n
            elif code == KRP:
                if s < B:
                    order[s] = n
                    s += 1
                else:
                    evicted = order[B - 1]
                    erank = B
                    order[B - 1] = n
            else:
                if s < B:
                    order[s] = n
                    s += 1
                else:
                    slot = min(int(evict_u[t] * B), B - 1)
                    evicted = order[slot]
                    erank = slot + 1
                    order[slot] = n
        if measure:
            queries[n] += 1
        if logging:
            log_hit[t] = j >= 0
            log_evicted[t] = evicted
            log_rank[t] = erank
    size[0] = s


@njit(cache=True)
def delayed_arrivals(clock, rates, delay, u, out):
    """Merge per-object renewal streams: fill ``out`` with objects in firing order.

    Each fired object's clock advances by ``delay + Exp(rate)`` using the
    inverse transform of the matching uniform in ``u``.
    """
    N = clock.shape[0]
    for t in range(out.shape[0]):
        n = 0
        best = clock[0]
        for i in range(1, N):
            if clock[i] < best:
                best = clock[i]
                n = i
        out[t] = n
        clock[n] = best + delay - math.log1p(-u[t]) / rates[n]


@njit(cache=True)
def run_network(N, caps, local, internet, b_size, b, cache_of, obj_of, u1, u2,
                measure, counts, key_radix, local_hits, local_queries, misses):
    """Advance a two-level RE tree over a stream of (cache, object) queries.

    ``local[q, :caps[q]]`` are the members of local cache q (always full in the
    measured regime); ``internet[:b_size[0]]`` the internet cache. Before each
    measured query, ``counts[key, m]`` is incremented for objects m in the
    internet cache and ``counts[key, N]`` counts the visit, where ``key``
    encodes the local occupancy as bitmasks (skipped when ``counts`` is
    empty). ``misses[m]`` counts local misses.
    """
    Q = caps.shape[0]
    track = counts.shape[0] > 0
    for t in range(cache_of.shape[0]):
        q = cache_of[t]
        n = obj_of[t]
        if measure and track:
            key = 0
            for c in range(Q):
                mask = 0
                for i in range(caps[c]):
                    mask |= 1 << local[c, i]
                key = key * key_radix + mask
            for i in range(b_size[0]):
                counts[key, internet[i]] += 1
            counts[key, N] += 1
        hit = False
        for i in range(caps[q]):
            if local[q, i] == n:
                hit = True
                break
        if measure:
            local_queries[q, n] += 1
        if hit:
            if measure:
                local_hits[q, n] += 1
            continue
        if measure:
            misses[n] += 1
        slot = min(int(u1[t] * caps[q]), caps[q] - 1)
        local[q, slot] = n
        in_internet = False
        for i in range(b_size[0]):
            if internet[i] == n:
                in_internet = True
                break
        if not in_internet:
            if b_size[0] < b:
                internet[b_size[0]] = n
                b_size[0] += 1
            else:
                internet[min(int(u2[t] * b), b - 1)] = n
