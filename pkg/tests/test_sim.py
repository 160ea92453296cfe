import numpy as np
import pytest

from cachestat import IRM, IRP, LRU, MRU, RE, Catalog, DemandModel, krp, kru, zipf_catalog
from cachestat.exact import hit_profile
from cachestat.sim import SimConfig, hit_rate_table, simulate, trace


def _cfg(policy=LRU, cat=None, B=2, **kw):
    cat = Catalog((2.0, 1.0, 1.0)) if cat is None else cat
    kw.setdefault("measured_queries", 100_000)
    kw.setdefault("replications", 4)
    return SimConfig(policy, cat, B, **kw)


def test_lru_matches_exact(small):
    est = simulate(SimConfig(LRU, small, 2, measured_queries=100_000, replications=10, seed=2))
    exact = hit_profile(LRU, small, 2).h
    assert np.all(np.abs(est.h_hat - exact) <= 3 * est.stderr + 1e-12)


@pytest.mark.parametrize("policy", [LRU, MRU, IRP, RE, krp(2), kru(2)])
def test_uniform_symmetry(policy):
    cat = Catalog((1.0,) * 4)
    est = simulate(_cfg(policy, cat, 2, seed=4))
    assert np.allclose(est.h_hat, 0.5, atol=0.01)


def test_deterministic():
    cfg = _cfg(RE, zipf_catalog(6, 0.75), 3, demand=DemandModel.delayed(1.0), seed=9)
    a, b = simulate(cfg), simulate(cfg)
    assert np.array_equal(a.hits_n, b.hits_n) and np.array_equal(a.queries_n, b.queries_n)
    assert a.H_hat == b.H_hat and np.array_equal(a.stderr, b.stderr, equal_nan=True)
    other = simulate(_cfg(RE, zipf_catalog(6, 0.75), 3, demand=DemandModel.delayed(1.0), seed=10))
    assert not np.array_equal(a.hits_n, other.hits_n)


def test_zero_delay_trace_equals_irm():
    cat = zipf_catalog(6, 0.75)
    t_irm = trace(_cfg(LRU, cat, 3, seed=3), 5000)
    t_zero = trace(_cfg(LRU, cat, 3, demand=DemandModel.delayed(0.0), seed=3), 5000)
    for field in ("objects", "hit", "evicted", "evicted_rank"):
        assert np.array_equal(getattr(t_irm, field), getattr(t_zero, field))


def test_mru_evicts_last_queried_object():
    cat = zipf_catalog(8, 0.75)
    log = trace(_cfg(MRU, cat, 4, seed=1), 20_000)
    ev = np.flatnonzero(log.evicted > 0)
    assert len(ev) > 1000
    assert np.all(log.evicted_rank[ev] == 1)
    assert np.all(~log.hit[ev])
    assert np.all(log.evicted[ev] == log.objects[ev - 1])


def test_kru_evicts_at_rank_k():
    log = trace(_cfg(kru(3), zipf_catalog(8, 0.75), 5, seed=1), 5000)
    ranks = log.evicted_rank[log.evicted > 0]
    assert len(ranks) and np.all(ranks == 3)


def test_cache_fills_from_empty():
    log = trace(_cfg(LRU, zipf_catalog(8, 0.75), 4, seed=1), 200)
    distinct_before_first_eviction = len(set(log.objects[:np.flatnonzero(log.evicted > 0)[0]]))
    assert distinct_before_first_eviction == 4


def test_krp1_matches_irp():
    cat = zipf_catalog(8, 0.75)
    est = simulate(_cfg(krp(1), cat, 4, measured_queries=200_000, replications=10, seed=5))
    exact = hit_profile(IRP, cat, 4).h
    assert np.all(np.abs(est.h_hat - exact) <= 4 * est.stderr)


def test_aggregate_identity():
    est = simulate(_cfg(kru(2), zipf_catalog(6, 0.75), 3, seed=8))
    q = est.queries_n
    assert est.H_hat == pytest.approx(float(np.sum(est.h_hat * q / q.sum())), abs=1e-12)
    assert np.all((est.h_hat >= 0) & (est.h_hat <= 1))


def test_no_data_objects():
    cat = Catalog((1.0,) * 3 + (1e-9,))
    est = simulate(_cfg(LRU, cat, 2, measured_queries=2_000, replications=2, seed=0))
    assert est.no_data[3] and np.isnan(est.h_hat[3])
    assert np.all(~np.isnan(est.h_hat[:3]))
    assert est.H_hat == pytest.approx(est.hits_n.sum() / est.queries_n.sum())


@pytest.mark.parametrize("kw", [dict(measured_queries=0), dict(replications=0), dict(warmup_queries=-1),
                                dict(B=3), dict(policy=kru(3))])
def test_invalid_configs(kw):
    base = dict(policy=LRU, cat=Catalog((2.0, 1.0, 1.0)), B=2)
    base.update(kw)
    with pytest.raises(ValueError):
        SimConfig(**base)


def test_default_warmup():
    assert _cfg(LRU, zipf_catalog(12, 0.75), 6).warmup == 720


def test_delayed_mru_table_cell():
    est = simulate(SimConfig(MRU, zipf_catalog(12, 0.75), 6, DemandModel.delayed(1.0),
                             measured_queries=1_000_000, replications=4, seed=0))
    assert est.H_hat == pytest.approx(0.4578, abs=0.01)


def test_hit_rate_table_exact_column(zipf12):
    table = hit_rate_table(zipf12, 6, [3, 6], [0.0])
    assert table.value(6, 0.0) == pytest.approx(0.62, abs=0.005)
    assert table.value(3, 0.0) == pytest.approx(0.56, abs=0.005)
    assert np.all(np.isnan(table.stderr))
