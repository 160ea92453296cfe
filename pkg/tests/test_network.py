import itertools
import math

import numpy as np
import pytest

from cachestat.exact import hit_profile, re_invariant
from cachestat.domain import RE, Catalog
from cachestat.network import (
    NetworkSpec, conditional_internet_invariant, full_chain_solve, joint_space_size, local_hit_profiles,
    miss_stream_rates, simulate_network,
)
from cachestat.state_space import StateSpaceTooLarge

ASYM = NetworkSpec(((3.0, 2.0, 1.0), (1.0, 2.0, 4.0)), (1, 1), 1)


def _local_configs(net):
    objs = range(1, net.N + 1)
    return itertools.product(*[itertools.combinations(objs, B) for B in net.capacities])


@pytest.mark.parametrize("kw", [
    dict(rates=((1.0, 0.0),), capacities=(1,)),
    dict(rates=((1.0, 2.0),), capacities=(2,)),
    dict(rates=((1.0, 2.0), (1.0,)), capacities=(1, 1)),
    dict(rates=((1.0, 2.0, 3.0),), capacities=(1,), internet_capacity=3),
    dict(rates=((1.0, 2.0, 3.0),), capacities=(1, 1)),
])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        NetworkSpec(**kw)


def test_single_cache_uniform():
    net = NetworkSpec(((3.0, 1.0, 2.0, 5.0),), (2,), 1)
    for (loc,) in _local_configs(net):
        for R in range(1, 5):
            expected = 0.5 if R in loc else 0.0
            assert conditional_internet_invariant(net, (loc,), R) == pytest.approx(expected, abs=1e-15)


def test_two_object_example():
    a, b, c, d = 2.0, 3.0, 5.0, 7.0
    net = NetworkSpec(((a, b), (c, d)), (1, 1), 1)
    locals_ = ({1}, {2})
    assert conditional_internet_invariant(net, locals_, 1) == pytest.approx(b / (b + c), abs=1e-15)
    assert conditional_internet_invariant(net, locals_, 2) == pytest.approx(c / (b + c), abs=1e-15)
    dist = full_chain_solve(net)
    cond = dist.conditional(locals_)
    assert cond[frozenset({1})] == pytest.approx(b / (b + c), abs=1e-10)


def test_outside_union_is_zero():
    assert conditional_internet_invariant(ASYM, ({1}, {1}), 3) == 0.0


def test_conditional_normalized():
    net = NetworkSpec(((3.0, 2.0, 1.0, 0.5), (1.0, 2.0, 4.0, 1.5)), (2, 1), 1)
    for loc in _local_configs(net):
        union = set().union(*loc)
        total = math.fsum(conditional_internet_invariant(net, loc, R) for R in union)
        assert total == pytest.approx(1.0, abs=1e-14)


def test_rejects_wide_internet():
    net = NetworkSpec(((3.0, 2.0, 1.0),), (1,), 2)
    with pytest.raises(ValueError):
        conditional_internet_invariant(net, ({1},), 1)


def test_full_chain_matches_invariant():
    dist = full_chain_solve(ASYM)
    worst = 0.0
    for loc in dist.locals_marginal():
        for R, p in dist.conditional(loc).items():
            (obj,) = R
            worst = max(worst, abs(p - conditional_internet_invariant(ASYM, loc, obj)))
    assert worst <= 1e-10
    assert dist.balance_residual() <= 1e-10


def test_locals_factorize():
    net = NetworkSpec(((3.0, 2.0, 1.0, 0.5), (1.0, 2.0, 4.0, 1.5)), (2, 1), 1)
    dist = full_chain_solve(net)
    marg = [re_invariant(net.catalog(q), B) for q, B in enumerate(net.capacities)]
    for loc, p in dist.locals_marginal().items():
        assert p == pytest.approx(math.prod(m[r] for m, r in zip(marg, loc)), abs=1e-10)


def test_not_product_form_and_not_reversible():
    dist = full_chain_solve(ASYM)
    assert dist.product_form_gap() > 1e-9
    assert dist.detailed_balance_violation() > 0


def test_miss_stream_rates():
    net = NetworkSpec(((2.0, 1.0, 1.0),), (2,), 1)
    assert np.allclose(miss_stream_rates(net), np.array([2.0, 1.0, 1.0]) * (1 - np.array([0.8, 0.6, 0.6])))
    sym = NetworkSpec(((3.0, 1.0, 2.0), (3.0, 1.0, 2.0)), (1, 1), 1)
    lam = miss_stream_rates(sym)
    assert np.allclose(lam, 2 * miss_stream_rates(NetworkSpec(((3.0, 1.0, 2.0),), (1,), 1)))
    big = NetworkSpec(((3.0, 1.0, 2.0),), (2,), 1)
    assert np.all(miss_stream_rates(big) < miss_stream_rates(sym) / 2)
    with pytest.raises(ValueError):
        miss_stream_rates(net, [hit_profile(RE, Catalog((1.0, 1.0)), 1)])


def test_full_chain_cap():
    net = NetworkSpec((tuple(range(1, 13)),) * 3, (6, 6, 6), 1)
    assert joint_space_size(net) > 50_000
    with pytest.raises(StateSpaceTooLarge):
        full_chain_solve(net)


def test_simulation_matches_invariant():
    est = simulate_network(ASYM, 2_000_000, seed=3)
    exact = miss_stream_rates(ASYM)
    assert np.all(np.abs(est.lam_hat - exact) <= 4 * est.lam_hat_stderr)
    for loc, (occ, visits) in est.conditional_occupancy.items():
        for R in range(1, 4):
            assert abs(occ[R - 1] - conditional_internet_invariant(ASYM, loc, R)) <= 0.02
    prof = local_hit_profiles(ASYM)
    assert np.allclose(est.local_h_hat, [p.h for p in prof], atol=0.01)


def test_simulation_deterministic_and_wide_internet():
    net = NetworkSpec(((3.0, 2.0, 1.0, 1.0),), (1,), 2)
    a = simulate_network(net, 50_000, seed=1)
    b = simulate_network(net, 50_000, seed=1)
    assert np.array_equal(a.lam_hat, b.lam_hat)
    for loc, (occ, _) in a.conditional_occupancy.items():
        # internet holds two distinct objects once full
        assert occ.sum() == pytest.approx(2.0)
