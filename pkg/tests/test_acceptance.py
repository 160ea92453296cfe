"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``CRITERION n: PASS|FAIL`` line with the measured
values so the outcome is visible in ``pytest -v`` logs.
"""

import time

import numpy as np
import pytest

from cachestat import IRP, LRU, MRU, RE, DemandModel, krp, kru, zipf_catalog
from cachestat.exact import distribution, hit_profile, total_probability_identity_residual
from cachestat.network import NetworkSpec, conditional_internet_invariant, full_chain_solve, simulate_network
from cachestat.oracle import detailed_balance_violation, stationary_solve
from cachestat.sim import SimConfig, simulate
from cachestat.verification import identity_sweep, kru_convention_report, mru_balance_check

TABLE_D0 = [0.52, 0.54, 0.56, 0.58, 0.60, 0.62]
ASYM = NetworkSpec(((3.0, 2.0, 1.0), (1.0, 2.0, 4.0)), (1, 1), 1)


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail
    return emit


def test_c01_oracle_equivalence(report):
    cat = zipf_catalog(5, 0.75)
    t0 = time.perf_counter()
    dists = {p.label: distribution(p, cat, 3).max_abs_diff(stationary_solve(p, cat, 3))
             for p in (LRU, MRU, kru(2), IRP, RE)}
    elapsed = time.perf_counter() - t0
    worst = max(dists.values())
    report(1, worst <= 1e-10 and elapsed < 10, f"max L-inf={worst:.2e} per-policy={dists} time={elapsed:.2f}s")


def test_c02_table_exact_column(report):
    cat = zipf_catalog(12, 0.75)
    t0 = time.perf_counter()
    H = [hit_profile(kru(k), cat, 6).H for k in range(1, 7)]
    elapsed = time.perf_counter() - t0
    err = max(abs(h - t) for h, t in zip(H, TABLE_D0))
    report(2, err <= 0.005 and elapsed < 120, f"H={np.round(H, 5).tolist()} max err={err:.4f} time={elapsed:.1f}s")


def test_c03_table_delayed_columns(report):
    cat = zipf_catalog(12, 0.75)
    targets = {(1, 1.0): 0.4578, (6, 1.0): 0.4423, (1, 2.0): 0.45, (6, 2.0): 0.29}
    got = {}
    for (k, d) in targets:
        cfg = SimConfig(kru(k), cat, 6, DemandModel.delayed(d), measured_queries=10_000_000,
                        replications=10, seed=0)
        got[(k, d)] = simulate(cfg).H_hat
    errs = {key: abs(got[key] - t) for key, t in targets.items()}
    ok = all(e <= 0.01 for e in errs.values())
    detail = " ".join(f"(k={k},D={d:g})={got[(k, d)]:.4f}" for k, d in targets)
    report(3, ok, f"{detail} max err={max(errs.values()):.4f}")


def test_c04_hit_mass(report):
    worst = 0.0
    for N, B in [(5, 3), (12, 3), (12, 6)]:
        cat = zipf_catalog(N, 0.75)
        for p in [LRU, MRU, IRP, RE] + [kru(k) for k in range(2, B)]:
            worst = max(worst, abs(hit_profile(p, cat, B).h.sum() - B))
    report(4, worst <= 1e-9, f"max |sum h - B|={worst:.2e}")


def test_c05_identities(report):
    sweep = identity_sweep(1000, seed=0)
    ok = all(v["passed"] for v in sweep.values())
    extra = total_probability_identity_residual((2, 1, 1), 2, "lru")
    report(5, ok and extra < 1e-12, " ".join(f"{k}: max residual={v['value']:.2e}" for k, v in sweep.items()))


def test_c06_reversibility(report):
    cat5 = zipf_catalog(5, 0.75)
    viol = {p.label: detailed_balance_violation(distribution(p, cat5, 3), p, cat5, 3) for p in (IRP, RE)}
    cat4 = zipf_catalog(4, 0.75)
    lru = detailed_balance_violation(distribution(LRU, cat4, 2), LRU, cat4, 2)
    ok = all(v <= 1e-12 for v in viol.values()) and lru > 0
    report(6, ok, f"irp={viol['irp']:.2e} re={viol['re']:.2e} lru(N=4,B=2)={lru:.3f}")


def test_c07_mru_conditional_balance(report):
    res = mru_balance_check(zipf_catalog(5, 0.75), 3)
    ok = res["conditional_balance"]["passed"] and res["diagonal_is_one"]["passed"]
    report(7, ok, f"gap={res['conditional_balance']['value']:.2e} diagonal exact={res['diagonal_is_one']['value']}")


def test_c08_network(report):
    dist = full_chain_solve(ASYM)
    solve_err = max(abs(p - conditional_internet_invariant(ASYM, loc, next(iter(R))))
                    for loc in dist.locals_marginal() for R, p in dist.conditional(loc).items())
    est = simulate_network(ASYM, 10_000_000, seed=0)
    sim_err = max(abs(occ[R - 1] - conditional_internet_invariant(ASYM, loc, R))
                  for loc, (occ, _) in est.conditional_occupancy.items() for R in range(1, 4))
    gap = dist.product_form_gap()
    ok = solve_err <= 1e-10 and sim_err <= 0.01 and gap > 10 * 1e-10
    report(8, ok, f"solve err={solve_err:.2e} sim err={sim_err:.4f} product-form gap={gap:.4f}")


def test_c09_range_ordering(report):
    cat = zipf_catalog(12, 0.75)
    rng6 = {p.label: hit_profile(p, cat, 6).spread for p in (LRU, MRU, IRP)}
    for k in range(1, 6):
        est = simulate(SimConfig(krp(k), cat, 6, measured_queries=1_000_000, replications=10, seed=0))
        rng6[krp(k).label] = est.spread
    rng3 = {p.label: hit_profile(p, cat, 3).spread for p in (MRU, RE, LRU)}
    climbers = [v for key, v in rng6.items() if key == "irp" or key.endswith("rp")]
    ok = min(climbers) > rng6["lru"] > rng6["mru"] and rng3["mru"] < rng3["re"] < rng3["lru"]
    fmt = lambda d: " ".join(f"{k}={v:.4f}" for k, v in d.items())
    report(9, ok, f"B=6: {fmt(rng6)} | B=3: {fmt(rng3)}")


def test_c10_simulation_agreement(report):
    cat = zipf_catalog(12, 0.75)
    fractions = {}
    for p in [LRU, MRU] + [kru(k) for k in range(2, 6)] + [IRP, RE]:
        exact = hit_profile(p, cat, 6).h
        est = simulate(SimConfig(p, cat, 6, measured_queries=1_000_000, replications=10, seed=1))
        fractions[p.label] = float(np.mean(np.abs(est.h_hat - exact) <= 3 * est.stderr))
    ok = all(f >= 0.95 for f in fractions.values())
    report(10, ok, "fraction within 3 stderr: " + " ".join(f"{k}={v:.3f}" for k, v in fractions.items()))


def test_c11_kru_convention(report):
    rep = kru_convention_report()
    res = rep["residuals"]
    ok = rep["adopted"] is not None and res[rep["adopted"]] <= 1e-10 and all(res[c] > 1e-3 for c in rep["rejected"])
    report(11, ok, f"adopted={rep['adopted']} residuals={ {k: float(f'{v:.3e}') for k, v in res.items()} }")
