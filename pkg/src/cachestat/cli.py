"""Command-line front end.

Exit codes: 0 success, 1 invalid configuration or arguments, 2 a verification
check failed, 3 a state-space cap was exceeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import exact, network, sim, verification
from .config import ExperimentConfig, load_config
from .domain import IRM, IRP, LRU, MRU, RE, krp, kru
from .oracle import DEFAULT_CAP
from .state_space import StateSpaceTooLarge

log = logging.getLogger("cachestat")

EXIT_OK, EXIT_INVALID, EXIT_VERIFY, EXIT_CAP = 0, 1, 2, 3


def fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return None if math.isnan(x) or math.isinf(x) else x
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class Writer:
    """Writes artifacts under ``out`` with the resolved config embedded."""

    def __init__(self, cfg: ExperimentConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.written: list[Path] = []

    def _path(self, name: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        self.written.append(path)
        return path

    def csv(self, name: str, header: list[str], rows: list[list]) -> Path:
        path = self._path(name)
        lines = ["# config: " + json.dumps(self.cfg.resolved(), separators=(",", ":")), ",".join(header)]
        lines += [",".join(fmt(x) if not isinstance(x, str) else x for x in row) for row in rows]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
        return path

    def json(self, name: str, payload: dict) -> Path:
        path = self._path(name)
        doc = {"config": self.cfg.resolved(), **payload}
        path.write_text(json.dumps(_jsonable(doc), indent=2, allow_nan=False) + "\n",
                        encoding="utf-8", newline="\n")
        return path

    def profile(self, stem: str, profile_rows: list[list], aggregate: float, header: list[str]) -> Path:
        if self.cfg.output.format == "json":
            records = [dict(zip(header, row)) for row in profile_rows]
            return self.json(stem + ".json", {"objects": records, "aggregate_hit_rate": aggregate})
        rows = profile_rows + [["aggregate", None, aggregate] + [None] * (len(header) - 3)]
        rows[-1] = [x if x is not None else "" for x in rows[-1]]
        return self.csv(stem + ".csv", header, rows)


def _instance(cfg: ExperimentConfig):
    return cfg.catalog.build(), cfg.cache.capacity, cfg.cache.policy.build()


def cmd_exact(cfg: ExperimentConfig, args, w: Writer) -> int:
    cat, B, policy = _instance(cfg)
    if cat.lengths is not None:
        prof = exact.byte_hit_profile(cat, B)
        stem = "exact_bytes_lru"
    else:
        prof = exact.hit_profile(policy, cat, B)
        stem = f"exact_{policy.label}"
    rows = [[n, cat.rate(n), prof[n]] for n in range(1, cat.N + 1)]
    w.profile(stem, rows, prof.H, ["object", "rate", "hit_prob"])
    return EXIT_OK


def _sim_config(cfg: ExperimentConfig, policy=None, demand=None, B=None) -> sim.SimConfig:
    cat, cap, pol = _instance(cfg)
    return sim.SimConfig(policy or pol, cat, B or cap, demand or cfg.demand.build(),
                         cfg.sim.warmup, cfg.sim.queries, cfg.sim.seed, cfg.sim.replications)


def cmd_simulate(cfg: ExperimentConfig, args, w: Writer) -> int:
    sc = _sim_config(cfg)
    est = sim.simulate(sc)
    rows = [[n, sc.cat.rate(n), est.h_hat[n - 1], est.stderr[n - 1], est.queries_n[n - 1]]
            for n in range(1, sc.cat.N + 1)]
    w.profile(f"simulate_{sc.policy.label}", rows, est.H_hat,
              ["object", "rate", "hit_prob", "stderr", "queries"])
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig, args, w: Writer) -> int:
    cat, B, _ = _instance(cfg)
    report = verification.verify_instance(cat, B, cap=args.cap)
    w.json("verify.json", report)
    kc = report["kru_convention"]
    print(f"kRU convention: adopted={kc['adopted']} residuals={kc['residuals']}")
    print("verify:", "PASS" if report["passed"] else "FAIL")
    return EXIT_OK if report["passed"] else EXIT_VERIFY


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def cmd_table1(cfg: ExperimentConfig, args, w: Writer) -> int:
    cat, B, _ = _instance(cfg)
    ks = _ints(args.ks) if args.ks else list(range(1, B + 1))
    delays = _floats(args.delays)
    table = sim.hit_rate_table(cat, B, ks, delays, measured_queries=cfg.sim.queries,
                               replications=cfg.sim.replications, seed=cfg.sim.seed,
                               warmup_queries=cfg.sim.warmup)
    def label(d):
        return f"D{fmt(d)}"
    simulated = [j for j, d in enumerate(delays) if d != 0]
    header = ["k"] + [label(d) for d in delays] + [label(delays[j]) + "_stderr" for j in simulated]
    rows = [[k] + list(table.values[i]) + [table.stderr[i, j] for j in simulated]
            for i, k in enumerate(ks)]
    if cfg.output.format == "json":
        w.json("table1.json", {"ks": ks, "delays": delays, "aggregate_hit_rate": table.values,
                               "stderr": table.stderr})
    else:
        w.csv("table1.csv", header, rows)
    return EXIT_OK


def cmd_figures(cfg: ExperimentConfig, args, w: Writer) -> int:
    cat, B, _ = _instance(cfg)
    ns = range(1, cat.N + 1)
    # kRU family at the configured capacity
    kru_profiles = [exact.hit_profile(kru(k), cat, B) for k in range(1, B + 1)]
    w.csv("fig1_kru.csv", ["object", "rate"] + [f"k{k}" for k in range(1, B + 1)],
          [[n, cat.rate(n)] + [p[n] for p in kru_profiles] for n in ns])
    # kRP (simulated) against LRU and IRP (exact)
    krp_ks = _ints(args.krp_ks) if args.krp_ks else list(range(1, B))
    lru, irp = exact.hit_profile(LRU, cat, B), exact.hit_profile(IRP, cat, B)
    sims = [sim.simulate(_sim_config(cfg, policy=krp(k), demand=IRM)) for k in krp_ks]
    header = ["object", "rate", "lru", "irp"] + [f"krp{k}" for k in krp_ks] + [f"krp{k}_stderr" for k in krp_ks]
    w.csv("fig2_krp.csv", header,
          [[n, cat.rate(n), lru[n], irp[n]] + [e.h_hat[n - 1] for e in sims] + [e.stderr[n - 1] for e in sims]
           for n in ns])
    # MRU, LRU and RE at the small capacity
    B3 = args.fig3_capacity
    pols = [MRU, LRU, RE]
    profs = [exact.hit_profile(p, cat, B3) for p in pols]
    w.csv("fig3_policies.csv", ["object", "rate"] + [p.label for p in pols],
          [[n, cat.rate(n)] + [p[n] for p in profs] for n in ns])
    return EXIT_OK


def _conditional_table(net: network.NetworkSpec, limit: int = 10_000) -> list[dict] | None:
    import itertools

    objs = range(1, net.N + 1)
    spaces = [list(itertools.combinations(objs, B)) for B in net.capacities]
    if math.prod(len(s) for s in spaces) > limit:
        return None
    rows = []
    for loc in itertools.product(*spaces):
        probs = {R: network.conditional_internet_invariant(net, loc, R) for R in objs}
        rows.append({"locals": [list(r) for r in loc],
                     "internet": {str(R): p for R, p in probs.items() if p > 0}})
    return rows


def cmd_network(cfg: ExperimentConfig, args, w: Writer) -> int:
    if cfg.network is None:
        raise ValueError("the network command needs a 'network' section in the config")
    net = cfg.network.build()
    lam_hat = network.miss_stream_rates(net)
    payload: dict = {"miss_stream_rates": lam_hat}
    if net.b == 1:
        payload["conditional_invariant"] = _conditional_table(net)
    if network.joint_space_size(net) <= args.cap:
        dist = network.full_chain_solve(net, cap=args.cap)
        comparison = {"balance_residual": dist.balance_residual(),
                      "detailed_balance_violation": dist.detailed_balance_violation(),
                      "internet_occupancy": dist.internet_occupancy(),
                      "product_form_gap": dist.product_form_gap()}
        if net.b == 1:
            worst = 0.0
            for loc in dist.locals_marginal():
                for R, p in dist.conditional(loc).items():
                    (obj,) = R
                    worst = max(worst, abs(p - network.conditional_internet_invariant(net, loc, obj)))
            comparison["conditional_max_abs_error"] = worst
        payload["full_chain"] = comparison
    else:
        est = network.simulate_network(net, cfg.sim.queries, cfg.sim.seed, cfg.sim.warmup)
        payload["simulation"] = {"events": est.events, "miss_stream_rates": est.lam_hat,
                                 "miss_stream_rates_stderr": est.lam_hat_stderr,
                                 "local_hit_probabilities": est.local_h_hat}
        if net.b == 1 and est.conditional_occupancy:
            worst = max(abs(occ[R - 1] - network.conditional_internet_invariant(net, loc, R))
                        for loc, (occ, _) in est.conditional_occupancy.items() for R in range(1, net.N + 1))
            payload["simulation"]["conditional_max_abs_error"] = worst
    w.json("network.json", payload)
    return EXIT_OK


COMMANDS = {
    "exact": (cmd_exact, "closed-form hit probabilities for the configured policy"),
    "simulate": (cmd_simulate, "simulated hit probabilities for the configured policy and demand"),
    "verify": (cmd_verify, "check closed forms against the brute-force oracle"),
    "table1": (cmd_table1, "kRU aggregate hit rates across eviction ranks and demand delays"),
    "figures": (cmd_figures, "hit-probability series for kRU, kRP and MRU/LRU/RE"),
    "network": (cmd_network, "random-eviction cache tree: conditional invariant and flow rates"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cachestat", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="YAML or JSON experiment document")
        p.add_argument("--seed", type=int, help="override sim.seed")
        p.add_argument("--out", help="output directory (overrides output.path)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key by dotted path, e.g. cache.capacity=3")
        if name in ("verify", "network"):
            p.add_argument("--cap", type=int, default=DEFAULT_CAP, help="brute-force state cap")
        if name == "table1":
            p.add_argument("--ks", help="comma-separated eviction ranks (default 1..B)")
            p.add_argument("--delays", default="0,1,2", help="comma-separated delays D")
        if name == "figures":
            p.add_argument("--krp-ks", help="comma-separated kRP steps (default 1..B-1)")
            p.add_argument("--fig3-capacity", type=int, default=3)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler, _ = COMMANDS[args.command]
    try:
        cfg = load_config(args.config, args.set, **{"sim.seed": args.seed, "output.path": args.out})
        writer = Writer(cfg, Path(cfg.output.path))
        code = handler(cfg, args, writer)
    except StateSpaceTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    for path in writer.written:
        print(path)
    return code


if __name__ == "__main__":
    sys.exit(main())
