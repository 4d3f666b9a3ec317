"""Command-line entry point.

Exit codes: 0 success, 1 limit reached without any design, 2 configuration
error, 3 data error, 4 infeasible, 5 time or node limit reached with an
incumbent.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from importlib import resources

import numpy as np

from . import analytics, bench, io
from .errors import (
    BudgetExceeded,
    ConfigError,
    DataError,
    Infeasible,
    InvalidCoordinate,
    InvalidParam,
    NoFeasibleDesign,
    UncoverableDemand,
    UncoveredDemand,
)
from .heuristic import greedy
from .milp import linearize_generalM, linearize_M2
from .model import DEFAULT_PARAMS, build_instance
from .oracle import EnumerationBudget, enumerate_optimum
from .simulator import long_run_validate, replay_requests, simulate
from .solver import SolveParams, solve

EXIT_OK, EXIT_NO_DESIGN, EXIT_CONFIG, EXIT_DATA, EXIT_INFEASIBLE, EXIT_TIME_LIMIT = 0, 1, 2, 3, 4, 5

log = logging.getLogger("dronenet")


def bundled_fixture() -> str:
    return str(resources.files("dronenet") / "data" / "tiny_fixture.json")


def load_instance(cfg: io.RunConfig):
    """Instance from the configured JSON file or from the incident and base CSVs."""
    inst = cfg.instance
    params = cfg.instance_params()
    if inst["instance_json"]:
        overrides = {k: params[k] for k in cfg.explicit if k in DEFAULT_PARAMS}
        return io.load_instance_json(inst["instance_json"], **overrides), None
    if not inst["demands_csv"] or not inst["bases_csv"]:
        raise ConfigError("set instance.instance_json or both instance.demands_csv and instance.bases_csv")
    otr = io.load_otr_csv(inst["demands_csv"], inst["horizon_seconds"], merge=inst["merge_duplicates"],
                          xi_mean=inst["xi_mean"], xi_second_moment=inst["xi_second_moment"])
    bases = io.load_bases_csv(inst["bases_csv"])
    return build_instance(otr.demands, bases, params), otr


def build_model(instance):
    return linearize_M2(instance) if instance.M == 2 else linearize_generalM(instance)


def _emit(obj, out):
    text = io.write_json(obj, out)
    if out is None:
        print(text)


def cmd_solve(args, cfg):
    instance, _ = load_instance(cfg)
    s = cfg.solver
    params = SolveParams(gap_tol=s["gap_tol"], time_limit=s["time_limit"], node_limit=s["node_limit"], lp=s["lp"])
    rep = solve(build_model(instance), s["mode"], params)
    _emit({"report": rep.to_dict(), "design": rep.design.to_dict() if rep.design else None}, args.out)
    if rep.design is None:
        return EXIT_NO_DESIGN
    return EXIT_OK if rep.status == "OPTIMAL" else EXIT_TIME_LIMIT


def _design_for(args, cfg, instance):
    if args.design:
        return io.read_design(args.design), "file"
    s = cfg.solver
    rep = solve(build_model(instance), s["mode"], SolveParams(gap_tol=s["gap_tol"], time_limit=s["time_limit"]))
    if rep.design is None:
        raise Infeasible("no design found to simulate")
    return rep.design, f"solve:{rep.mode}:{rep.status}"


def cmd_simulate(args, cfg):
    instance, _ = load_instance(cfg)
    design, source = _design_for(args, cfg, instance)
    sim = cfg.simulator
    seed = cfg.solver["seed"]
    if args.validate:
        cmp = long_run_validate(instance, design, sim["horizon_seconds"], seed)
        _emit({
            "design_source": source,
            "sim_response": cmp.sim_response,
            "sim_response_se": cmp.sim_response_se,
            "analytic_response": cmp.analytic_response,
            "served": cmp.served,
            "bases": [{"base": r.base, "served": r.served, "sim_wait": r.sim_wait, "sim_wait_se": r.sim_wait_se,
                       "analytic_wait": r.analytic_wait, "z": r.z} for r in cmp.bases],
        }, args.out)
        return EXIT_OK
    kw = dict(policy=sim["policy"], takeoff=sim["takeoff"], landing=sim["landing"])
    outcomes = []
    if sim["arrivals_csv"]:
        times, latlons = io.load_arrivals_csv(sim["arrivals_csv"])
        reqs = replay_requests(instance, times, latlons, seed=seed, xi_dist=sim["xi_dist"])
        outcomes.append(simulate(instance, design, arrivals=reqs, **kw))
    else:
        for k in range(int(sim["replications"])):
            outcomes.append(simulate(instance, design, rng_seed=seed + k, horizon=sim["horizon_seconds"],
                                     xi_dist=sim["xi_dist"], **kw))
    summaries = [o.summary() for o in outcomes]
    means = [s["mean_response"] for s in summaries if s["mean_response"] is not None]
    _emit({
        "design_source": source,
        "replications": summaries,
        "mean_response": float(np.mean(means)) if means else None,
    }, args.out)
    if args.out:
        stem, _ = os.path.splitext(args.out)
        for k, o in enumerate(outcomes):
            o.write_csv(f"{stem}_requests_{k}.csv")
    return EXIT_OK


def cmd_oracle(args, cfg):
    instance, _ = load_instance(cfg)
    res = enumerate_optimum(instance, EnumerationBudget(max_designs=args.max_designs))
    _emit({
        "avg_resp": res.avg_resp,
        "design": res.design.to_dict(),
        "evaluated": res.evaluated,
        "pruned": res.pruned,
        "fleet_splits": res.fleet_splits,
    }, args.out)
    return EXIT_OK


def cmd_heuristic(args, cfg):
    instance, _ = load_instance(cfg)
    res = greedy(instance)
    _emit({
        "avg_resp": res.avg_resp if math.isfinite(res.avg_resp) else None,
        "unstable_bases": list(res.unstable_bases),
        "design": res.design.to_dict(),
    }, args.out)
    return EXIT_OK


def cmd_analyze(args, cfg):
    a = cfg.analytics
    drone = args.drone_minutes if args.drone_minutes is not None else a["drone_response_minutes"]
    ems = args.ems_minutes if args.ems_minutes is not None else a["ems_response_minutes"]
    ems_samples = None
    if ems is None and cfg.instance["demands_csv"]:
        otr = io.load_otr_csv(cfg.instance["demands_csv"], cfg.instance["horizon_seconds"])
        if otr.response_times:
            vals = np.asarray(otr.response_times, dtype=float)
            ems_samples = vals[np.isfinite(vals)] / 60.0
            if ems_samples.size:
                ems = float(ems_samples.mean())
    if drone is None or ems is None:
        raise ConfigError("analyze needs drone and EMS mean response times in minutes")
    params = analytics.AnalysisParams(
        overdoses_per_year=a["overdoses_per_year"],
        ohca_rate=a["ohca_rate"],
        kinds=tuple(a["kinds"]),
        qaly=analytics.QalyParams(T=a["T"], alpha_q=a["alpha_q"], c=a["c"]),
        qaly_reference=a["qaly_reference"],
        n_drones=a["n_drones"],
        unit_price=a["unit_price"],
        annual_maintenance=a["annual_maintenance"],
        lifespan_years=a["lifespan_years"],
    )
    try:
        table = analytics.analyze(drone, ems, params, ems_samples=ems_samples)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _emit(table, args.out)
    return EXIT_OK


def cmd_bench(args, cfg):
    sizes = tuple(int(s) for s in args.sizes.split(","))
    instances = bench.scaling_set(sizes, per_size=args.per_size, seed=cfg.solver["seed"], total=args.total)
    modes = args.modes.split(",")
    cells = bench.run_matrix(instances, modes, time_limit=cfg.solver["time_limit"], gap_tol=cfg.solver["gap_tol"],
                             workers=args.workers)
    rows = bench.performance_profile(cells)
    out = args.out or "bench_profile.csv"
    bench.write_profile_csv(rows, out)
    print(bench.summary_text(cells))
    print(f"profile written to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--mode", help="solver mode: REFO, OA or OA_BC")
    common.add_argument("--time-limit", type=float, help="solver time limit in seconds")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--out", help="output path (stdout when omitted)")
    common.add_argument("--instance", help="instance JSON; overrides the config")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="dronenet", description="Drone network design under congestion.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="optimize the network design")
    p = sub.add_parser("simulate", parents=[common], help="simulate dispatch for a design")
    p.add_argument("--design", help="design JSON; solved from the config when omitted")
    p.add_argument("--validate", action="store_true", help="compare simulated waits with the closed-form delays")
    p = sub.add_parser("oracle", parents=[common], help="certified optimum by enumeration")
    p.add_argument("--max-designs", type=int, default=50_000_000)
    sub.add_parser("heuristic", parents=[common], help="greedy baseline design")
    p = sub.add_parser("analyze", parents=[common], help="survival, QALY and cost tables")
    p.add_argument("--drone-minutes", type=float)
    p.add_argument("--ems-minutes", type=float)
    p = sub.add_parser("bench", parents=[common], help="mode by instance benchmark")
    p.add_argument("--sizes", default="20,40,60")
    p.add_argument("--per-size", type=int)
    p.add_argument("--total", type=int, default=20)
    p.add_argument("--modes", default="REFO,OA,OA_BC")
    p.add_argument("--workers", type=int, default=1)
    return parser


COMMANDS = {
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "oracle": cmd_oracle,
    "heuristic": cmd_heuristic,
    "analyze": cmd_analyze,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides: dict = {}
    if args.mode:
        overrides.setdefault("solver", {})["mode"] = args.mode
    if args.time_limit is not None:
        overrides.setdefault("solver", {})["time_limit"] = args.time_limit
    if args.seed is not None:
        overrides.setdefault("solver", {})["seed"] = args.seed
    if args.instance:
        overrides.setdefault("instance", {})["instance_json"] = os.path.abspath(args.instance)
    try:
        cfg = io.load_config(args.config, overrides=overrides)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, InvalidParam, InvalidCoordinate, UncoverableDemand, BudgetExceeded) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (Infeasible, NoFeasibleDesign, UncoveredDemand) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
