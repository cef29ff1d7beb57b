"""Command-line entry point.

Exit codes: 0 success, 1 validation error, 2 infeasible instance,
3 equilibrium verification failed, 4 solver did not converge.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .equilibrium import UserGrid, endpoint_inequality_check, is_equilibrium
from .instance import GeneratorSpec, convert_csv, dumps, generate_instance, load_instance, \
    save_instance
from .model import ValidationError, as_allocation, latency_snapshot, minutes_from_hours
from .optimizer import ConvergenceError, InfeasibleInstanceError, SolverConfig, \
    optimize_allocation
from .pricing import breakeven_base_price, offset_matrix
from .queueing import MMcSystem, erlang_c, mean_waits
from .report import dump_result, emit, result_from_dict, summarize

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_UNVERIFIED, EXIT_NOCONVERGE = 0, 1, 2, 3, 4

log = logging.getLogger("modalprice")


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from None


def cmd_gen(args) -> int:
    spec = GeneratorSpec.with_fleet(args.cars, args.drones, args.robots, seed=args.seed,
                                    rate=args.rate, rho_cap=args.rho_cap,
                                    reach_horizon=args.k_min / 60.0, v0=args.v0, v1=args.v1)
    inst = generate_instance(spec, args.orders)
    save_instance(inst, args.out)
    log.info("wrote %d orders x %d modalities to %s", *inst.shape, args.out)
    return EXIT_OK


def cmd_convert(args) -> int:
    spec = GeneratorSpec(rate=args.rate, rho_cap=args.rho_cap, reach_horizon=args.k_min / 60.0,
                         v0=args.v0, v1=args.v1)
    inst = convert_csv(args.orders, args.couriers, spec)
    save_instance(inst, args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    config = SolverConfig(seed=args.seed, multistart=args.multistart,
                          max_iters=args.max_iters, stationarity_tol=args.stationarity_tol)
    try:
        result = optimize_allocation(inst, config)
    except ConvergenceError as exc:
        log.error("%s", exc)
        if args.out:
            Path(args.out).write_text(dump_result(inst, exc.best, asdict(config)))
        return EXIT_NOCONVERGE
    text = dump_result(inst, result, asdict(config))
    _write(text, args.out)
    if result.base_price.subsidy:
        log.warning("break-even base price is negative (%.4f): slowest option is subsidised",
                    result.base_price.value)
    return EXIT_OK


def cmd_price(args) -> int:
    inst = load_instance(args.instance)
    doc = _read_json(args.allocation)
    x = as_allocation(doc["x"] if isinstance(doc, dict) else doc, inst.shape)
    snap = latency_snapshot(inst, x)
    offsets = offset_matrix(inst, x, snap)
    breakeven = breakeven_base_price(inst, x, snap, offsets)
    base = breakeven.value if args.base is None else args.base
    out = {"base": base, "breakeven_base": breakeven.value, "subsidy": breakeven.subsidy,
           "prices": (offsets + base).tolist(), "latency_h": snap.ell.tolist()}
    _write(dumps(out), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    inst, result = result_from_dict(_read_json(args.result))
    verdict = is_equilibrium(inst, result.x, result.snapshot, result.prices,
                             UserGrid(args.grid), tol=args.tol)
    worst_eq = 0.0
    for i in range(len(inst.orders)):
        rep = endpoint_inequality_check(result.snapshot.ell[i], result.x[i],
                                        result.prices.tau[i], inst.curve(i), tol=args.tol)
        worst_eq = max(worst_eq, rep.max_equality_residual)
    print(f"equilibrium: {'yes' if verdict.is_equilibrium else 'NO'}")
    print(f"worst violation (h): {verdict.worst_violation:.3e}")
    print(f"max adjacent price residual ($): {worst_eq:.3e}")
    if verdict.witness:
        w = verdict.witness
        print(f"witness: order {inst.orders[w.order].id} user a={w.user:.9f} "
              f"assigned {inst.modalities[w.assigned].id} prefers {inst.modalities[w.better].id}")
    return EXIT_OK if verdict.is_equilibrium else EXIT_UNVERIFIED


def cmd_mmc(args) -> int:
    if args.mu is not None:
        system = MMcSystem(args.servers, args.arrival, args.mu)
    else:
        system = MMcSystem.from_utilization(args.servers, args.arrival, args.rho)
    try:
        p = erlang_c(system)
        wq, w = mean_waits(system)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    print(f"rho      {system.rho:.6f}")
    print(f"mu       {system.service_rate:.6f} per hour")
    print(f"P_wait   {p:.6f}")
    print(f"W_q      {minutes_from_hours(wq):.3f} min")
    print(f"W        {minutes_from_hours(w):.3f} min")
    return EXIT_OK


def cmd_report(args) -> int:
    inst, result = result_from_dict(_read_json(args.result))
    _write(emit(summarize(inst, result), args.format), args.out)
    return EXIT_OK


def _scenario_args(p):
    p.add_argument("--rate", type=float, default=0.42, help="orders/hour per order")
    p.add_argument("--rho-cap", type=float, default=0.9)
    p.add_argument("--k-min", type=float, default=10.0, help="courier reach horizon, minutes")
    p.add_argument("--v0", type=float, default=100.0, help="value of time at a=0, $/h")
    p.add_argument("--v1", type=float, default=10.0, help="value of time at a=1, $/h")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modalprice", description="Allocate delivery orders across courier fleets and price them.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic instance")
    p.add_argument("--orders", type=int, required=True)
    p.add_argument("--cars", type=int, default=100)
    p.add_argument("--drones", type=int, default=0)
    p.add_argument("--robots", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _scenario_args(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("convert", help="build an instance from orders/couriers CSV files")
    p.add_argument("--orders", required=True)
    p.add_argument("--couriers", required=True)
    p.add_argument("--out", required=True)
    _scenario_args(p)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("solve", help="optimize the allocation and price it")
    p.add_argument("--instance", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--multistart", type=int, default=1)
    p.add_argument("--max-iters", type=int, default=SolverConfig.max_iters)
    p.add_argument("--stationarity-tol", type=float, default=SolverConfig.stationarity_tol)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("price", help="price a given allocation")
    p.add_argument("--instance", required=True)
    p.add_argument("--allocation", required=True, help='JSON with an "x" matrix')
    p.add_argument("--base", type=float, help="base price; default is break-even")
    p.add_argument("--out")
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("verify", help="check a result is a Nash allocation")
    p.add_argument("--result", required=True)
    p.add_argument("--grid", type=int, default=10_000)
    p.add_argument("--tol", type=float, default=1e-9, help="hours of user cost")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("mmc", help="M/M/c waiting times")
    p.add_argument("--servers", type=int, required=True)
    p.add_argument("--lambda", dest="arrival", type=float, required=True, help="arrivals/hour")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--rho", type=float)
    g.add_argument("--mu", type=float, help="service rate per server, per hour")
    p.set_defaults(func=cmd_mmc)

    p = sub.add_parser("report", help="tabulate a result file")
    p.add_argument("--result", required=True)
    p.add_argument("--format", choices=("table", "csv", "json"), default="table")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except InfeasibleInstanceError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
