"""Command line interface: generate, build-matrix, solve, evaluate, report."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import formats
from .evaluation import DIST, SCHEMES, SplitConfig, evaluate, summarize
from .learner import (Scheme, WeighingScheme, blend, build_transition, default_stops,
                      distance_probabilities)
from .model import DEPOT
from .solver import CvrpInstance, solve_exact, solve_most_likely
from .synthetic import SyntheticWorldConfig, generate_synthetic, save_world

log = logging.getLogger("histroute")


class CliError(Exception):
    pass


def _pair(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected MIN,MAX, got {text!r}") from None
    return lo, hi


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _schemes(text: str) -> list[str]:
    names = [s.strip().upper() for s in text.split(",") if s.strip()]
    for s in names:
        if s not in SCHEMES:
            raise argparse.ArgumentTypeError(f"unknown scheme {s!r}; choose from {', '.join(SCHEMES)}")
    return names


def _add_split_flags(p: argparse.ArgumentParser):
    p.add_argument("--plans", required=True, help="plan log (JSON lines)")
    p.add_argument("--costs", help="cost matrix CSV (needed for DIST and beta < 1)")
    p.add_argument("--mode", choices=("batch", "incremental"), default="incremental")
    p.add_argument("--scheme", type=_schemes, default=["UNIF"],
                   help="comma-separated schemes among " + ", ".join(SCHEMES))
    p.add_argument("--split", type=float, default=0.75, help="training fraction per group")
    p.add_argument("--capacity", choices=("unit", "demand"), default="unit")
    p.add_argument("--fleet", choices=("equal", "atmost"), default="equal")
    p.add_argument("--no-weekday-grouping", action="store_true")
    p.add_argument("--exclude-diagonal", action="store_true",
                   help="smooth over t instead of t+1 entries per row")
    p.add_argument("--time-limit", type=float, default=600.0, help="solver budget per instance (s)")
    p.add_argument("--record-time", action="store_true",
                   help="write wall-clock solve times into the records CSV")
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="histroute", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic plan log, cost matrix and ground truth")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--weeks", type=int, default=28)
    g.add_argument("--num-stops", type=int, default=18)
    g.add_argument("--stops-per-day", type=_pair, default=(10, 14))
    g.add_argument("--routes-per-day", type=_pair, default=(2, 3))
    g.add_argument("--noise", type=float, default=0.1)
    g.add_argument("--drift-week", type=int)
    g.add_argument("--drift-stops-per-day", type=_pair)

    b = sub.add_parser("build-matrix", help="learn a transition matrix from a plan log")
    b.add_argument("--plans", required=True)
    b.add_argument("--scheme", default="UNIF", choices=[s.value for s in Scheme])
    b.add_argument("--alpha", type=float, default=1.0)
    b.add_argument("--beta", type=float, default=1.0)
    b.add_argument("--costs")
    b.add_argument("--reference", help="comma-separated stop ids of the day to predict (SIMI)")
    b.add_argument("--weekday", type=int, help="train only on this weekday")
    b.add_argument("--before", help="train only on plans dated strictly before this date")
    b.add_argument("--exclude-diagonal", action="store_true")
    b.add_argument("--out", required=True)

    s = sub.add_parser("solve", help="solve one day from a learned matrix or a cost matrix")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--matrix", help="transition matrix CSV (most likely plan)")
    src.add_argument("--costs", help="cost matrix CSV (minimum cost plan)")
    s.add_argument("--stops", required=True, help="comma-separated stop ids to serve")
    s.add_argument("--vehicles", type=int, required=True)
    s.add_argument("--plans", help="plan log providing demands and capacity")
    s.add_argument("--capacity", choices=("unit", "demand"), default="unit")
    s.add_argument("--fleet", choices=("equal", "atmost"), default="equal")
    s.add_argument("--time-limit", type=float, default=600.0)
    s.add_argument("--out", help="write the solution JSON here instead of stdout")

    e = sub.add_parser("evaluate", help="batch or incremental evaluation against held-out days")
    _add_split_flags(e)
    e.add_argument("--alpha", type=float, default=1.0)
    e.add_argument("--beta", type=float, default=1.0)

    r = sub.add_parser("report", help="parameter sweeps with one summary per setting")
    _add_split_flags(r)
    r.add_argument("--alpha-sweep", type=_floats, default=[1.0])
    r.add_argument("--beta-sweep", type=_floats, default=[1.0])
    return parser


def _split_config(args) -> SplitConfig:
    return SplitConfig(mode=args.mode, train_fraction=args.split,
                       weekday_grouping=not args.no_weekday_grouping, capacity=args.capacity,
                       fleet=args.fleet, count_diagonal=not args.exclude_diagonal,
                       time_budget=args.time_limit)


def _load_inputs(args):
    stream = formats.load_plans(args.plans)
    costs = None
    if getattr(args, "costs", None):
        costs, universe = formats.load_costs(args.costs, stream.universe)
        if len(universe) != len(stream.universe):
            raise CliError("cost file lists stops that never occur in the plan log")
        if tuple(costs.stops) != tuple(range(len(universe))):
            missing = set(range(len(universe))) - set(costs.stops)
            raise CliError("cost file lacks stops: " + ", ".join(universe.id_of(i) for i in sorted(missing)))
    return stream, costs


def _needs_costs(schemes, betas, costs):
    if costs is None and (DIST in schemes or any(b != 1.0 for b in betas)):
        raise CliError("--costs is required for the DIST scheme and for beta < 1")


def cmd_generate(args) -> int:
    cfg = SyntheticWorldConfig(seed=args.seed, num_stops=args.num_stops,
                               stops_per_day=args.stops_per_day,
                               routes_per_day=args.routes_per_day, num_weeks=args.weeks,
                               noise=args.noise, drift_week=args.drift_week,
                               drift_stops_per_day=args.drift_stops_per_day)
    world = generate_synthetic(cfg)
    paths = save_world(world, args.out)
    for kind, path in paths.items():
        print(f"{kind}: {path}")
    return 0


def cmd_build_matrix(args) -> int:
    stream, costs = _load_inputs(args)
    _needs_costs([], [args.beta], costs)
    plans = [p for p in stream
             if (args.weekday is None or p.weekday == args.weekday)
             and (args.before is None or (p.date is not None and p.date < args.before))]
    if not plans:
        raise CliError("no plans left to train on")
    u = stream.universe
    ref = None
    if args.reference:
        ref = frozenset(u.index(s.strip()) for s in args.reference.split(",") if s.strip())
    elif args.scheme in ("SIMI", "SIMI2"):
        raise CliError(f"{args.scheme} needs --reference")
    stops = default_stops(plans, ref or ())
    t = build_transition(plans, WeighingScheme(args.scheme, ref), args.alpha, stops,
                         not args.exclude_diagonal)
    if args.beta != 1.0:
        t = blend(t, distance_probabilities(costs.restricted(stops)), args.beta)
    formats.save_matrix(t, u, args.out)
    print(f"matrix over {len(stops)} stops written to {args.out}")
    return 0


def cmd_solve(args) -> int:
    stream = formats.load_plans(args.plans) if args.plans else None
    universe = stream.universe if stream else None
    if args.matrix:
        t, universe = formats.load_matrix(args.matrix, universe)
    else:
        costs, universe = formats.load_costs(args.costs, universe)
    ids = [s.strip() for s in args.stops.split(",") if s.strip()]
    customers = sorted(universe.index(s) for s in ids)
    if DEPOT in customers:
        raise CliError("the depot cannot be a customer")
    kw = {"mode": args.capacity, "fleet": args.fleet}
    if args.capacity == "demand":
        if stream is None or stream.demands is None or stream.capacity is None:
            raise CliError("--capacity demand needs --plans with demands and capacity")
        kw["demands"] = tuple(stream.demands[s] for s in customers)
        kw["capacity"] = stream.capacity
    if args.matrix:
        result = solve_most_likely(t, customers, args.vehicles, time_budget=args.time_limit, **kw)
    else:
        inst = CvrpInstance.from_costs(costs, customers, args.vehicles, **kw)
        result = solve_exact(inst, time_budget=args.time_limit)
    doc = {"format": "histroute.solution", "version": 1, "status": result.status,
           "objective": result.objective if result.plan else None,
           "routes": [[universe.id_of(s) for s in r] for r in result.plan.routes] if result.plan else None}
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if result.plan is not None else 1


def _run_schemes(stream, costs, config, schemes, alpha, beta):
    records = []
    for scheme in schemes:
        records += evaluate(stream, config, scheme, alpha, beta, costs)
    return records


def cmd_evaluate(args) -> int:
    stream, costs = _load_inputs(args)
    _needs_costs(args.scheme, [args.beta], costs)
    config = _split_config(args)
    records = _run_schemes(stream, costs, config, args.scheme, args.alpha, args.beta)
    if not records:
        raise CliError("no weekday group was large enough to evaluate")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    formats.save_records(records, out / "records.csv", timing=args.record_time)
    (out / "summary.json").write_text(formats.dumps_summary(
        summarize(records), timing=args.record_time, mode=config.mode, alpha=args.alpha,
        beta=args.beta, split=config.train_fraction, capacity=config.capacity))
    print(f"{len(records)} records written to {out / 'records.csv'}")
    return 0


_REPORT_FIELDS = ("alpha", "beta", "scheme", "count", "rd_mean", "rd_median", "rd_q1", "rd_q3",
                  "rd_min", "rd_max", "ad_mean", "ad_median", "ad_q1", "ad_q3", "ad_min", "ad_max",
                  "non_optimal")


def cmd_report(args) -> int:
    stream, costs = _load_inputs(args)
    _needs_costs(args.scheme, args.beta_sweep, costs)
    config = _split_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    learned = [s for s in args.scheme if s != DIST]
    if DIST in args.scheme:
        dist_records = evaluate(stream, config, DIST, costs=costs)
    for alpha in args.alpha_sweep:
        for beta in args.beta_sweep:
            records = _run_schemes(stream, costs, config, learned, alpha, beta)
            if DIST in args.scheme:
                records += dist_records
            if not records:
                raise CliError("no weekday group was large enough to evaluate")
            tag = f"alpha{alpha:g}_beta{beta:g}"
            formats.save_records(records, out / f"records_{tag}.csv", timing=args.record_time)
            summary = summarize(records)
            (out / f"summary_{tag}.json").write_text(formats.dumps_summary(
                summary, timing=args.record_time, mode=config.mode, alpha=alpha, beta=beta,
                split=config.train_fraction, capacity=config.capacity))
            for scheme, st in summary.items():
                row = {"alpha": alpha, "beta": beta, "scheme": scheme, "count": st["count"],
                       "non_optimal": st["non_optimal"]}
                for metric in ("rd", "ad"):
                    for key in ("mean", "median", "q1", "q3", "min", "max"):
                        row[f"{metric}_{key}"] = st[metric][key]
                rows.append(row)
    with open(out / "report.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=_REPORT_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    print(f"{len(rows)} summary rows written to {out / 'report.csv'}")
    return 0


COMMANDS = {"generate": cmd_generate, "build-matrix": cmd_build_matrix, "solve": cmd_solve,
            "evaluate": cmd_evaluate, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (CliError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"histroute: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
