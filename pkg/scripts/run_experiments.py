"""Scaled-down synthetic experiments: schemes vs distance, batch vs incremental,
smoothing and blending sweeps, and adaptation to a mid-horizon profile switch.

Usage:
    python3 scripts/run_experiments.py --out results/ [--seeds 0 1 2] [--quick]

Writes one CSV per experiment plus a plain-text digest on stdout. Results are
deterministic for a given set of seeds and flags.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from histroute.evaluation import DIST, SCHEMES, SplitConfig, evaluate
from histroute.synthetic import SyntheticWorldConfig, generate_synthetic


@dataclass(frozen=True)
class ExperimentConfig:
    seeds: tuple[int, ...] = (0, 1, 2)
    num_stops: int = 30
    noise: float = 0.1
    num_weeks: int = 28
    drift_week: int = 15
    alphas: tuple[float, ...] = (0.0, 0.5, 1.0, 2.0)
    betas: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)


def _means(records):
    return (float(np.mean([r.rd for r in records])), float(np.mean([r.ad for r in records])),
            len(records))


def _write(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def schemes_vs_distance(cfg: ExperimentConfig, out: Path):
    rows = []
    for seed in cfg.seeds:
        world = generate_synthetic(SyntheticWorldConfig(seed=seed, num_stops=cfg.num_stops,
                                                        noise=cfg.noise, num_weeks=cfg.num_weeks))
        for mode in ("incremental", "batch"):
            for scheme in SCHEMES:
                recs = evaluate(world.stream, SplitConfig(mode=mode), scheme, costs=world.costs)
                rows.append((seed, mode, scheme, *_means(recs)))
    _write(out / "schemes.csv", ("seed", "mode", "scheme", "rd_mean", "ad_mean", "tests"), rows)
    return rows


def sweeps(cfg: ExperimentConfig, out: Path):
    alpha_rows, beta_rows = [], []
    for seed in cfg.seeds:
        world = generate_synthetic(SyntheticWorldConfig(seed=seed, num_stops=cfg.num_stops,
                                                        noise=cfg.noise, num_weeks=cfg.num_weeks))
        for alpha in cfg.alphas:
            recs = evaluate(world.stream, SplitConfig(), "TIME2", alpha, 1.0)
            alpha_rows.append((seed, alpha, *_means(recs)))
        for beta in cfg.betas:
            recs = evaluate(world.stream, SplitConfig(), "TIME2", 1.0, beta, world.costs)
            beta_rows.append((seed, beta, *_means(recs)))
    _write(out / "alpha_sweep.csv", ("seed", "alpha", "rd_mean", "ad_mean", "tests"), alpha_rows)
    _write(out / "beta_sweep.csv", ("seed", "beta", "rd_mean", "ad_mean", "tests"), beta_rows)
    return alpha_rows, beta_rows


def drift(cfg: ExperimentConfig, out: Path):
    rows = []
    for seed in cfg.seeds:
        wcfg = SyntheticWorldConfig(seed=seed, noise=cfg.noise, num_weeks=cfg.num_weeks,
                                    drift_week=cfg.drift_week)
        world = generate_synthetic(wcfg)
        switch = (dt.date.fromisoformat(wcfg.start_date)
                  + dt.timedelta(weeks=cfg.drift_week - 1)).isoformat()
        by_scheme = {}
        for scheme in [s for s in SCHEMES if s != DIST]:
            recs = evaluate(world.stream, SplitConfig(), scheme)
            by_scheme[scheme] = [r for r in recs if r.test_day >= switch]
        base = by_scheme["UNIF"]
        for scheme, recs in by_scheme.items():
            wins = sum(a.ad < b.ad for a, b in zip(recs, base)) / len(recs)
            rows.append((seed, scheme, *_means(recs), round(wins, 4)))
    _write(out / "drift.csv", ("seed", "scheme", "rd_mean", "ad_mean", "tests", "beats_unif_share"),
           rows)
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="results")
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--quick", action="store_true", help="one seed, fewer sweep points")
    args = p.parse_args(argv)

    cfg = ExperimentConfig(seeds=tuple(args.seeds))
    if args.quick:
        cfg = replace(cfg, seeds=cfg.seeds[:1], alphas=(0.0, 1.0, 2.0), betas=(0.0, 0.5, 1.0))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    print("scheme comparison (mean RD / mean AD)")
    for seed, mode, scheme, rd, ad, n in schemes_vs_distance(cfg, out):
        print(f"  seed {seed} {mode:<11} {scheme:<5} {rd:6.3f} {ad:6.3f}  ({n} tests)")
    alpha_rows, beta_rows = sweeps(cfg, out)
    print("smoothing sweep, TIME2")
    for seed, alpha, rd, ad, _ in alpha_rows:
        print(f"  seed {seed} alpha={alpha:<4g} {rd:6.3f} {ad:6.3f}")
    print("blend sweep, TIME2")
    for seed, beta, rd, ad, _ in beta_rows:
        print(f"  seed {seed} beta={beta:<4g} {rd:6.3f} {ad:6.3f}")
    print("after the profile switch")
    for seed, scheme, rd, ad, n, wins in drift(cfg, out):
        print(f"  seed {seed} {scheme:<5} {rd:6.3f} {ad:6.3f}  beats UNIF on {wins:.0%} of {n}")


if __name__ == "__main__":
    main()
