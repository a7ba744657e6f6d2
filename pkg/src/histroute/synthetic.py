"""Synthetic historical plans produced by a simulated planner with latent preferences.

Each weekday has a preferred-successor table: for every stop (depot
included) a ranked list of the customers the planner likes to visit next. On
a given day the planner samples a stop set and a route count, then builds
routes from the depot by taking the best-ranked unvisited successor, except
that with probability ``noise`` it picks a random unvisited stop instead. A
route is closed once its stop quota for the day is reached.

Stops live in the unit square with the depot at the centre; Euclidean
distances serve as the cost matrix of the DIST baseline. Profiles are sweep
orders around the depot with local personal swaps, so they are spatially
plausible but not distance-optimal. An optional drift switches every weekday
to a new profile (opposite sweep direction) and shrinks the stop sets.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .learner import CostMatrix
from .model import DEPOT, InstanceStream, RoutingPlan, StopUniverse

Profile = dict[int, list[int]]


@dataclass
class SyntheticWorldConfig:
    seed: int = 0
    num_stops: int = 18
    stops_per_day: tuple[int, int] = (10, 14)
    routes_per_day: tuple[int, int] = (2, 3)
    num_weeks: int = 28
    weekdays: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7)
    noise: float = 0.1
    personal_swaps: int = 3
    drift_week: int | None = None
    drift_stops_per_day: tuple[int, int] | None = None
    start_date: str = "2018-01-01"
    weekday_profiles: dict[int, Profile] | None = None
    drift_profiles: dict[int, Profile] | None = None

    def validate(self):
        lo, hi = self.stops_per_day
        if not 1 <= lo <= hi:
            raise ValueError("stops_per_day must be a non-empty range of positive sizes")
        if hi > self.num_stops:
            raise ValueError(f"stops_per_day up to {hi} exceeds the {self.num_stops} known stops")
        rlo, rhi = self.routes_per_day
        if not 1 <= rlo <= rhi:
            raise ValueError("routes_per_day must be a non-empty range of positive counts")
        if rhi > lo:
            raise ValueError("more routes than stops on some days")
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError("noise must be a probability")
        if self.num_weeks < 1:
            raise ValueError("num_weeks must be positive")
        if not self.weekdays or any(not 1 <= w <= 7 for w in self.weekdays):
            raise ValueError("weekdays must be values in 1..7")
        if self.drift_week is not None and not 1 <= self.drift_week <= self.num_weeks:
            raise ValueError("drift week lies outside the horizon")
        if self.drift_stops_per_day is not None:
            dlo, dhi = self.drift_stops_per_day
            if not rhi <= dlo <= dhi <= self.num_stops:
                raise ValueError("drift_stops_per_day is infeasible")
        start = dt.date.fromisoformat(self.start_date)
        if start.isoweekday() != 1:
            raise ValueError("start_date must be a Monday")


@dataclass
class SyntheticWorld:
    config: SyntheticWorldConfig
    stream: InstanceStream
    costs: CostMatrix
    coords: np.ndarray
    profiles: dict[int, Profile]
    drift_profiles: dict[int, Profile] = field(default_factory=dict)


def stop_ids(num_stops: int) -> list[str]:
    width = max(2, len(str(num_stops)))
    return [f"S{i:0{width}d}" for i in range(1, num_stops + 1)]


def _sweep_order(coords: np.ndarray, rng: np.random.Generator, reverse: bool, swaps: int) -> list[int]:
    rel = coords[1:] - coords[0]
    angle = np.arctan2(rel[:, 1], rel[:, 0])
    offset = rng.uniform(-math.pi, math.pi)
    key = np.mod(angle - offset, 2 * math.pi)
    if reverse:
        key = -key
    order = [int(i) + 1 for i in np.argsort(key, kind="stable")]
    for _ in range(swaps):
        i = int(rng.integers(0, len(order) - 1))
        order[i], order[i + 1] = order[i + 1], order[i]
    return order


def profile_from_order(order: list[int]) -> Profile:
    """Successor table in which every stop prefers the stops that follow it cyclically."""
    table = {DEPOT: list(order)}
    for k, s in enumerate(order):
        table[s] = order[k + 1:] + order[:k]
    return table


def simulate_plan(table: Profile, stops: set[int], num_routes: int, noise: float,
                  rng: np.random.Generator) -> list[list[int]]:
    n = len(stops)
    quotas = [n // num_routes + (1 if k < n % num_routes else 0) for k in range(num_routes)]
    unvisited = set(stops)
    routes = []
    for quota in quotas:
        current, route = DEPOT, []
        for _ in range(quota):
            if noise > 0 and rng.random() < noise:
                nxt = sorted(unvisited)[int(rng.integers(0, len(unvisited)))]
            else:
                nxt = next(s for s in table[current] if s in unvisited)
            route.append(nxt)
            unvisited.remove(nxt)
            current = nxt
        routes.append(route)
    return routes


def generate_synthetic(config: SyntheticWorldConfig) -> SyntheticWorld:
    """Deterministic (per seed) stream of historical plans with ground-truth profiles."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    n = config.num_stops
    coords = np.vstack([[0.5, 0.5], rng.uniform(0.0, 1.0, size=(n, 2))])
    diff = coords[:, None, :] - coords[None, :, :]
    costs = np.sqrt((diff ** 2).sum(axis=-1))

    profiles = config.weekday_profiles or {
        wd: profile_from_order(_sweep_order(coords, rng, False, config.personal_swaps))
        for wd in config.weekdays}
    drift_profiles: dict[int, Profile] = {}
    if config.drift_week is not None:
        drift_profiles = config.drift_profiles or {
            wd: profile_from_order(_sweep_order(coords, rng, True, config.personal_swaps))
            for wd in config.weekdays}
    lo, hi = config.stops_per_day
    if config.drift_stops_per_day is not None:
        drift_range = config.drift_stops_per_day
    else:
        floor = config.routes_per_day[1]
        drift_range = (max(floor, round(0.7 * lo)), max(floor, round(0.7 * hi)))

    universe = StopUniverse.from_ids("DEPOT", stop_ids(n))
    start = dt.date.fromisoformat(config.start_date)
    customers = list(range(1, n + 1))
    plans = []
    for week in range(1, config.num_weeks + 1):
        drifted = config.drift_week is not None and week >= config.drift_week
        for wd in sorted(config.weekdays):
            day = start + dt.timedelta(weeks=week - 1, days=wd - 1)
            a, b = drift_range if drifted else (lo, hi)
            size = int(rng.integers(a, b + 1))
            stops = set(int(s) for s in rng.choice(customers, size=size, replace=False))
            m = int(rng.integers(config.routes_per_day[0], config.routes_per_day[1] + 1))
            table = (drift_profiles if drifted else profiles)[wd]
            routes = simulate_plan(table, stops, m, config.noise, rng)
            plans.append(RoutingPlan.of(routes, day.isoformat(), wd))
    stream = InstanceStream(tuple(plans), universe)
    return SyntheticWorld(config, stream, CostMatrix(costs, tuple(range(n + 1))), coords,
                          profiles, drift_profiles)


def truth_document(world: SyntheticWorld) -> dict:
    u = world.stream.universe

    def named(profiles: dict[int, Profile]):
        return {str(wd): {u.id_of(s): [u.id_of(x) for x in succ] for s, succ in table.items()}
                for wd, table in sorted(profiles.items())}

    cfg = asdict(world.config)
    cfg.pop("weekday_profiles")
    cfg.pop("drift_profiles")
    return {
        "format": "histroute.truth", "version": 1,
        "config": cfg,
        "coords": {u.id_of(i): [float(x), float(y)] for i, (x, y) in enumerate(world.coords)},
        "profiles": named(world.profiles),
        "drift_profiles": named(world.drift_profiles),
    }


def save_world(world: SyntheticWorld, out_dir) -> dict[str, Path]:
    from .formats import save_costs, save_plans

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"plans": out / "plans.jsonl", "costs": out / "costs.csv", "truth": out / "truth.json"}
    save_plans(world.stream, paths["plans"])
    save_costs(world.costs, world.stream.universe, paths["costs"])
    paths["truth"].write_text(json.dumps(truth_document(world), indent=2, sort_keys=True) + "\n")
    return paths


def load_truth_profiles(path, universe: StopUniverse) -> tuple[dict[int, Profile], dict[int, Profile]]:
    doc = json.loads(Path(path).read_text())

    def parse(block):
        return {int(wd): {universe.index(s): [universe.index(x) for x in succ]
                          for s, succ in table.items()}
                for wd, table in block.items()}

    return parse(doc["profiles"]), parse(doc["drift_profiles"])
