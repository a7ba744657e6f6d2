"""Domain types: stops, routes, routing plans and chronological plan streams.

Plans store routes as tuples of dense customer indices; the depot (index 0)
is implicit at both ends of every route and only materialised by
:func:`arcs_of`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

DEPOT = 0

Route = tuple[int, ...]
Arc = tuple[int, int]


class InvalidPlanError(ValueError):
    """Raised when an operation requires a structurally valid plan."""


@dataclass(frozen=True)
class StopUniverse:
    """Ordered registry of stop ids. Index 0 is always the depot."""

    ids: tuple[str, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.ids:
            raise ValueError("a universe needs at least the depot")
        index: dict[str, int] = {}
        for i, sid in enumerate(self.ids):
            if sid in index:
                raise ValueError(f"duplicate stop id {sid!r} in universe")
            index[sid] = i
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_ids(cls, depot: str, stops: Iterable[str] = ()) -> "StopUniverse":
        return cls((depot,)).extend(stops)

    @property
    def depot(self) -> str:
        return self.ids[0]

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, sid: object) -> bool:
        return sid in self._index

    def extend(self, stops: Iterable[str]) -> "StopUniverse":
        """Return a universe with any new ids appended; known ids keep their index."""
        new = list(self.ids)
        seen = set(self._index)
        for sid in stops:
            if sid not in seen:
                seen.add(sid)
                new.append(sid)
        if len(new) == len(self.ids):
            return self
        return StopUniverse(tuple(new))

    def index(self, sid: str) -> int:
        try:
            return self._index[sid]
        except KeyError:
            raise KeyError(f"unknown stop id {sid!r}") from None

    def id_of(self, index: int) -> str:
        return self.ids[index]


def _route_key(route: Route):
    return (min(route) if route else float("inf"), route)


@dataclass(frozen=True)
class RoutingPlan:
    """One service day: a set of routes, canonically ordered by smallest customer.

    The constructor does not validate; use :func:`validate_plan`.
    """

    routes: tuple[Route, ...]
    date: str | None = None
    weekday: int | None = None

    def __post_init__(self):
        routes = tuple(sorted((tuple(int(s) for s in r) for r in self.routes), key=_route_key))
        object.__setattr__(self, "routes", routes)

    @classmethod
    def of(cls, routes: Iterable[Sequence[int]], date: str | None = None,
           weekday: int | None = None) -> "RoutingPlan":
        return cls(tuple(tuple(r) for r in routes), date, weekday)

    @property
    def stop_set(self) -> frozenset[int]:
        return frozenset(s for r in self.routes for s in r)

    @property
    def num_routes(self) -> int:
        return len(self.routes)

    @property
    def num_customers(self) -> int:
        return sum(len(r) for r in self.routes)

    def with_day(self, date: str | None, weekday: int | None) -> "RoutingPlan":
        return RoutingPlan(self.routes, date, weekday)


@dataclass(frozen=True)
class InstanceStream:
    """Chronologically ordered plans (oldest first) over a shared universe."""

    plans: tuple[RoutingPlan, ...]
    universe: StopUniverse
    demands: dict[int, float] | None = None
    capacity: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "plans", tuple(self.plans))
        dates = [p.date for p in self.plans]
        if all(d is not None for d in dates):
            for a, b in zip(dates, dates[1:]):
                if b < a:
                    raise ValueError(f"stream is not chronological: {b} follows {a}")

    def __len__(self) -> int:
        return len(self.plans)

    def __iter__(self):
        return iter(self.plans)

    def __getitem__(self, item):
        return self.plans[item]

    def subset(self, plans: Iterable[RoutingPlan]) -> "InstanceStream":
        return InstanceStream(tuple(plans), self.universe, self.demands, self.capacity)

    def by_weekday(self) -> dict[int | None, "InstanceStream"]:
        groups: dict[int | None, list[RoutingPlan]] = {}
        for p in self.plans:
            groups.setdefault(p.weekday, []).append(p)
        ordered = sorted(groups.items(), key=lambda kv: (kv[0] is None, kv[0] or 0))
        return {wd: self.subset(ps) for wd, ps in ordered}


def validate_plan(plan: RoutingPlan, universe: StopUniverse | int | None = None) -> list[str]:
    """List structural violations of ``plan``; an empty list means the plan is valid.

    ``universe`` may be a :class:`StopUniverse` or its size; when omitted,
    index bounds are not checked.
    """
    size = len(universe) if isinstance(universe, StopUniverse) else universe
    problems = []
    if not plan.routes:
        problems.append("plan has no routes")
    seen: dict[int, int] = {}
    for k, route in enumerate(plan.routes):
        if not route:
            problems.append(f"route {k} is empty")
        for s in route:
            if s == DEPOT:
                problems.append(f"depot inside route {k}")
            elif s < 0 or (size is not None and s >= size):
                problems.append(f"unknown stop index {s} in route {k}")
            elif s in seen:
                if seen[s] == k:
                    problems.append(f"stop {s} repeated in route {k}")
                else:
                    problems.append(f"stop {s} in two routes")
            else:
                seen[s] = k
    return problems


def check_plan(plan: RoutingPlan, universe: StopUniverse | int | None = None) -> None:
    problems = validate_plan(plan, universe)
    if problems:
        raise InvalidPlanError("; ".join(problems))


def route_arcs(route: Route) -> list[Arc]:
    path = (DEPOT, *route, DEPOT)
    return list(zip(path, path[1:]))


def arcs_of(plan: RoutingPlan) -> frozenset[Arc]:
    """All arcs travelled by ``plan``, depot arcs included."""
    check_plan(plan)
    return frozenset(a for r in plan.routes for a in route_arcs(r))


def plan_cost(plan: RoutingPlan, costs, labels: Sequence[int] | None = None) -> float:
    """Sum of arc costs of ``plan``.

    ``labels`` maps matrix positions to stop indices when ``costs`` covers only
    a subset of the universe (position 0 must be the depot).
    """
    pos = {s: i for i, s in enumerate(labels)} if labels is not None else None
    total = 0.0
    for route in plan.routes:
        for a, b in route_arcs(route):
            if pos is not None:
                a, b = pos[a], pos[b]
            total += float(costs[a][b])
    return total
