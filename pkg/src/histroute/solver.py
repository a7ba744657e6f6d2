"""Exact fixed-fleet CVRP solver for desk-scale instances.

The search is a depth-first branch-and-bound over partial routes that visits
plans in lexicographic order of their canonical serialisation (routes sorted
by smallest customer, each route a stop sequence). Its lower bound at every
node is the exact completion cost obtained from two subset dynamic programs:

* ``B[i, W]``: cheapest path leaving node ``i``, visiting exactly the customer
  set ``W`` and returning to the depot (Held-Karp, backwards).
* ``P[k, S]``: cheapest way to cover ``S`` with exactly ``k`` capacity-feasible
  routes (set partition over ``B[0]``).

Because the bound is exact the search never explores a dead branch, and the
first complete plan reached within tolerance of the optimum is the
lexicographically smallest optimal plan. A brute-force enumerator is provided
as an independent oracle.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .learner import CostMatrix, TransitionMatrix, to_cost_matrix, with_forbidden_penalty
from .model import DEPOT, RoutingPlan

TOL = 1e-9
OPTIMAL = "optimal"
FALLBACK = "feasible-fallback"
INFEASIBLE = "infeasible"

MAX_EXACT_CUSTOMERS = 15
DEFAULT_NODE_BUDGET = 50_000_000
DEFAULT_TIME_BUDGET = 600.0


@dataclass(frozen=True, eq=False)
class CvrpInstance:
    """Fixed-fleet CVRP over a dense cost matrix.

    ``costs`` is ``(n+1) x (n+1)`` with the depot at position 0 and
    ``customers[p]`` the stop index at position ``p + 1``. ``inf`` marks an
    unusable arc. In ``unit`` mode every demand is 1 and the capacity equals
    the number of customers. ``fleet="atmost"`` allows fewer than
    ``fleet_size`` routes.
    """

    costs: np.ndarray
    customers: tuple[int, ...]
    fleet_size: int
    demands: tuple[float, ...] | None = None
    capacity: float | None = None
    mode: str = "unit"
    fleet: str = "equal"

    def __post_init__(self):
        c = np.array(self.costs, dtype=float)
        customers = tuple(int(s) for s in self.customers)
        n = len(customers)
        if c.shape != (n + 1, n + 1):
            raise ValueError(f"cost matrix shape {c.shape} does not fit {n} customers")
        if np.isnan(c).any():
            raise ValueError("cost matrix contains NaN")
        if len(set(customers)) != n or DEPOT in customers:
            raise ValueError("customers must be distinct non-depot stops")
        if self.fleet_size < 1:
            raise ValueError("fleet size must be positive")
        if self.mode not in ("unit", "demand"):
            raise ValueError(f"unknown capacity mode {self.mode!r}")
        if self.fleet not in ("equal", "atmost"):
            raise ValueError(f"unknown fleet mode {self.fleet!r}")
        if self.mode == "unit":
            demands = (1.0,) * n
            capacity = float(max(n, 1))
        else:
            if self.demands is None or self.capacity is None:
                raise ValueError("demand mode needs demands and a capacity")
            demands = tuple(float(q) for q in self.demands)
            capacity = float(self.capacity)
            if len(demands) != n:
                raise ValueError("one demand per customer is required")
            if any(q < 0 for q in demands) or capacity <= 0:
                raise ValueError("demands must be non-negative and capacity positive")
        # customers ascending so that position order equals label order
        order = sorted(range(n), key=lambda p: customers[p])
        perm = [0] + [p + 1 for p in order]
        object.__setattr__(self, "costs", c[np.ix_(perm, perm)])
        object.__setattr__(self, "customers", tuple(customers[p] for p in order))
        object.__setattr__(self, "demands", tuple(demands[p] for p in order))
        object.__setattr__(self, "capacity", capacity)

    @classmethod
    def from_costs(cls, costs: CostMatrix, customers: Iterable[int], fleet_size: int,
                   **kwargs) -> "CvrpInstance":
        customers = sorted(set(customers))
        sub = costs.restricted([DEPOT, *customers])
        return cls(sub.values, tuple(customers), fleet_size, **kwargs)

    @property
    def n(self) -> int:
        return len(self.customers)

    def route_counts(self) -> range:
        m = self.fleet_size
        return range(1, m + 1) if self.fleet == "atmost" else range(m, m + 1)

    def plan_cost(self, plan: RoutingPlan) -> float:
        pos = {s: p + 1 for p, s in enumerate(self.customers)}
        pos[DEPOT] = 0
        total = 0.0
        for route in plan.routes:
            path = (DEPOT, *route, DEPOT)
            for a, b in zip(path, path[1:]):
                total += float(self.costs[pos[a], pos[b]])
        return total

    def is_feasible(self, plan: RoutingPlan) -> bool:
        from .model import validate_plan

        if validate_plan(plan) or plan.stop_set != frozenset(self.customers):
            return False
        if plan.num_routes not in self.route_counts():
            return False
        q = dict(zip(self.customers, self.demands))
        return all(sum(q[s] for s in r) <= self.capacity + TOL for r in plan.routes)

    def trivially_infeasible(self) -> str | None:
        m_min = min(self.route_counts())
        if self.n < m_min:
            return f"{m_min} routes need at least {m_min} customers, got {self.n}"
        if sum(self.demands) > self.fleet_size * self.capacity + TOL:
            return "total demand exceeds fleet capacity"
        if any(q > self.capacity + TOL for q in self.demands):
            return "a single demand exceeds vehicle capacity"
        return None


@dataclass
class SolverResult:
    plan: RoutingPlan | None
    objective: float
    status: str
    stats: dict = field(default_factory=dict)


class _OutOfBudget(Exception):
    pass


# subset bookkeeping ---------------------------------------------------------

def _pdep(ranks: np.ndarray, masks: np.ndarray, width: int) -> np.ndarray:
    """Deposit the low bits of ``ranks`` into the set bits of ``masks``."""
    out = np.zeros_like(ranks)
    r = ranks.copy()
    for j in range(width):
        has = (masks >> j) & 1
        out |= (r & has) << j
        r = np.where(has == 1, r >> 1, r)
    return out


def _popcount(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.int64)
    c = np.zeros_like(x)
    while np.any(x):
        c += x & 1
        x = x >> 1
    return c


def _submasks(mask: int) -> np.ndarray:
    width = mask.bit_length()
    k = bin(mask).count("1")
    ranks = np.arange(1 << k, dtype=np.int64)
    return _pdep(ranks, np.full_like(ranks, mask), width)


@lru_cache(maxsize=None)
def _layers(n: int):
    """Per popcount layer and per bit: the masks of that layer containing the bit."""
    masks = np.arange(1 << n, dtype=np.int64)
    pc = _popcount(masks)
    out = []
    for s in range(1, n + 1):
        layer = masks[pc == s]
        out.append([(p, layer[((layer >> p) & 1) == 1]) for p in range(n)])
    return out


def _pair_table(width: int):
    """All (U, T) with T a subset of U over ``width`` bits, grouped by U.

    Returns ``(u, t, offsets)`` where ``offsets`` starts each U group.
    """
    if width <= 13:
        return _pair_table_cached(width)
    return _build_pair_table(width)


@lru_cache(maxsize=None)
def _pair_table_cached(width: int):
    return _build_pair_table(width)


def _build_pair_table(width: int):
    us = np.arange(1 << width, dtype=np.int64)
    counts = np.left_shift(1, _popcount(us))
    offsets = np.concatenate(([0], np.cumsum(counts)[:-1]))
    u = np.repeat(us, counts)
    ranks = np.arange(u.size, dtype=np.int64) - np.repeat(offsets, counts)
    t = _pdep(ranks, u, width)
    return u, t, offsets


def _demand_sums(q: Sequence[float], n: int) -> np.ndarray:
    masks = np.arange(1 << n, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(n)) & 1
    return bits.astype(float) @ np.asarray(q, dtype=float) if n else np.zeros(1)


def _route_table(c: np.ndarray, n: int) -> np.ndarray:
    """``B[i, W]`` for every node ``i`` and customer subset ``W``."""
    B = np.full((n + 1, 1 << n), np.inf)
    B[:, 0] = c[:, 0]
    for layer in _layers(n):
        for p, sel in layer:
            cand = c[:, p + 1][:, None] + B[p + 1, sel ^ (1 << p)][None, :]
            B[:, sel] = np.minimum(B[:, sel], cand)
    return B


def _partition_tables(r: np.ndarray, n: int, kmax: int, deadline: float) -> list[np.ndarray]:
    """``P[k][S]`` for ``k = 0..kmax``: exactly ``k`` routes covering ``S``."""
    size = 1 << n
    p0 = np.full(size, np.inf)
    p0[0] = 0.0
    tables = [p0]
    if kmax >= 1:
        tables.append(r)
    for k in range(2, kmax + 1):
        prev = tables[-1]
        pk = np.full(size, np.inf)
        for b in range(n):
            if time.monotonic() > deadline:
                raise _OutOfBudget
            w = n - 1 - b
            u, t, offsets = _pair_table(w)
            low = 1 << b
            tset = low | (t << (b + 1))
            rest = (u ^ t) << (b + 1)
            vals = r[tset] + prev[rest]
            pk[low | (np.arange(1 << w, dtype=np.int64) << (b + 1))] = np.minimum.reduceat(vals, offsets)
        tables.append(pk)
    return tables


def _dp_work(n: int, m: int) -> int:
    work = (n + 1) * (1 << n) * max(n, 1)
    if m >= 3:
        work += (m - 2) * sum(3 ** (n - 1 - b) for b in range(n))
    return work


# exact search ---------------------------------------------------------------

class _Search:
    def __init__(self, inst: CvrpInstance, B, P, qsum, limit, deadline, node_budget):
        self.c = inst.costs
        self.q = inst.demands
        self.Q = inst.capacity + TOL
        self.B = B
        self.P = P
        self.qsum = qsum
        self.limit = limit
        self.deadline = deadline
        self.node_budget = node_budget
        self.nodes = 0

    def _tick(self):
        self.nodes += 1
        if self.nodes > self.node_budget or (self.nodes % 64 == 0 and time.monotonic() > self.deadline):
            raise _OutOfBudget

    def completion(self, i: int, R: int, k_left: int, need: int, load: float) -> float:
        subs = _submasks(R)
        vals = self.B[i, subs] + self.P[k_left][R ^ subs]
        ok = self.qsum[subs] + load <= self.Q
        if need:
            ok &= (subs & need) != 0
        vals = vals[ok]
        return float(vals.min()) if vals.size else math.inf

    @staticmethod
    def _bits(R: int):
        while R:
            low = R & -R
            yield low.bit_length() - 1, low
            R ^= low

    def open_route(self, R: int, k_left: int, cost: float, done: list):
        self._tick()
        low = R & -R
        for p, bit in self._bits(R):
            load = self.q[p]
            if load > self.Q:
                continue
            g = cost + self.c[0, p + 1]
            need = 0 if bit == low else low
            if g + self.completion(p + 1, R ^ bit, k_left, need, load) <= self.limit:
                found = self.extend(R ^ bit, k_left, g, done, [p], load, need)
                if found:
                    return found
        return None

    def extend(self, R: int, k_left: int, cost: float, done: list, seq: list, load: float, need: int):
        self._tick()
        i = seq[-1] + 1
        if not need:
            g = cost + self.c[i, 0]
            if g + self.P[k_left][R] <= self.limit:
                closed = done + [tuple(seq)]
                if R == 0:
                    return closed, g
                found = self.open_route(R, k_left - 1, g, closed)
                if found:
                    return found
        for p, bit in self._bits(R):
            ld = load + self.q[p]
            if ld > self.Q:
                continue
            g = cost + self.c[i, p + 1]
            nd = 0 if bit == need else need
            if g + self.completion(p + 1, R ^ bit, k_left, nd, ld) <= self.limit:
                found = self.extend(R ^ bit, k_left, g, done, seq + [p], ld, nd)
                if found:
                    return found
        return None


def _to_plan(inst: CvrpInstance, routes) -> RoutingPlan:
    return RoutingPlan.of([[inst.customers[p] for p in r] for r in routes])


def _serial(plan: RoutingPlan):
    return plan.routes


def solve_exact(instance: CvrpInstance, node_budget: int = DEFAULT_NODE_BUDGET,
                time_budget: float = DEFAULT_TIME_BUDGET) -> SolverResult:
    """Minimum-cost plan with exactly ``fleet_size`` routes (or at most, per ``fleet``).

    Among plans within ``TOL`` of the optimum the lexicographically smallest
    canonical plan is returned. Instances beyond the exact budget are handed
    to a local-search heuristic and reported as ``feasible-fallback``.
    """
    start = time.monotonic()
    deadline = start + time_budget
    inst = instance
    n = inst.n
    reason = inst.trivially_infeasible()
    if reason:
        return SolverResult(None, math.inf, INFEASIBLE, {"reason": reason, "nodes": 0, "wall_time": 0.0})

    counts = list(inst.route_counts())
    work = _dp_work(n, max(counts))
    if n > MAX_EXACT_CUSTOMERS or work > node_budget:
        return _fallback(inst, start, deadline, f"instance exceeds exact budget ({work} dp states)")

    try:
        c = inst.costs
        qsum = _demand_sums(inst.demands, n)
        B = _route_table(c, n)
        r = B[0].copy()
        r[0] = np.inf
        r[qsum > inst.capacity + TOL] = np.inf
        P = _partition_tables(r, n, max(counts) - 1, deadline)
        full = (1 << n) - 1
        # the route holding customer position 0 closes the partition
        tsets = 1 | (np.arange(1 << (n - 1), dtype=np.int64) << 1)
        opt_by_k = {k: float(np.min(r[tsets] + P[k - 1][full ^ tsets])) for k in counts}
        opt = min(opt_by_k.values())
        stats = {"dp_states": work, "nodes": 0}
        if not math.isfinite(opt):
            stats["wall_time"] = time.monotonic() - start
            stats["reason"] = "no feasible plan over allowed arcs"
            return SolverResult(None, math.inf, INFEASIBLE, stats)

        best = None
        for k in counts:
            if opt_by_k[k] > opt + TOL:
                continue
            search = _Search(inst, B, P, qsum, opt + TOL, deadline, node_budget)
            found = search.open_route(full, k - 1, 0.0, [])
            stats["nodes"] += search.nodes
            if found is None:  # pragma: no cover - exact bound guarantees a hit
                raise RuntimeError("exact search failed to reconstruct an optimal plan")
            plan = _to_plan(inst, found[0])
            if best is None or _serial(plan) < _serial(best[0]):
                best = (plan, found[1])
    except _OutOfBudget:
        return _fallback(inst, start, deadline, "search budget exhausted")

    plan, _ = best
    stats["wall_time"] = time.monotonic() - start
    return SolverResult(plan, inst.plan_cost(plan), OPTIMAL, stats)


# fallback heuristic ---------------------------------------------------------

def _routes_cost(c, routes) -> float:
    total = 0.0
    for r in routes:
        path = [0, *(p + 1 for p in r), 0]
        total += sum(c[a, b] for a, b in zip(path, path[1:]))
    return total


def _greedy(inst: CvrpInstance, m: int):
    c, q, Q = inst.costs, inst.demands, inst.capacity + TOL
    routes: list[list[int]] = [[] for _ in range(m)]
    loads = [0.0] * m
    order = sorted(range(inst.n), key=lambda p: (-q[p], p))
    for idx, p in enumerate(order):
        remaining = len(order) - idx
        empties = [k for k in range(m) if not routes[k]]
        candidates = empties if remaining <= len(empties) else range(m)
        best = None
        for k in candidates:
            if loads[k] + q[p] > Q:
                continue
            path = [0, *(s + 1 for s in routes[k]), 0]
            for pos in range(len(path) - 1):
                delta = c[path[pos], p + 1] + c[p + 1, path[pos + 1]] - c[path[pos], path[pos + 1]]
                if not math.isfinite(delta):
                    delta = math.inf
                key = (delta, k, pos)
                if best is None or key < best:
                    best = key
        if best is None:
            return None
        _, k, pos = best
        routes[k].insert(pos, p)
        loads[k] += q[p]
    return routes


def _local_search(inst: CvrpInstance, routes, deadline):
    c, q, Q = inst.costs, inst.demands, inst.capacity + TOL
    improved = True
    cost = _routes_cost(c, routes)
    while improved and time.monotonic() < deadline:
        improved = False
        for a in range(len(routes)):
            for i in range(len(routes[a])):
                for b in range(len(routes)):
                    if a == b and len(routes[a]) < 2:
                        continue
                    if a != b and len(routes[a]) < 2:
                        continue
                    p = routes[a][i]
                    if a != b and sum(q[s] for s in routes[b]) + q[p] > Q:
                        continue
                    base = [list(r) for r in routes]
                    base[a].pop(i)
                    for j in range(len(base[b]) + 1):
                        trial = [list(r) for r in base]
                        trial[b].insert(j, p)
                        tc = _routes_cost(c, trial)
                        if tc < cost - 1e-12:
                            routes, cost, improved = trial, tc, True
                            break
                    if improved:
                        break
                if improved:
                    break
            if improved:
                break
        if not improved:
            for a, r in enumerate(routes):
                for i in range(len(r) - 1):
                    for j in range(i + 2, len(r) + 1):
                        trial = [list(x) for x in routes]
                        trial[a][i:j] = reversed(trial[a][i:j])
                        tc = _routes_cost(c, trial)
                        if tc < cost - 1e-12:
                            routes, cost, improved = trial, tc, True
                            break
                    if improved:
                        break
                if improved:
                    break
    return routes, cost


def _fallback(inst: CvrpInstance, start: float, deadline: float, reason: str) -> SolverResult:
    best = None
    for m in inst.route_counts():
        routes = _greedy(inst, m)
        if routes is None:
            continue
        routes, cost = _local_search(inst, routes, max(deadline, time.monotonic() + 1.0))
        plan = _to_plan(inst, routes)
        if best is None or cost < best[1] - TOL:
            best = (plan, cost)
    stats = {"reason": reason, "nodes": 0, "wall_time": time.monotonic() - start}
    if best is None or not math.isfinite(best[1]):
        return SolverResult(None, math.inf, INFEASIBLE, stats)
    return SolverResult(best[0], inst.plan_cost(best[0]), FALLBACK, stats)


# oracle ---------------------------------------------------------------------

ORACLE_MAX_CUSTOMERS = 8
ORACLE_MAX_ROUTES = 3


def _set_partitions(items: list[int], k: int):
    """Partitions of ``items`` into exactly ``k`` blocks, blocks ordered by first item."""
    if k == 0:
        if not items:
            yield []
        return
    if len(items) < k:
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest, k - 1):
        yield [[first]] + part
    for part in _set_partitions(rest, k):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def enumerate_plans(instance: CvrpInstance):
    """Yield every capacity-feasible plan as ``(cost, routes)`` with stop labels."""
    c = instance.costs
    labels = instance.customers
    q = instance.demands
    positions = list(range(instance.n))
    for k in instance.route_counts():
        for blocks in _set_partitions(positions, k):
            if any(sum(q[p] for p in b) > instance.capacity + TOL for b in blocks):
                continue
            for orders in itertools.product(*(itertools.permutations(b) for b in blocks)):
                cost = 0.0
                for route in orders:
                    path = (0, *(p + 1 for p in route), 0)
                    for a, b in zip(path, path[1:]):
                        cost += c[a, b]
                yield cost, tuple(tuple(labels[p] for p in route) for route in orders)


def brute_force_oracle(instance: CvrpInstance) -> SolverResult:
    """Exhaustive enumeration; refuses instances larger than 8 customers or 3 routes."""
    if instance.n > ORACLE_MAX_CUSTOMERS or instance.fleet_size > ORACLE_MAX_ROUTES:
        raise ValueError(
            f"oracle limited to {ORACLE_MAX_CUSTOMERS} customers and {ORACLE_MAX_ROUTES} routes")
    start = time.monotonic()
    plans = list(enumerate_plans(instance))
    stats = {"nodes": len(plans)}
    finite = [(cost, routes) for cost, routes in plans if math.isfinite(cost)]
    if not finite:
        stats["wall_time"] = time.monotonic() - start
        return SolverResult(None, math.inf, INFEASIBLE, stats)
    best = min(cost for cost, _ in finite)
    ties = [RoutingPlan.of(routes) for cost, routes in finite if cost <= best + TOL]
    plan = min(ties, key=_serial)
    stats["wall_time"] = time.monotonic() - start
    return SolverResult(plan, instance.plan_cost(plan), OPTIMAL, stats)


# learned matrices -----------------------------------------------------------

def most_likely_instance(t: TransitionMatrix, stop_set: Iterable[int], fleet_size: int,
                         **kwargs) -> CvrpInstance:
    customers = sorted(set(stop_set))
    sub = t.restricted([DEPOT, *customers])
    costs = with_forbidden_penalty(to_cost_matrix(sub), fleet_size)
    return CvrpInstance(costs.values, tuple(customers), fleet_size, **kwargs)


def solve_most_likely(t: TransitionMatrix, stop_set: Iterable[int], fleet_size: int,
                      node_budget: int = DEFAULT_NODE_BUDGET,
                      time_budget: float = DEFAULT_TIME_BUDGET, **kwargs) -> SolverResult:
    """Most probable plan over ``stop_set`` under the first-order transition model."""
    inst = most_likely_instance(t, stop_set, fleet_size, **kwargs)
    return solve_exact(inst, node_budget=node_budget, time_budget=time_budget)


def plan_log_likelihood(t: TransitionMatrix, plan: RoutingPlan) -> float:
    pos = {s: i for i, s in enumerate(t.stops)}
    total = 0.0
    for route in plan.routes:
        path = (DEPOT, *route, DEPOT)
        for a, b in zip(path, path[1:]):
            p = t.values[pos[a], pos[b]]
            total += math.log(p) if p > 0 else -math.inf
    return total
