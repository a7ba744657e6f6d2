"""Route/arc difference metrics and the batch and incremental evaluation loops."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .learner import (CostMatrix, Scheme, WeighingScheme, blend, build_transition,
                      default_stops, distance_probabilities)
from .model import InstanceStream, RoutingPlan, arcs_of, check_plan
from .solver import (DEFAULT_NODE_BUDGET, DEFAULT_TIME_BUDGET, CvrpInstance, SolverResult,
                     solve_exact, solve_most_likely)

log = logging.getLogger(__name__)

DIST = "DIST"
SCHEMES = tuple(s.value for s in Scheme) + (DIST,)


def _same_customers(predicted: RoutingPlan, actual: RoutingPlan):
    check_plan(predicted)
    check_plan(actual)
    if predicted.stop_set != actual.stop_set:
        raise ValueError("predicted and actual plans serve different customers")


def route_difference(predicted: RoutingPlan, actual: RoutingPlan) -> int:
    """Stops of the actual plan that sit in a different route than predicted.

    Routes are paired greedily by smallest symmetric difference (ties: smallest
    actual route, then smallest predicted route, by sorted stop tuple); the
    plan with fewer routes is padded with empty routes.
    """
    _same_customers(predicted, actual)
    act = [frozenset(r) for r in actual.routes]
    pred = [frozenset(r) for r in predicted.routes]
    width = max(len(act), len(pred))
    act += [frozenset()] * (width - len(act))
    pred += [frozenset()] * (width - len(pred))
    act_free, pred_free = set(range(width)), set(range(width))
    total = 0
    while act_free:
        _, _, _, i, j = min(
            (len(act[i] ^ pred[j]), tuple(sorted(act[i])), tuple(sorted(pred[j])), i, j)
            for i in act_free for j in pred_free)
        total += len(act[i] - pred[j])
        act_free.remove(i)
        pred_free.remove(j)
    return total


def arc_difference(predicted: RoutingPlan, actual: RoutingPlan) -> int:
    """Arcs travelled in ``actual`` but not in ``predicted``."""
    _same_customers(predicted, actual)
    return len(arcs_of(actual) - arcs_of(predicted))


@dataclass(frozen=True)
class EvaluationRecord:
    test_day: str | None
    weekday: int | None
    scheme: str
    alpha: float | None
    beta: float | None
    rd: int
    ad: int
    status: str
    solve_time: float
    mode: str = "incremental"
    n_train: int = 0


@dataclass(frozen=True)
class SplitConfig:
    mode: str = "incremental"
    train_fraction: float = 0.75
    weekday_grouping: bool = True
    capacity: str = "unit"
    fleet: str = "equal"
    count_diagonal: bool = True
    node_budget: int = DEFAULT_NODE_BUDGET
    time_budget: float = DEFAULT_TIME_BUDGET

    def __post_init__(self):
        if self.mode not in ("batch", "incremental"):
            raise ValueError(f"unknown evaluation mode {self.mode!r}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.capacity not in ("unit", "demand"):
            raise ValueError(f"unknown capacity mode {self.capacity!r}")
        if self.fleet not in ("equal", "atmost"):
            raise ValueError(f"unknown fleet mode {self.fleet!r}")


def _capacity_kwargs(stream: InstanceStream, test: RoutingPlan, config: SplitConfig) -> dict:
    kw = {"mode": config.capacity, "fleet": config.fleet}
    if config.capacity == "demand":
        if stream.demands is None or stream.capacity is None:
            raise ValueError("demand mode needs per-stop demands and a vehicle capacity")
        customers = sorted(test.stop_set)
        kw["demands"] = tuple(stream.demands[s] for s in customers)
        kw["capacity"] = stream.capacity
    return kw


def predict(train: Sequence[RoutingPlan], test: RoutingPlan, scheme: str, alpha: float = 1.0,
            beta: float = 1.0, costs: CostMatrix | None = None,
            config: SplitConfig = SplitConfig(), stream: InstanceStream | None = None) -> SolverResult:
    """Solve ``test``'s stop set with ``test``'s route count from a model trained on ``train``."""
    m = test.num_routes
    kw = _capacity_kwargs(stream, test, config) if stream is not None else {
        "mode": config.capacity, "fleet": config.fleet}
    budgets = {"node_budget": config.node_budget, "time_budget": config.time_budget}
    if scheme == DIST:
        if costs is None:
            raise ValueError("the DIST baseline needs a cost matrix")
        inst = CvrpInstance.from_costs(costs, test.stop_set, m, **kw)
        return solve_exact(inst, **budgets)
    kind = Scheme(scheme)
    ref = test.stop_set if kind in (Scheme.SIMI, Scheme.SIMI2) else None
    stops = default_stops(train, test.stop_set)
    t = build_transition(train, WeighingScheme(kind, ref), alpha, stops, config.count_diagonal)
    if beta != 1.0:
        if costs is None:
            raise ValueError("blending (beta < 1) needs a cost matrix")
        t = blend(t, distance_probabilities(costs.restricted(stops)), beta)
    return solve_most_likely(t, test.stop_set, m, **budgets, **kw)


def _groups(stream: InstanceStream, config: SplitConfig) -> list[tuple[int | None, InstanceStream]]:
    if config.weekday_grouping:
        return list(stream.by_weekday().items())
    return [(None, stream)]


def _evaluate(stream: InstanceStream, config: SplitConfig, scheme: str, alpha: float,
              beta: float, costs: CostMatrix | None) -> list[EvaluationRecord]:
    scheme = str(scheme)
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if scheme == DIST and costs is None:
        raise ValueError("the DIST baseline needs a cost matrix")
    records = []
    for weekday, group in _groups(stream, config):
        n = len(group)
        n_train = math.floor(config.train_fraction * n)
        if n_train < 1 or n_train >= n:
            log.warning("skipping weekday %s: %d instances leave no train/test split", weekday, n)
            continue
        for j in range(n_train, n):
            train = group.plans[:n_train] if config.mode == "batch" else group.plans[:j]
            test = group.plans[j]
            start = time.perf_counter()
            result = predict(train, test, scheme, alpha, beta, costs, config, stream)
            elapsed = time.perf_counter() - start
            if result.plan is None:
                rd, ad = test.num_customers, len(arcs_of(test))
            else:
                rd = route_difference(result.plan, test)
                ad = arc_difference(result.plan, test)
            records.append(EvaluationRecord(
                test.date, test.weekday, scheme,
                None if scheme == DIST else float(alpha),
                None if scheme == DIST else float(beta),
                rd, ad, result.status, elapsed, config.mode, len(train)))
    return records


def evaluate_batch(stream: InstanceStream, config: SplitConfig = SplitConfig(mode="batch"),
                   scheme: str = "UNIF", alpha: float = 1.0, beta: float = 1.0,
                   costs: CostMatrix | None = None) -> list[EvaluationRecord]:
    """Train once per weekday group on its first ``train_fraction`` and test on the rest."""
    if config.mode != "batch":
        config = _replace_mode(config, "batch")
    return _evaluate(stream, config, scheme, alpha, beta, costs)


def evaluate_incremental(stream: InstanceStream, config: SplitConfig = SplitConfig(),
                         scheme: str = "UNIF", alpha: float = 1.0, beta: float = 1.0,
                         costs: CostMatrix | None = None) -> list[EvaluationRecord]:
    """Rolling evaluation: predict day ``j+1`` from all same-group days up to ``j``."""
    if config.mode != "incremental":
        config = _replace_mode(config, "incremental")
    return _evaluate(stream, config, scheme, alpha, beta, costs)


def evaluate(stream: InstanceStream, config: SplitConfig, scheme: str, alpha: float = 1.0,
             beta: float = 1.0, costs: CostMatrix | None = None) -> list[EvaluationRecord]:
    return _evaluate(stream, config, scheme, alpha, beta, costs)


def _replace_mode(config: SplitConfig, mode: str) -> SplitConfig:
    return replace(config, mode=mode)


def _stats(values: Iterable[float]) -> dict:
    v = np.asarray(list(values), dtype=float)
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"mean": float(v.mean()), "median": float(med), "min": float(v.min()),
            "max": float(v.max()), "q1": float(q1), "q3": float(q3)}


def summarize(records: Sequence[EvaluationRecord]) -> dict[str, dict]:
    """Per-scheme distribution of RD and AD, mean solve time and non-optimal count."""
    if not records:
        raise ValueError("cannot summarise an empty record list")
    by_scheme: dict[str, list[EvaluationRecord]] = {}
    for r in records:
        by_scheme.setdefault(r.scheme, []).append(r)
    return {
        scheme: {
            "count": len(rs),
            "rd": _stats(r.rd for r in rs),
            "ad": _stats(r.ad for r in rs),
            "mean_solve_time_s": float(np.mean([r.solve_time for r in rs])),
            "non_optimal": sum(r.status != "optimal" for r in rs),
        }
        for scheme, rs in by_scheme.items()
    }
