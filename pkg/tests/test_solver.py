import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import all_routings, random_costs, routing_cost
from histroute.learner import TransitionMatrix, build_transition
from histroute.model import RoutingPlan, validate_plan
from histroute.solver import (FALLBACK, INFEASIBLE, OPTIMAL, CvrpInstance, brute_force_oracle,
                              plan_log_likelihood, solve_exact, solve_most_likely)


def test_single_customer():
    c = np.array([[0, 3.0], [4.0, 0]])
    res = solve_exact(CvrpInstance(c, (1,), 1))
    assert res.status == OPTIMAL
    assert res.plan.routes == ((1,),)
    assert res.objective == 7.0


def test_tsp_matches_permutation_oracle():
    rng = np.random.default_rng(11)
    pts = rng.uniform(size=(4, 2))
    c = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    best = min(c[0, p[0]] + c[p[0], p[1]] + c[p[1], p[2]] + c[p[2], 0]
               for p in itertools.permutations([1, 2, 3]))
    res = solve_exact(CvrpInstance(c, (1, 2, 3), 1))
    assert res.objective == pytest.approx(best, abs=1e-12)


def test_capacity_forces_pairs():
    rng = np.random.default_rng(5)
    c = random_costs(rng, 4)
    inst = CvrpInstance(c, (1, 2, 3, 4), 2, demands=(3, 3, 3, 3), capacity=6, mode="demand")
    res = solve_exact(inst)
    assert all(len(r) == 2 for r in res.plan.routes)
    best = min(routing_cost(c, r) for r in all_routings([1, 2, 3, 4], 2)
               if all(len(x) == 2 for x in r))
    assert res.objective == pytest.approx(best, abs=1e-9)


def test_forced_partition():
    c = random_costs(np.random.default_rng(0), 2)
    assert solve_exact(CvrpInstance(c, (1, 2), 2)).plan.routes == ((1,), (2,))


def test_infeasible_capacity():
    res = solve_exact(CvrpInstance(np.array([[0, 1.0], [1.0, 0]]), (1,), 1,
                                   demands=(5,), capacity=4, mode="demand"))
    assert res.status == INFEASIBLE and res.plan is None


def test_too_many_routes_is_infeasible():
    res = solve_exact(CvrpInstance(random_costs(np.random.default_rng(0), 2), (1, 2), 3))
    assert res.status == INFEASIBLE


def test_customer_labels_are_preserved():
    c = np.array([[0, 1, 5, 9], [5, 0, 1, 9], [9, 5, 0, 1], [1, 9, 5, 0]], dtype=float)
    res = solve_exact(CvrpInstance(c, (7, 3, 12), 1))
    # positions 1,2,3 map to stops 7,3,12; after sorting: 3,7,12
    assert res.plan.stop_set == {3, 7, 12}
    assert res.objective == pytest.approx(4.0)
    assert res.plan.routes == ((7, 3, 12),)


def test_oracle_refuses_large_instances():
    c = random_costs(np.random.default_rng(0), 9)
    with pytest.raises(ValueError):
        brute_force_oracle(CvrpInstance(c, tuple(range(1, 10)), 2))


def test_oracle_agrees_with_independent_enumeration():
    rng = np.random.default_rng(2)
    for n, m in [(4, 1), (5, 2), (5, 3)]:
        c = random_costs(rng, n)
        best = min(routing_cost(c, r) for r in all_routings(range(1, n + 1), m))
        assert brute_force_oracle(CvrpInstance(c, tuple(range(1, n + 1)), m)).objective == \
            pytest.approx(best, abs=1e-9)


def test_budget_exhaustion_falls_back():
    rng = np.random.default_rng(4)
    c = random_costs(rng, 7)
    inst = CvrpInstance(c, tuple(range(1, 8)), 2)
    res = solve_exact(inst, node_budget=10)
    assert res.status == FALLBACK
    assert inst.is_feasible(res.plan)
    assert res.objective >= solve_exact(inst).objective - 1e-9


def test_large_instance_uses_heuristic():
    rng = np.random.default_rng(4)
    n = 18
    c = random_costs(rng, n)
    inst = CvrpInstance(c, tuple(range(1, n + 1)), 3)
    res = solve_exact(inst, time_budget=2.0)
    assert res.status == FALLBACK
    assert inst.is_feasible(res.plan)


@st.composite
def instances(draw, max_n=6, max_m=3):
    n = draw(st.integers(1, max_n))
    m = draw(st.integers(1, min(max_m, n)))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    c = random_costs(rng, n)
    if draw(st.booleans()):
        q = tuple(int(x) for x in rng.integers(1, 4, size=n))
        Q = max(max(q), math.ceil(sum(q) / m) + int(rng.integers(0, 3)))
        return CvrpInstance(c, tuple(range(1, n + 1)), m, demands=q, capacity=Q, mode="demand")
    return CvrpInstance(c, tuple(range(1, n + 1)), m, fleet=draw(st.sampled_from(["equal", "atmost"])))


@given(instances())
def test_exact_equals_oracle(inst):
    res = solve_exact(inst)
    ref = brute_force_oracle(inst)
    assert res.status == ref.status
    if ref.plan is not None:
        assert abs(res.objective - ref.objective) <= 1e-9
        assert res.plan == ref.plan
        assert inst.is_feasible(res.plan)
        assert not validate_plan(res.plan)


@given(instances())
def test_solver_is_deterministic(inst):
    a, b = solve_exact(inst), solve_exact(inst)
    assert a.plan == b.plan and a.objective == b.objective


@given(instances(max_n=5))
def test_atmost_never_worse_than_equal(inst):
    eq = CvrpInstance(inst.costs, inst.customers, inst.fleet_size, fleet="equal")
    at = CvrpInstance(inst.costs, inst.customers, inst.fleet_size, fleet="atmost")
    r_eq, r_at = solve_exact(eq), solve_exact(at)
    assert r_at.objective <= r_eq.objective + 1e-9
    assert r_at.plan.num_routes <= inst.fleet_size
    assert r_eq.plan.num_routes == inst.fleet_size


@given(instances(max_n=6))
def test_plans_have_no_subtours(inst):
    res = solve_exact(inst)
    if res.plan is None:
        return
    # each route is a single depot-anchored path covering its customers once
    seen = [s for r in res.plan.routes for s in r]
    assert sorted(seen) == sorted(inst.customers)
    assert res.objective == pytest.approx(inst.plan_cost(res.plan), abs=1e-12)


# most likely plan ---------------------------------------------------------

def test_probability_one_chain():
    t = np.array([[0, 1.0, 0], [0, 0, 1.0], [1.0, 0, 0]])
    res = solve_most_likely(TransitionMatrix(t, (0, 1, 2)), {1, 2}, 1)
    assert res.plan.routes == ((1, 2),)
    assert res.objective == 0.0


def test_uniform_matrix_returns_canonical_tie_break():
    t = TransitionMatrix(np.full((5, 5), 0.2), tuple(range(5)))
    res = solve_most_likely(t, {1, 2, 3, 4}, 1)
    assert res.plan.routes == ((1, 2, 3, 4),)


def test_forbidden_arcs_fall_back_to_penalty():
    # the only allowed cycle needs two routes, but one route is requested
    t = np.array([[0, 0.5, 0.5], [1.0, 0, 0], [1.0, 0, 0]])
    res = solve_most_likely(TransitionMatrix(t, (0, 1, 2)), {1, 2}, 1)
    assert res.status == OPTIMAL
    assert res.plan.num_routes == 1


def test_learned_five_customer_argmax():
    history = [RoutingPlan.of([[1, 2, 3], [4, 5]]), RoutingPlan.of([[2, 1, 3], [5, 4]]),
               RoutingPlan.of([[1, 2], [3, 4, 5]])]
    t = build_transition(history, alpha=1.0)
    res = solve_most_likely(t, {1, 2, 3, 4, 5}, 2)

    def prob(routes):
        out = 1.0
        for r in routes:
            path = [0, *r, 0]
            for a, b in zip(path, path[1:]):
                out *= t.values[a, b]
        return out

    scored = {r: prob(r) for r in all_routings([1, 2, 3, 4, 5], 2)}
    best = max(scored.values())
    argmax = {r for r, p in scored.items() if p >= best * (1 - 1e-12)}
    assert res.plan.routes in argmax
    assert plan_log_likelihood(t, res.plan) == pytest.approx(-res.objective, abs=1e-9)


@settings(max_examples=40)
@given(st.integers(1, 6), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_most_likely_maximises_product(n, m, seed):
    m = min(m, n)
    rng = np.random.default_rng(seed)
    p = rng.uniform(0.01, 1.0, size=(n + 1, n + 1))
    p /= p.sum(axis=1, keepdims=True)
    t = TransitionMatrix(p, tuple(range(n + 1)))
    res = solve_most_likely(t, range(1, n + 1), m)
    scores = {r: math.prod(p[a, b] for x in r for a, b in zip([0, *x], [*x, 0]))
              for r in all_routings(range(1, n + 1), m)}
    best = max(scores.values())
    assert scores[res.plan.routes] >= best * (1 - 1e-9)
