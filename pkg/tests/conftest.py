import itertools

import numpy as np
from hypothesis import HealthCheck, settings, strategies as st

from histroute.model import RoutingPlan

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def plans(draw, max_customers=8, max_routes=3, min_customers=1):
    """Valid plans over customers 1..n with a random route split."""
    n = draw(st.integers(min_customers, max_customers))
    order = draw(st.permutations(list(range(1, n + 1))))
    m = draw(st.integers(1, min(max_routes, n)))
    cuts = sorted(draw(st.lists(st.integers(1, n - 1), min_size=m - 1, max_size=m - 1,
                                unique=True))) if m > 1 else []
    bounds = [0, *cuts, n]
    return RoutingPlan.of([order[a:b] for a, b in zip(bounds, bounds[1:])])


def all_routings(customers, m):
    """Every plan with exactly m non-empty routes, as tuples of route tuples.

    Independent of the solver module: ordered set partitions via labelled
    assignment, deduplicated by canonical form.
    """
    customers = list(customers)
    seen = set()
    for labels in itertools.product(range(m), repeat=len(customers)):
        if len(set(labels)) != m:
            continue
        groups = [[c for c, l in zip(customers, labels) if l == k] for k in range(m)]
        for orders in itertools.product(*(itertools.permutations(g) for g in groups)):
            key = tuple(sorted(orders, key=min))
            if key not in seen:
                seen.add(key)
                yield key


def routing_cost(costs, routes, pos=None):
    total = 0.0
    for r in routes:
        path = [0, *r, 0]
        for a, b in zip(path, path[1:]):
            i, j = (pos[a], pos[b]) if pos else (a, b)
            total += costs[i][j]
    return total


def random_costs(rng, n, lo=1.0, hi=10.0):
    c = rng.uniform(lo, hi, size=(n + 1, n + 1))
    np.fill_diagonal(c, 0.0)
    return c


ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def acceptance(number: int, ok: bool, detail: str):
    """Record and print one acceptance line, then assert it."""
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_RESULTS[number] = (ok, line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[number][1])
