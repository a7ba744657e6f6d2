import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import all_routings, plans
from histroute.learner import (FORBIDDEN, CostMatrix, FrequencyMatrix, Scheme, TransitionMatrix,
                               WeighingScheme, blend, build_frequency, build_transition,
                               distance_probabilities, forbidden_penalty, instance_weight,
                               jaccard, smooth_normalize, to_cost_matrix)
from histroute.model import RoutingPlan


def fraction_smooth(row, alpha, d):
    """Exact rational Laplace smoothing of one row (reference implementation)."""
    row = [Fraction(x) for x in row]
    alpha = Fraction(alpha)
    total = sum(row)
    return [(x + alpha) / (total + alpha * d) for x in row]


# weights -----------------------------------------------------------------

def test_time_weight_newest_is_one():
    assert instance_weight(WeighingScheme(Scheme.TIME), 4, 4) == 1.0


def test_time2_weight():
    assert instance_weight(WeighingScheme(Scheme.TIME2), 1, 4) == pytest.approx(1 / 16, abs=1e-15)


def test_simi_weight():
    w = instance_weight(WeighingScheme(Scheme.SIMI, {2, 3}), 1, 1, {1, 2})
    assert w == pytest.approx(1 / 3, abs=1e-15)
    w2 = instance_weight(WeighingScheme(Scheme.SIMI2, {2, 3}), 1, 1, {1, 2})
    assert w2 == pytest.approx(1 / 9, abs=1e-15)


def test_unif_weight_and_bad_position():
    assert instance_weight(WeighingScheme(), 3, 7) == 1.0
    with pytest.raises(ValueError):
        instance_weight(WeighingScheme(), 0, 3)


def test_simi_without_reference_fails():
    with pytest.raises(ValueError):
        instance_weight(WeighingScheme(Scheme.SIMI), 1, 2, {1})


@pytest.mark.parametrize("a,b,expected", [
    ({1, 2}, {1, 2}, 1.0), ({1}, {2}, 0.0), ({1, 2, 3}, {2, 3, 4}, 0.5)])
def test_jaccard(a, b, expected):
    assert jaccard(a, b) == expected


def test_jaccard_empty():
    with pytest.raises(ValueError):
        jaccard(set(), set())


@given(st.sets(st.integers(1, 9), min_size=1), st.sets(st.integers(1, 9), min_size=1))
def test_jaccard_bounds_and_symmetry(a, b):
    j = jaccard(a, b)
    assert 0.0 <= j <= 1.0
    assert j == jaccard(b, a)


# frequency ---------------------------------------------------------------

def test_frequency_single_plan():
    f = build_frequency([RoutingPlan.of([[1, 2]])]).values
    expected = np.zeros((3, 3))
    expected[0, 1] = expected[1, 2] = expected[2, 0] = 1
    assert np.array_equal(f, expected)


def test_frequency_is_additive():
    p = RoutingPlan.of([[1, 2]])
    f = build_frequency([p, p]).values
    assert f[0, 1] == f[1, 2] == f[2, 0] == 2
    assert f.sum() == 6


def test_frequency_time_weights():
    p = RoutingPlan.of([[1, 2]])
    f = build_frequency([p, p], WeighingScheme(Scheme.TIME)).values
    for i, j in [(0, 1), (1, 2), (2, 0)]:
        assert abs(f[i, j] - 1.5) < 1e-12


def test_frequency_unregistered_stop():
    with pytest.raises(KeyError, match="stop 5"):
        build_frequency([RoutingPlan.of([[1, 5]])], stops=(0, 1, 2))


@given(st.lists(plans(max_customers=6), min_size=1, max_size=5))
def test_time_and_unif_agree_on_single_newest(history):
    f_unif = build_frequency(history[-1:]).values
    f_time = build_frequency(history[-1:], WeighingScheme(Scheme.TIME), stops=range(7)).values
    f_unif_full = build_frequency(history[-1:], stops=range(7)).values
    assert np.array_equal(f_time, f_unif_full)
    assert f_unif.sum() == f_unif_full.sum()


@given(st.lists(plans(max_customers=6), min_size=1, max_size=5))
def test_simi_with_identical_sets_equals_unif(history):
    stops = tuple(range(7))
    same = [p for p in history if p.stop_set == history[0].stop_set]
    ref = history[0].stop_set
    f_simi = build_frequency(same, WeighingScheme(Scheme.SIMI, ref), stops).values
    f_unif = build_frequency(same, WeighingScheme(), stops).values
    assert np.allclose(f_simi, f_unif, atol=1e-12)


@given(st.lists(plans(max_customers=5), min_size=1, max_size=4),
       st.lists(plans(max_customers=5), min_size=1, max_size=4))
def test_unif_frequency_is_linear_in_history(a, b):
    stops = tuple(range(6))
    fa = build_frequency(a, stops=stops).values
    fb = build_frequency(b, stops=stops).values
    assert np.array_equal(build_frequency(a + b, stops=stops).values, fa + fb)


# smoothing ---------------------------------------------------------------

def test_zero_row_alpha_one_is_exactly_uniform():
    t = smooth_normalize(FrequencyMatrix(np.zeros((5, 5)), tuple(range(5))), alpha=1.0)
    assert np.all(t.values == 1 / 5)


def test_row_without_smoothing():
    f = np.zeros((4, 4))
    f[0] = [0, 3, 1, 0]
    t = smooth_normalize(FrequencyMatrix(f, tuple(range(4))), alpha=0.0).values
    assert np.allclose(t[0], [0, 0.75, 0.25, 0], atol=1e-12, rtol=0)


def test_row_with_unit_smoothing_matches_rational_oracle():
    f = np.zeros((4, 4))
    f[0] = [0, 3, 1, 0]
    t = smooth_normalize(FrequencyMatrix(f, tuple(range(4))), alpha=1.0).values
    exact = fraction_smooth([0, 3, 1, 0], 1, 4)
    assert exact == [Fraction(1, 8), Fraction(4, 8), Fraction(2, 8), Fraction(1, 8)]
    assert np.allclose(t[0], [float(x) for x in exact], atol=1e-12, rtol=0)


def test_negative_alpha_rejected():
    with pytest.raises(ValueError):
        smooth_normalize(FrequencyMatrix(np.zeros((2, 2)), (0, 1)), alpha=-0.5)


def test_excluding_diagonal_zeroes_it():
    f = np.zeros((3, 3))
    f[0, 1] = 2
    t = smooth_normalize(FrequencyMatrix(f, (0, 1, 2)), 1.0, count_diagonal=False).values
    assert np.all(np.diag(t) == 0)
    assert np.allclose(t[0], [0, 3 / 4, 1 / 4])
    assert np.allclose(t[1], [0.5, 0, 0.5])


freq_matrices = st.integers(2, 7).flatmap(
    lambda n: arrays(float, (n, n), elements=st.sampled_from([0.0, 0.25, 1.0, 2.0, 3.0])))


@given(freq_matrices, st.sampled_from([0.5, 1.0, 2.0]))
def test_smoothed_rows_sum_to_one(f, alpha):
    t = smooth_normalize(FrequencyMatrix(f, tuple(range(len(f)))), alpha).values
    assert np.all(np.abs(t.sum(axis=1) - 1) <= 1e-9)
    assert np.all(t > 0)
    for i in np.flatnonzero(f.sum(axis=1) == 0):
        assert np.all(t[i] == 1 / len(f))


@given(freq_matrices, st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_smoothing_pulls_towards_uniform(f, a1, a2):
    lo, hi = sorted((a1, a2))
    stops = tuple(range(len(f)))
    t_lo = smooth_normalize(FrequencyMatrix(f, stops), lo).values
    t_hi = smooth_normalize(FrequencyMatrix(f, stops), hi).values
    u = 1 / len(f)
    live = f.sum(axis=1) > 0
    assert np.all(np.abs(t_hi - u)[live] <= np.abs(t_lo - u)[live] + 1e-12)


@given(st.lists(plans(max_customers=5), min_size=1, max_size=4))
def test_transition_rows_are_stochastic(history):
    t = build_transition(history, alpha=0.0).values
    assert np.allclose(t.sum(axis=1), 1.0, atol=1e-12)


# distance probabilities and blend ---------------------------------------

def test_distance_probability_row():
    c = np.array([[0, 2, 8], [2, 0, 1], [8, 1, 0]], dtype=float)
    d = distance_probabilities(CostMatrix(c, (0, 1, 2))).values
    # c' = [-, 10/2, 10/8] = [-, 5, 1.25] -> [0, 0.8, 0.2]
    assert np.allclose(d[0], [0, 0.8, 0.2], atol=1e-12, rtol=0)


def test_distance_probabilities_equidistant_and_two_customers():
    c = np.ones((4, 4)) - np.eye(4)
    d = distance_probabilities(CostMatrix(c, tuple(range(4)))).values
    assert np.allclose(d, (np.ones((4, 4)) - np.eye(4)) / 3)
    d2 = distance_probabilities(CostMatrix(np.array([[0, 3.0], [5.0, 0]]), (0, 1))).values
    assert np.array_equal(d2, [[0, 1], [1, 0]])


def test_distance_probabilities_reject_zero_cost():
    c = np.array([[0, 0, 1], [1, 0, 1], [1, 1, 0]], dtype=float)
    with pytest.raises(ValueError):
        distance_probabilities(CostMatrix(c, (0, 1, 2)))


def test_blend_endpoints_and_midpoint():
    t = TransitionMatrix(np.array([[0.4, 0.6], [0.5, 0.5]]), (0, 1))
    d = distance_probabilities(CostMatrix(np.array([[0, 1.0], [1.0, 0]]), (0, 1)))
    d = type(d)(np.array([[0.8, 0.2], [0.0, 1.0]]), (0, 1))
    assert np.array_equal(blend(t, d, 1.0).values, t.values)
    assert np.array_equal(blend(t, d, 0.0).values, d.values)
    assert blend(t, d, 0.5).values[0, 1] == pytest.approx(0.4, abs=1e-15)
    with pytest.raises(ValueError):
        blend(t, d, 1.5)


# cost transform ----------------------------------------------------------

def test_cost_transform_values():
    t = TransitionMatrix(np.array([[0.0, 1.0, 0.0], [0.5, 0.0, 0.5], [0.25, 0.75, 0.0]]), (0, 1, 2))
    c = to_cost_matrix(t).values
    assert c[0, 1] == 0.0 and not math.copysign(1, c[0, 1]) < 0
    assert c[0, 2] == FORBIDDEN
    assert c[1, 0] == pytest.approx(math.log(2))
    assert np.all(np.diag(c) == FORBIDDEN)


def test_cost_ranking_matches_likelihood_ranking():
    rng = np.random.default_rng(3)
    p = rng.uniform(0.05, 1.0, size=(4, 4))
    p /= p.sum(axis=1, keepdims=True)
    t = TransitionMatrix(p, (0, 1, 2, 3))
    c = to_cost_matrix(t).values
    rows = []
    for m in (1, 2, 3):
        for routes in all_routings([1, 2, 3], m):
            prob = 1.0
            cost = 0.0
            for r in routes:
                path = [0, *r, 0]
                for a, b in zip(path, path[1:]):
                    prob *= p[a, b]
                    cost += c[a, b]
            rows.append((prob, cost))
    by_prob = sorted(range(len(rows)), key=lambda k: -rows[k][0])
    by_cost = sorted(range(len(rows)), key=lambda k: rows[k][1])
    assert [rows[k][0] for k in by_prob] == pytest.approx([rows[k][0] for k in by_cost], rel=1e-12)
    for prob, cost in rows:
        assert cost == pytest.approx(-math.log(prob), rel=1e-12)


def test_forbidden_penalty_exceeds_any_allowed_plan():
    c = np.array([[0, 1.0, np.inf], [2.0, 0, 3.0], [np.inf, 0.5, 0]])
    pen = forbidden_penalty(c, 2, 1)
    assert pen == (1 + 3.0) * 3
