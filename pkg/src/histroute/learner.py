"""Learning transition-probability matrices from historical routing plans.

Matrices are dense numpy arrays whose rows and columns are labelled by stop
indices of a :class:`~histroute.model.StopUniverse` (``stops[0]`` is always the
depot). A matrix may cover only part of the universe, e.g. the stops seen in a
training window plus those of the day being predicted.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import DEPOT, InstanceStream, RoutingPlan, arcs_of

FORBIDDEN = math.inf


class Scheme(str, enum.Enum):
    UNIF = "UNIF"
    TIME = "TIME"
    TIME2 = "TIME2"
    SIMI = "SIMI"
    SIMI2 = "SIMI2"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class WeighingScheme:
    kind: Scheme = Scheme.UNIF
    reference_stop_set: frozenset[int] | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Scheme(self.kind))
        if self.reference_stop_set is not None:
            object.__setattr__(self, "reference_stop_set", frozenset(self.reference_stop_set))

    @property
    def needs_reference(self) -> bool:
        return self.kind in (Scheme.SIMI, Scheme.SIMI2)


class _Labelled:
    values: np.ndarray
    stops: tuple[int, ...]

    def positions(self, stops: Iterable[int]) -> list[int]:
        pos = {s: i for i, s in enumerate(self.stops)}
        try:
            return [pos[s] for s in stops]
        except KeyError as exc:
            raise KeyError(f"stop {exc.args[0]} is not covered by this matrix") from None

    def _restricted_values(self, stops: Sequence[int]) -> np.ndarray:
        idx = self.positions(stops)
        return self.values[np.ix_(idx, idx)]


def _check_square(values: np.ndarray, stops: Sequence[int]):
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ValueError(f"matrix must be square, got shape {values.shape}")
    if values.shape[0] != len(stops):
        raise ValueError("matrix size does not match its stop labels")
    if not stops or stops[0] != DEPOT:
        raise ValueError("first matrix label must be the depot")


@dataclass(frozen=True, eq=False)
class FrequencyMatrix(_Labelled):
    values: np.ndarray
    stops: tuple[int, ...]

    def __post_init__(self):
        _check_square(self.values, self.stops)


@dataclass(frozen=True, eq=False)
class TransitionMatrix(_Labelled):
    values: np.ndarray
    stops: tuple[int, ...]
    alpha: float = 0.0

    def __post_init__(self):
        _check_square(self.values, self.stops)

    def restricted(self, stops: Sequence[int]) -> "TransitionMatrix":
        return TransitionMatrix(self._restricted_values(stops), tuple(stops), self.alpha)


@dataclass(frozen=True, eq=False)
class DistanceProbabilityMatrix(_Labelled):
    values: np.ndarray
    stops: tuple[int, ...]

    def __post_init__(self):
        _check_square(self.values, self.stops)


@dataclass(frozen=True, eq=False)
class CostMatrix(_Labelled):
    """Arc costs; ``inf`` marks a forbidden arc."""

    values: np.ndarray
    stops: tuple[int, ...]

    def __post_init__(self):
        _check_square(self.values, self.stops)

    def restricted(self, stops: Sequence[int]) -> "CostMatrix":
        return CostMatrix(self._restricted_values(stops), tuple(stops))


def jaccard(a: Iterable[int], b: Iterable[int]) -> float:
    a, b = set(a), set(b)
    union = a | b
    if not union:
        raise ValueError("Jaccard similarity is undefined for two empty sets")
    return len(a & b) / len(union)


def instance_weight(scheme: WeighingScheme, k: int, n: int,
                    instance_stop_set: Iterable[int] = ()) -> float:
    """Weight of the ``k``-th (1-based, oldest first) of ``n`` training instances."""
    if not 1 <= k <= n:
        raise ValueError(f"position k={k} outside 1..{n}")
    kind = scheme.kind
    if kind is Scheme.UNIF:
        return 1.0
    if kind is Scheme.TIME:
        return k / n
    if kind is Scheme.TIME2:
        return (k / n) ** 2
    ref = scheme.reference_stop_set
    if not ref:
        raise ValueError(f"{kind} weighing needs a non-empty reference stop set")
    stops = set(instance_stop_set)
    if not stops:
        raise ValueError(f"{kind} weighing needs a non-empty instance stop set")
    j = jaccard(stops, ref)
    return j if kind is Scheme.SIMI else j * j


def default_stops(stream: InstanceStream, extra: Iterable[int] = ()) -> tuple[int, ...]:
    """Depot followed by every stop visited in ``stream`` or listed in ``extra``, ascending."""
    seen = set(extra)
    for plan in stream:
        seen |= plan.stop_set
    seen.discard(DEPOT)
    return (DEPOT, *sorted(seen))


def build_frequency(stream: InstanceStream | Sequence[RoutingPlan],
                    scheme: WeighingScheme = WeighingScheme(),
                    stops: Sequence[int] | None = None) -> FrequencyMatrix:
    """Weighted arc counts ``F = sum_k w_k A^k`` over the plans of ``stream``.

    Accumulation is strictly left to right in stream order.
    """
    plans = list(stream)
    if stops is None:
        stops = default_stops(plans)
    stops = tuple(stops)
    pos = {s: i for i, s in enumerate(stops)}
    if stops[0] != DEPOT:
        raise ValueError("first matrix label must be the depot")
    f = np.zeros((len(stops), len(stops)))
    n = len(plans)
    for k, plan in enumerate(plans, start=1):
        w = instance_weight(scheme, k, n, plan.stop_set)
        for s in plan.stop_set:
            if s not in pos:
                raise KeyError(f"stop {s} (plan {plan.date}) is not registered in the matrix stops")
        for a, b in sorted(arcs_of(plan)):
            f[pos[a], pos[b]] += w
    return FrequencyMatrix(f, stops)


def smooth_normalize(freq: FrequencyMatrix, alpha: float = 1.0,
                     count_diagonal: bool = True) -> TransitionMatrix:
    """Laplace-smoothed row normalisation ``(f_ij + a) / (N_i + a d)``.

    With ``count_diagonal`` (the default) ``d`` is the full row length and the
    self-transition keeps its smoothed mass, so every row sums to one; costs
    derived from it never allow self-arcs anyway. Otherwise ``d`` excludes the
    diagonal, which is set to zero.

    Rows without history and ``alpha == 0`` become uniform over the off-diagonal
    entries.
    """
    if alpha < 0 or not math.isfinite(alpha):
        raise ValueError(f"alpha must be a finite non-negative number, got {alpha}")
    f = np.array(freq.values, dtype=float)
    size = f.shape[0]
    off = ~np.eye(size, dtype=bool)
    d = size if count_diagonal else size - 1
    num = f + alpha
    if not count_diagonal:
        num[~off] = 0.0
    n_i = f.sum(axis=1)
    t = np.zeros_like(f)
    live = n_i > 0
    t[live] = num[live] / (n_i[live, None] + alpha * d)
    # rows without history are exactly uniform
    empty = ~live
    if empty.any():
        if count_diagonal and alpha > 0:
            t[empty] = 1.0 / size
        elif size > 1:
            t[empty] = np.where(off[empty], 1.0 / (size - 1), 0.0)
    return TransitionMatrix(t, freq.stops, float(alpha))


def build_transition(stream: InstanceStream | Sequence[RoutingPlan],
                     scheme: WeighingScheme = WeighingScheme(), alpha: float = 1.0,
                     stops: Sequence[int] | None = None,
                     count_diagonal: bool = True) -> TransitionMatrix:
    return smooth_normalize(build_frequency(stream, scheme, stops), alpha, count_diagonal)


def distance_probabilities(costs: CostMatrix) -> DistanceProbabilityMatrix:
    """Probabilities inversely proportional to arc cost within each row."""
    c = np.asarray(costs.values, dtype=float)
    size = c.shape[0]
    off = ~np.eye(size, dtype=bool)
    if size < 2:
        raise ValueError("need at least one customer")
    offdiag = c[off]
    if not np.all(np.isfinite(offdiag)) or np.any(offdiag <= 0):
        raise ValueError("distance probabilities need finite, strictly positive off-diagonal costs")
    safe = np.where(off, c, 1.0)
    row_total = np.where(off, c, 0.0).sum(axis=1, keepdims=True)
    rel = np.where(off, row_total / safe, 0.0)
    d = rel / rel.sum(axis=1, keepdims=True)
    return DistanceProbabilityMatrix(d, costs.stops)


def blend(t: TransitionMatrix, d: DistanceProbabilityMatrix, beta: float) -> TransitionMatrix:
    """Convex combination ``beta * t + (1 - beta) * d``; endpoints return exact copies."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    if t.values.shape != d.values.shape or tuple(t.stops) != tuple(d.stops):
        raise ValueError("transition and distance matrices cover different stops")
    if beta == 1.0:
        values = t.values.copy()
    elif beta == 0.0:
        values = d.values.copy()
    else:
        values = beta * t.values + (1.0 - beta) * d.values
    return TransitionMatrix(values, t.stops, t.alpha)


def to_cost_matrix(t: TransitionMatrix) -> CostMatrix:
    """``c_ij = -log t_ij``; zero-probability arcs and self-arcs become ``FORBIDDEN``."""
    p = np.asarray(t.values, dtype=float)
    c = np.full(p.shape, FORBIDDEN)
    pos = p > 0
    c[pos] = -np.log(p[pos])
    c[c == 0.0] = 0.0  # -log(1) gives -0.0
    np.fill_diagonal(c, FORBIDDEN)
    return CostMatrix(c, t.stops)


def forbidden_penalty(costs: np.ndarray, n_customers: int, fleet_size: int) -> float:
    """Cost that any plan using a forbidden arc exceeds any plan that avoids them."""
    c = np.asarray(costs, dtype=float)
    off = ~np.eye(c.shape[0], dtype=bool)
    finite = c[off & np.isfinite(c)]
    top = float(finite.max()) if finite.size else 0.0
    return (1.0 + top) * (n_customers + fleet_size)


def with_forbidden_penalty(costs: CostMatrix, fleet_size: int) -> CostMatrix:
    """Replace forbidden off-diagonal arcs with :func:`forbidden_penalty`.

    Every plan has exactly ``customers + routes`` arcs, so a plan built only
    from allowed arcs always costs less than the penalty; the minimum-cost plan
    is therefore unchanged whenever one avoiding forbidden arcs exists.
    """
    c = np.array(costs.values, dtype=float)
    size = c.shape[0]
    off = ~np.eye(size, dtype=bool)
    bad = off & ~np.isfinite(c)
    if bad.any():
        c[bad] = forbidden_penalty(c, size - 1, fleet_size)
    return CostMatrix(c, costs.stops)
