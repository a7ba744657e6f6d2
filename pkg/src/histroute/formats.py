"""On-disk formats: plan logs, cost matrices, learned matrices, records and summaries.

Plan log (JSON lines). The first line is a header::

    {"format": "histroute.plans", "version": 1, "depot": "DEPOT",
     "stops": ["S01", ...], "capacity": 12.0, "demands": {"S01": 2.0, ...}}

``stops`` fixes the index order of the universe; ``capacity``/``demands`` are
optional. Every further line is one plan::

    {"date": "2018-01-01", "weekday": 1, "routes": [["S03", "S01"], ["S02"]]}

Square matrices (costs and learned matrices) are CSV with a ``#`` header
line naming the format, a column header of stop ids, then one labelled row
per stop. Values are written with 17 significant digits; forbidden arcs as
``inf``::

    # histroute.costs v1
    stop,DEPOT,S01,S02
    DEPOT,0,12.5,7.25
    ...

Records CSV columns: ``test_day, weekday, scheme, alpha, beta, rd, ad,
status, solve_time_s``. ``alpha``/``beta`` are empty for the DIST baseline
and ``solve_time_s`` is empty unless timing output was requested, so
repeated runs produce identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .evaluation import EvaluationRecord
from .learner import CostMatrix, TransitionMatrix
from .model import DEPOT, InstanceStream, RoutingPlan, StopUniverse, validate_plan

PLANS_FORMAT = "histroute.plans"
COSTS_FORMAT = "histroute.costs"
MATRIX_FORMAT = "histroute.matrix"
SUMMARY_FORMAT = "histroute.summary"
FORMAT_VERSION = 1

RECORD_FIELDS = ("test_day", "weekday", "scheme", "alpha", "beta", "rd", "ad", "status",
                 "solve_time_s")
_PLAN_FIELDS = {"date", "weekday", "routes"}
_HEADER_FIELDS = {"format", "version", "depot", "stops", "capacity", "demands"}


class DataWarning(UserWarning):
    pass


class PlanFormatError(ValueError):
    pass


# plan logs ------------------------------------------------------------------

def _plan_record(plan: RoutingPlan, universe: StopUniverse) -> dict:
    return {"date": plan.date, "weekday": plan.weekday,
            "routes": [[universe.id_of(s) for s in r] for r in plan.routes]}


def dumps_plans(stream: InstanceStream) -> str:
    u = stream.universe
    header = {"format": PLANS_FORMAT, "version": FORMAT_VERSION, "depot": u.depot,
              "stops": list(u.ids[1:])}
    if stream.capacity is not None:
        header["capacity"] = stream.capacity
    if stream.demands is not None:
        header["demands"] = {u.id_of(s): q for s, q in sorted(stream.demands.items())}
    lines = [json.dumps(header)]
    lines += [json.dumps(_plan_record(p, u)) for p in stream]
    return "\n".join(lines) + "\n"


def save_plans(stream: InstanceStream, path) -> None:
    Path(path).write_text(dumps_plans(stream))


def loads_plans(text: str, source: str = "<plans>") -> InstanceStream:
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise PlanFormatError(f"{source}:{lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(obj, dict):
            raise PlanFormatError(f"{source}:{lineno}: expected a JSON object")
        rows.append((lineno, obj))
    if not rows:
        raise PlanFormatError(f"{source}: empty plan log")

    header = {}
    if "format" in rows[0][1]:
        lineno, header = rows.pop(0)
        if header["format"] != PLANS_FORMAT:
            raise PlanFormatError(f"{source}:{lineno}: not a plan log ({header['format']!r})")
        if header.get("version", FORMAT_VERSION) > FORMAT_VERSION:
            raise PlanFormatError(f"{source}:{lineno}: unsupported version {header['version']}")
        extra = set(header) - _HEADER_FIELDS
        if extra:
            warnings.warn(f"{source}:{lineno}: ignoring unknown header fields {sorted(extra)}",
                          DataWarning, stacklevel=2)
    depot = header.get("depot", "DEPOT")
    universe = StopUniverse.from_ids(depot, header.get("stops", []))

    plans = []
    for lineno, obj in rows:
        extra = set(obj) - _PLAN_FIELDS
        if extra:
            warnings.warn(f"{source}:{lineno}: ignoring unknown fields {sorted(extra)}",
                          DataWarning, stacklevel=2)
        try:
            routes = obj["routes"]
            date = obj.get("date")
            weekday = obj.get("weekday")
        except (KeyError, TypeError):
            raise PlanFormatError(f"{source}:{lineno}: record needs 'routes'") from None
        if weekday is not None and not (isinstance(weekday, int) and 1 <= weekday <= 7):
            raise PlanFormatError(f"{source}:{lineno}: weekday must be an integer 1-7")
        if not isinstance(routes, list) or not all(isinstance(r, list) for r in routes):
            raise PlanFormatError(f"{source}:{lineno}: 'routes' must be a list of lists")
        seen = set()
        for r in routes:
            for sid in r:
                if not isinstance(sid, str):
                    raise PlanFormatError(f"{source}:{lineno}: stop ids must be strings, got {sid!r}")
                if sid == depot:
                    raise PlanFormatError(f"{source}:{lineno}: depot {sid!r} inside a route")
                if sid in seen:
                    raise PlanFormatError(f"{source}:{lineno}: stop {sid!r} appears more than once")
                seen.add(sid)
        universe = universe.extend(sid for r in routes for sid in r)
        plan = RoutingPlan.of([[universe.index(s) for s in r] for r in routes], date, weekday)
        problems = validate_plan(plan, universe)
        if problems:
            raise PlanFormatError(f"{source}:{lineno}: {'; '.join(problems)}")
        plans.append(plan)

    dates = [p.date for p in plans]
    if None not in dates and any(b < a for a, b in zip(dates, dates[1:])):
        warnings.warn(f"{source}: plans are not in chronological order; re-sorting by date",
                      DataWarning, stacklevel=2)
        plans.sort(key=lambda p: p.date)

    demands = None
    if "demands" in header:
        universe = universe.extend(header["demands"])
        demands = {universe.index(sid): float(q) for sid, q in header["demands"].items()}
    capacity = header.get("capacity")
    return InstanceStream(tuple(plans), universe, demands,
                          None if capacity is None else float(capacity))


def load_plans(path) -> InstanceStream:
    """Read a plan log into a chronologically sorted stream."""
    path = Path(path)
    return loads_plans(path.read_text(), str(path))


# square matrices ------------------------------------------------------------

def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _dump_square(kind: str, meta: dict, ids: Sequence[str], values: np.ndarray) -> str:
    buf = io.StringIO()
    extras = "".join(f" {k}={v}" for k, v in meta.items())
    buf.write(f"# {kind} v{FORMAT_VERSION}{extras}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["stop", *ids])
    for sid, row in zip(ids, values):
        w.writerow([sid, *(_fmt(float(x)) for x in row)])
    return buf.getvalue()


def _load_square(text: str, kind: str, source: str):
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{source}: missing '# {kind}' header line")
    head = lines[0][1:].split()
    if not head or head[0] != kind:
        raise ValueError(f"{source}: expected a {kind} file, found {lines[0]!r}")
    if len(head) < 2 or head[1] != f"v{FORMAT_VERSION}":
        raise ValueError(f"{source}: unsupported version in {lines[0]!r}")
    meta = dict(item.split("=", 1) for item in head[2:])
    reader = list(csv.reader(lines[1:]))
    if not reader or reader[0][:1] != ["stop"]:
        raise ValueError(f"{source}: missing stop-id header row")
    ids = reader[0][1:]
    rows = [r for r in reader[1:] if r]
    if len(rows) != len(ids):
        raise ValueError(f"{source}: {len(ids)} columns but {len(rows)} rows")
    values = np.empty((len(ids), len(ids)))
    for i, row in enumerate(rows):
        if row[0] != ids[i] or len(row) != len(ids) + 1:
            raise ValueError(f"{source}: row {i + 1} does not match the header")
        try:
            values[i] = [float(x) for x in row[1:]]
        except ValueError:
            raise ValueError(f"{source}: non-numeric value in row {row[0]!r}") from None
    return meta, ids, values


def _labels(ids: Sequence[str], universe: StopUniverse | None):
    if universe is None:
        universe = StopUniverse.from_ids(ids[0], ids[1:])
    elif ids[0] != universe.depot:
        raise ValueError(f"matrix depot {ids[0]!r} differs from universe depot {universe.depot!r}")
    else:
        universe = universe.extend(ids)
    return [universe.index(s) for s in ids], universe


def _reorder(labels: list[int], values: np.ndarray):
    order = sorted(range(len(labels)), key=lambda i: (labels[i] != DEPOT, labels[i]))
    return tuple(labels[i] for i in order), values[np.ix_(order, order)]


def dumps_costs(costs: CostMatrix, universe: StopUniverse) -> str:
    return _dump_square(COSTS_FORMAT, {}, [universe.id_of(s) for s in costs.stops], costs.values)


def save_costs(costs: CostMatrix, universe: StopUniverse, path) -> None:
    Path(path).write_text(dumps_costs(costs, universe))


def loads_costs(text: str, universe: StopUniverse | None = None, source: str = "<costs>"):
    _, ids, values = _load_square(text, COSTS_FORMAT, source)
    if not np.all(np.isfinite(values)) or np.any(values < 0):
        raise ValueError(f"{source}: costs must be finite and non-negative")
    if np.any(np.diag(values) != 0):
        raise ValueError(f"{source}: cost diagonal must be zero")
    labels, universe = _labels(ids, universe)
    stops, values = _reorder(labels, values)
    return CostMatrix(values, stops), universe


def load_costs(path, universe: StopUniverse | None = None) -> tuple[CostMatrix, StopUniverse]:
    path = Path(path)
    return loads_costs(path.read_text(), universe, str(path))


def dumps_matrix(t: TransitionMatrix, universe: StopUniverse) -> str:
    return _dump_square(MATRIX_FORMAT, {"kind": "transition", "alpha": _fmt(t.alpha)},
                        [universe.id_of(s) for s in t.stops], t.values)


def save_matrix(t: TransitionMatrix, universe: StopUniverse, path) -> None:
    Path(path).write_text(dumps_matrix(t, universe))


def loads_matrix(text: str, universe: StopUniverse | None = None, source: str = "<matrix>"):
    meta, ids, values = _load_square(text, MATRIX_FORMAT, source)
    if np.any(values < 0) or np.any(values > 1) or not np.all(np.isfinite(values)):
        raise ValueError(f"{source}: probabilities must lie in [0, 1]")
    labels, universe = _labels(ids, universe)
    stops, values = _reorder(labels, values)
    return TransitionMatrix(values, stops, float(meta.get("alpha", 0.0))), universe


def load_matrix(path, universe: StopUniverse | None = None) -> tuple[TransitionMatrix, StopUniverse]:
    path = Path(path)
    return loads_matrix(path.read_text(), universe, str(path))


# records and summaries ------------------------------------------------------

def _opt(x) -> str:
    return "" if x is None else repr(x)


def dumps_records(records: Iterable[EvaluationRecord], timing: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_FIELDS)
    for r in records:
        w.writerow([r.test_day or "", _opt(r.weekday), r.scheme, _opt(r.alpha), _opt(r.beta),
                    r.rd, r.ad, r.status, f"{r.solve_time:.6f}" if timing else ""])
    return buf.getvalue()


def save_records(records: Iterable[EvaluationRecord], path, timing: bool = False) -> None:
    Path(path).write_text(dumps_records(records, timing))


def loads_records(text: str) -> list[EvaluationRecord]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(EvaluationRecord(
            row["test_day"] or None,
            int(row["weekday"]) if row["weekday"] else None,
            row["scheme"],
            float(row["alpha"]) if row["alpha"] else None,
            float(row["beta"]) if row["beta"] else None,
            int(row["rd"]), int(row["ad"]), row["status"],
            float(row["solve_time_s"]) if row["solve_time_s"] else math.nan))
    return out


def dumps_summary(summary: dict, timing: bool = False, **meta) -> str:
    """Summary JSON; wall-clock fields are dropped unless ``timing`` so reruns match."""
    if not timing:
        summary = {k: {f: v for f, v in st.items() if f != "mean_solve_time_s"}
                   for k, st in summary.items()}
    doc = {"format": SUMMARY_FORMAT, "version": FORMAT_VERSION, **meta, "schemes": summary}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
