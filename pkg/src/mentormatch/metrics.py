"""Scores of a solution: the seven objective-aligned measures and five evaluation measures."""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from dataclasses import asdict, dataclass, fields
from typing import Any, Iterable, Mapping, Sequence

from mentormatch.config import PolicyConfig
from mentormatch.model import Instance, Solution, validate_solution
from mentormatch.weights import activity_weight, coherence_from_metrics, preference_weight, social_weight

MEASURES = (
    "number_students",
    "number_pairs_groups",
    "volume",
    "preference",
    "group_connection",
    "social",
    "mentor_pairs",
    "solo_time",
    "group_time",
    "solo_number",
    "group_number",
    "mentor_capacity_used",
)


class InfeasibleSolutionError(ValueError):
    pass


@dataclass(frozen=True)
class MeasureVector:
    number_students: float = 0.0
    number_pairs_groups: float = 0.0
    volume: float = 0.0
    preference: float = 0.0
    group_connection: float = 0.0
    social: float = 0.0
    mentor_pairs: float = 0.0
    solo_time: float = 0.0
    group_time: float = 0.0
    solo_number: float = 0.0
    group_number: float = 0.0
    mentor_capacity_used: float = 0.0

    def as_dict(self) -> dict[str, float]:
        return asdict(self)

    def __add__(self, other: "MeasureVector") -> "MeasureVector":
        return MeasureVector(**{f.name: getattr(self, f.name) + getattr(other, f.name) for f in fields(self)})

    def dominates(self, other: "MeasureVector") -> bool:
        """Componentwise >=, for trend checks."""
        return all(getattr(self, f.name) >= getattr(other, f.name) for f in fields(self))


def _require_feasible(instance: Instance, solution: Solution) -> None:
    report = validate_solution(instance, solution)
    if not report.feasible:
        raise InfeasibleSolutionError(str(report))


def evaluate(
    instance: Instance,
    solution: Solution,
    config: PolicyConfig | None = None,
    discount_groups: bool = True,
) -> MeasureVector:
    """All twelve measures of a feasible solution.

    Preference and social scores add the activity weight once per pair and
    once per group member; with ``discount_groups`` the member terms are scaled
    by the group weight, like their objective coefficients.
    """
    config = config or instance.config
    _require_feasible(instance, solution)
    wg = config.group_weight
    member_factor = wg if discount_groups else 1.0

    def prefs(a) -> float:
        s, m = instance.student(a.student_id), instance.mentor(a.mentor_id)
        return preference_weight(s, m, a.subject, config.preference_variant)

    def social(a) -> float:
        return social_weight(instance.student(a.student_id), instance.mentor(a.mentor_id), a.subject)

    members = [a for a, _ in solution.group_assignments]
    solo_time = float(sum(solution.pairs.values()))
    group_time = float(sum(solution.group_assignments.values()))
    connection = 0.0
    for g in solution.groups:
        group_members = solution.members(g)
        for n, a in enumerate(group_members):
            for b in group_members[n + 1 :]:
                connection += coherence_from_metrics(instance.pair(a.student_id, b.student_id), g.subject)
    return MeasureVector(
        number_students=float(len(solution.matched_students())),
        number_pairs_groups=len(solution.pairs) + wg * len(members),
        volume=solo_time + wg * group_time,
        preference=sum(prefs(a) for a in solution.pairs) + member_factor * sum(prefs(a) for a in members),
        group_connection=connection,
        social=sum(social(a) for a in solution.pairs) + member_factor * sum(social(a) for a in members),
        mentor_pairs=float(len({(a.student_id, a.mentor_id) for a in solution.pairs})),
        solo_time=solo_time,
        group_time=group_time,
        solo_number=float(len(solution.pairs)),
        group_number=float(len(solution.groups)),
        mentor_capacity_used=float(sum(solution.mentor_hours().values())),
    )


def objective_value(
    instance: Instance,
    solution: Solution,
    config: PolicyConfig | None = None,
    run_day: int | None = None,
) -> float:
    """Objective of a feasible solution, recomputed from the weights without the model."""
    config = config or instance.config
    _require_feasible(instance, solution)
    terms = []
    for a, hours in solution.pairs.items():
        w = activity_weight(instance.student(a.student_id), instance.mentor(a.mentor_id), a.subject, config, run_day)
        terms.append(w * hours)
    for (a, _), hours in solution.group_assignments.items():
        w = activity_weight(instance.student(a.student_id), instance.mentor(a.mentor_id), a.subject, config, run_day)
        terms.append(w * config.group_weight * hours)
    for g in solution.groups:
        group_members = solution.members(g)
        for n, a in enumerate(group_members):
            for b in group_members[n + 1 :]:
                terms.append(coherence_from_metrics(instance.pair(a.student_id, b.student_id), g.subject))
    terms.append(-config.mentor_pair_weight * len({(a.student_id, a.mentor_id) for a in solution.pairs}))
    return math.fsum(terms)


# ---------------------------------------------------------------------------
# aggregation


def _median(values: Sequence[float]) -> float:
    return float(statistics.median(values))


def quartiles(values: Sequence[float]) -> tuple[float, float, float]:
    """Q1, median, Q3: quartiles are medians of the halves below and above the median, which itself is left out."""
    data = sorted(values)
    n = len(data)
    if n == 0:
        raise ValueError("no data")
    if n == 1:
        return data[0], data[0], data[0]
    lower, upper = data[: n // 2], data[(n + 1) // 2 :]
    return _median(lower), _median(data), _median(upper)


def summarize(values: Sequence[float]) -> dict[str, float]:
    q1, med, q3 = quartiles(values)
    return {
        "mean": math.fsum(values) / len(values),
        "median": med,
        "q1": q1,
        "q3": q3,
        "min": float(min(values)),
        "max": float(max(values)),
    }


STATS = ("mean", "median", "q1", "q3", "min", "max")


def aggregate(
    rows: Iterable[Mapping[str, Any]],
    by: Sequence[str],
    measures: Sequence[str] = MEASURES,
) -> list[dict[str, Any]]:
    """Per-cell summary statistics of every measure.

    ``rows`` are flat records holding the ``by`` keys and the measures; the
    output has one record per distinct ``by`` combination, sorted by it, with
    ``<measure>_<stat>`` columns and the cell size ``n``.
    """
    cells: dict[tuple, list[Mapping[str, Any]]] = {}
    for row in rows:
        cells.setdefault(tuple(row[k] for k in by), []).append(row)
    if not cells:
        raise ValueError("nothing to aggregate")
    out = []
    for key in sorted(cells, key=lambda k: tuple((v is None, str(type(v)), v) for v in k)):
        members = cells[key]
        record: dict[str, Any] = dict(zip(by, key))
        record["n"] = len(members)
        for m in measures:
            for stat, value in summarize([float(r[m]) for r in members]).items():
                record[f"{m}_{stat}"] = value
        out.append(record)
    return out


def to_long(records: Iterable[Mapping[str, Any]], id_keys: Sequence[str], measures: Sequence[str] = MEASURES) -> list[dict[str, Any]]:
    """Tidy form: one row per (record, measure)."""
    out = []
    for r in records:
        for m in measures:
            row = {k: r[k] for k in id_keys}
            row["measure"] = m
            row["value"] = r[m]
            out.append(row)
    return out


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return repr(round(value, 10))
    if value is None:
        return ""
    return str(value)


def csv_text(records: Sequence[Mapping[str, Any]], columns: Sequence[str] | None = None, meta: Mapping[str, Any] | None = None) -> str:
    """CSV with an optional ``# meta:`` JSON comment line; floats printed reproducibly."""
    buffer = io.StringIO()
    if meta is not None:
        buffer.write("# meta: " + json.dumps(meta, sort_keys=True) + "\n")
    columns = list(columns or (records[0].keys() if records else []))
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for r in records:
        writer.writerow([_cell(r.get(c)) for c in columns])
    return buffer.getvalue()
