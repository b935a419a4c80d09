"""Dynamic batch matching: pools evolve over a horizon and are matched on fixed run days."""

from __future__ import annotations

import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

from mentormatch.config import PolicyConfig
from mentormatch.generator import GeneratorConfig, Timeline, TimelineConfig, generate_instance, generate_population
from mentormatch.metrics import MEASURES, MeasureVector, aggregate, evaluate
from mentormatch.model import Instance, Mentor, Solution, Student, build_instance, validate_solution
from mentormatch.solver import SolveLimits, solve_instance

log = logging.getLogger(__name__)

STUDENT_EXTENSION = 7
MENTOR_EXTENSION = 14

# simulations solve hundreds of small models; HiGHS keeps that affordable
DEFAULT_METHOD = "highs"


@dataclass(frozen=True)
class PoolState:
    """Everyone in a timeline with their remaining demand, capacity and current departure day.

    Students keep only unmet requests (original order, so ranks shift up as
    earlier subjects are satisfied); mentors carry their remaining weekly
    capacity in ``capacity_left`` because :class:`Mentor` refuses a zero
    capacity.
    """

    day: int
    students: tuple[Student | None, ...]
    mentors: tuple[Mentor, ...]
    capacity_left: tuple[int, ...]

    @classmethod
    def from_timeline(cls, timeline: Timeline) -> "PoolState":
        return cls(0, tuple(timeline.students), tuple(timeline.mentors), tuple(m.capacity for m in timeline.mentors))

    @staticmethod
    def _present(person: Student | Mentor, day: int) -> bool:
        departure = person.departure_day if person.departure_day is not None else math.inf
        return person.registration_day <= day < departure

    def active_students(self, day: int | None = None) -> list[Student]:
        day = self.day if day is None else day
        return [s for s in self.students if s is not None and self._present(s, day)]

    def active_mentors(self, day: int | None = None) -> list[Mentor]:
        day = self.day if day is None else day
        return [
            replace(m, capacity=q)
            for m, q in zip(self.mentors, self.capacity_left)
            if q >= 1 and self._present(m, day)
        ]

    def at(self, day: int) -> "PoolState":
        return replace(self, day=day)


@dataclass
class RunRecord:
    day: int
    n_students: int
    n_mentors: int
    status: str
    objective: float
    bound: float
    nodes: int
    measures: MeasureVector
    solution: Solution
    instance: Instance | None
    wall_time: float = 0.0

    def to_dict(self, with_time: bool = False) -> dict[str, Any]:
        record = {
            "day": self.day,
            "pool_students": self.n_students,
            "pool_mentors": self.n_mentors,
            "status": self.status,
            "objective": self.objective,
            "bound": self.bound,
            "nodes": self.nodes,
            "measures": self.measures.as_dict(),
            "solution": self.solution.to_dict(),
        }
        if with_time:
            record["wall_time"] = self.wall_time
        return record


@dataclass
class RunLog:
    frequency: int
    policy: PolicyConfig
    seed: int | None
    horizon: int
    records: list[RunRecord] = field(default_factory=list)

    @property
    def run_days(self) -> list[int]:
        return [r.day for r in self.records]

    def matched_students(self) -> set[str]:
        return set().union(*(r.solution.matched_students() for r in self.records)) if self.records else set()

    def totals(self) -> dict[str, float]:
        """Measures summed over runs; ``number_students`` counts distinct students matched at least once."""
        total = sum((r.measures for r in self.records), MeasureVector())
        out = total.as_dict()
        out["number_students"] = float(len(self.matched_students()))
        return out

    def to_jsonl(self, meta: Mapping[str, Any] | None = None, with_time: bool = False) -> str:
        lines = []
        if meta is not None:
            lines.append(json.dumps({"meta": meta}, sort_keys=True))
        lines.extend(json.dumps(r.to_dict(with_time), sort_keys=True) for r in self.records)
        return "\n".join(lines) + ("\n" if lines else "")


def run_days(horizon: int, frequency: int) -> list[int]:
    """Days f, 2f, ... up to the horizon: floor(H / f) runs, none when f > H."""
    if frequency < 1:
        raise ValueError("frequency must be at least 1")
    return list(range(frequency, horizon + 1, frequency))


def step(
    pool: PoolState,
    availability: Mapping[str, Iterable[int]] | None,
    config: PolicyConfig,
    limits: SolveLimits | None = None,
    method: str = DEFAULT_METHOD,
) -> tuple[RunRecord, PoolState]:
    """One matching run on ``pool.day``: solve over the active pool, then update demand, capacity and stays."""
    day = pool.day
    students = [s for s in pool.active_students() if s.requests]
    mentors = pool.active_mentors()
    instance = build_instance(students, mentors, availability, config)
    if not instance.activities:
        solution = Solution()
        record = RunRecord(day, len(students), len(mentors), "optimal", 0.0, 0.0, 0, MeasureVector(), solution, instance)
        return record, pool
    result, solution, _ = solve_instance(instance, limits, method=method, run_day=day, config=config)
    report = validate_solution(instance, solution)
    if not report.feasible:
        raise RuntimeError(f"day {day}: solver returned an infeasible matching\n{report}")
    record = RunRecord(
        day,
        len(students),
        len(mentors),
        result.status,
        result.objective,
        result.bound,
        result.nodes,
        evaluate(instance, solution, config),
        solution,
        instance,
        result.wall_time,
    )
    return record, apply_solution(pool, solution)


def apply_solution(pool: PoolState, solution: Solution) -> PoolState:
    """Remove matched subjects, consume mentor hours and extend the stays of everyone matched."""
    matched: dict[str, set] = {}
    for a in list(solution.pairs) + [a for a, _ in solution.group_assignments]:
        matched.setdefault(a.student_id, set()).add(a.subject)
    used = solution.mentor_hours()

    students: list[Student | None] = []
    for s in pool.students:
        if s is None or s.id not in matched:
            students.append(s)
            continue
        remaining = tuple(r for r in s.requests if r.subject not in matched[s.id])
        departure = s.departure_day + STUDENT_EXTENSION if s.departure_day is not None else None
        # a student with no demand left leaves the pool for good
        students.append(replace(s, requests=remaining, departure_day=departure) if remaining else None)

    mentors, capacity = [], []
    for m, q in zip(pool.mentors, pool.capacity_left):
        hours = used.get(m.id, 0)
        if hours:
            if hours > q:
                raise RuntimeError(f"mentor {m.id} over capacity: {hours} > {q}")
            departure = m.departure_day + MENTOR_EXTENSION if m.departure_day is not None else None
            m = replace(m, departure_day=departure)
        mentors.append(m)
        capacity.append(q - hours)
    return replace(pool, students=tuple(students), mentors=tuple(mentors), capacity_left=tuple(capacity))


def run_simulation(
    timeline: Timeline,
    frequency: int,
    policy: PolicyConfig | None = None,
    seed: int | None = None,
    limits: SolveLimits | None = None,
    method: str = DEFAULT_METHOD,
) -> RunLog:
    """Simulate the whole horizon, matching on every run day.

    ``seed`` only labels the log: the timeline already fixes every random draw
    and the solve is deterministic.
    """
    policy = policy or PolicyConfig()
    runlog = RunLog(frequency, policy, seed, timeline.horizon)
    pool = PoolState.from_timeline(timeline)
    for day in run_days(timeline.horizon, frequency):
        record, pool = step(pool.at(day), timeline.availability, policy, limits, method)
        runlog.records.append(record)
        log.debug("day %d: %d students, %d mentors, objective %.2f", day, record.n_students, record.n_mentors, record.objective)
    return runlog


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class ExperimentGrid:
    """Policy cross-product; ``mode`` is ``dynamic`` (timelines) or ``static`` (one instance per seed)."""

    frequencies: tuple[int, ...] = (7,)
    group_weights: tuple[float, ...] = (0.7,)
    preference_variants: tuple[str, ...] = ("A",)
    waits: tuple[tuple[float, str], ...] = ((0.0, "all_subjects"),)
    mode: str = "dynamic"
    timeline: TimelineConfig = TimelineConfig()
    generator: GeneratorConfig = GeneratorConfig()
    base_policy: PolicyConfig = PolicyConfig()

    def __post_init__(self) -> None:
        if self.mode not in ("dynamic", "static"):
            raise ValueError(f"unknown sweep mode {self.mode!r}")
        if not (self.frequencies and self.group_weights and self.preference_variants and self.waits):
            raise ValueError("every grid axis needs at least one value")

    def cells(self) -> list[dict[str, Any]]:
        frequencies = self.frequencies if self.mode == "dynamic" else (None,)
        return [
            {"frequency": f, "group_weight": wg, "preference_variant": pv, "wait_weight": wt, "waiting_scope": scope}
            for f, wg, pv, (wt, scope) in itertools.product(
                frequencies, self.group_weights, self.preference_variants, self.waits
            )
        ]

    def policy(self, cell: Mapping[str, Any]) -> PolicyConfig:
        return self.base_policy.with_(
            group_weight=cell["group_weight"],
            preference_variant=cell["preference_variant"],
            wait_weight=cell["wait_weight"],
            waiting_scope=cell["waiting_scope"],
        )


CELL_KEYS = ("frequency", "group_weight", "preference_variant", "wait_weight", "waiting_scope")


@dataclass
class SweepResult:
    rows: list[dict[str, Any]]
    failures: list[dict[str, Any]]
    logs: dict[tuple[int, int], RunLog] = field(default_factory=dict)

    def summary(self) -> list[dict[str, Any]]:
        ok = [r for r in self.rows if r["status"] != "failed"]
        return aggregate(ok, CELL_KEYS) if ok else []


def _run_cell(
    grid: ExperimentGrid, cell_index: int, cell: Mapping[str, Any], seed: int, limits: SolveLimits | None, method: str
) -> tuple[dict[str, Any], RunLog | None]:
    row: dict[str, Any] = {"cell": cell_index, "seed": seed, **cell}
    policy = grid.policy(cell)
    if grid.mode == "static":
        instance = generate_instance(replace(grid.generator, seed=seed), policy)
        result, solution, _ = solve_instance(instance, limits, method=method, config=policy)
        report = validate_solution(instance, solution)
        if not report.feasible:
            raise RuntimeError(str(report))
        row.update(evaluate(instance, solution, policy).as_dict())
        row.update(status=result.status, objective=result.objective, bound=result.bound, runs=1)
        return row, None
    timeline = generate_population(grid.timeline, seed, grid.generator)
    runlog = run_simulation(timeline, cell["frequency"], policy, seed, limits, method)
    row.update(runlog.totals())
    statuses = {r.status for r in runlog.records}
    row.update(
        status="optimal" if statuses <= {"optimal"} else "+".join(sorted(statuses)),
        objective=math.fsum(r.objective for r in runlog.records),
        bound=math.fsum(r.bound for r in runlog.records),
        runs=len(runlog.records),
    )
    return row, runlog


def _safe_cell(args: tuple) -> tuple[dict[str, Any], RunLog | None, str | None]:
    grid, cell_index, cell, seed, limits, method, keep_logs = args
    try:
        row, runlog = _run_cell(grid, cell_index, cell, seed, limits, method)
        if runlog is not None:
            if not keep_logs:
                runlog = None
            else:
                # instances are rebuilt cheaply and do not cross process boundaries
                for record in runlog.records:
                    record.instance = None
        return row, runlog, None
    except Exception as exc:  # a failed cell is recorded, the sweep goes on
        log.exception("cell %d seed %d failed", cell_index, seed)
        return {"cell": cell_index, "seed": seed, **cell, "status": "failed"}, None, f"{type(exc).__name__}: {exc}"


def sweep(
    grid: ExperimentGrid,
    seeds: Sequence[int],
    limits: SolveLimits | None = None,
    method: str = DEFAULT_METHOD,
    jobs: int = 1,
    keep_logs: bool = False,
) -> SweepResult:
    """Run every (cell, seed) combination; rows come back in (cell, seed) order whatever ``jobs`` is.

    In dynamic mode every cell of one seed sees the same timeline, so policy
    comparisons are paired.
    """
    if not seeds:
        raise ValueError("no seeds")
    tasks = [(grid, n, cell, seed, limits, method, keep_logs) for n, cell in enumerate(grid.cells()) for seed in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(_safe_cell, tasks))
    else:
        outputs = [_safe_cell(t) for t in tasks]
    rows, failures, logs = [], [], {}
    for (row, runlog, error), task in zip(outputs, tasks):
        rows.append(row)
        if error is not None:
            failures.append({"cell": task[1], "seed": task[3], "error": error})
        if keep_logs and runlog is not None:
            logs[(task[1], task[3])] = runlog
    return SweepResult(rows, failures, logs)


ROW_COLUMNS = ("cell", "seed", *CELL_KEYS, "status", "runs", "objective", "bound", *MEASURES)
