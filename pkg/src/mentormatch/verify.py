"""Self-checks: branch-and-bound against the brute-force oracle, and generator marginals against their tables."""

from __future__ import annotations

import collections
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from mentormatch.config import PREFERENCE_VARIANTS, PolicyConfig
from mentormatch.generator import (
    GeneratorConfig,
    draw_families,
    generate_mentors,
    generate_students,
    noisy_popularity,
)
from mentormatch.milp import MilpModel, build_milp, extract_solution
from mentormatch.model import Instance, Mentor, Offer, Request, Student, Subject, build_instance, validate_solution
from mentormatch.solver import SolveLimits, brute_force, solve

TINY_SUBJECTS = (Subject("Mathematics", 6), Subject("English", 6), Subject("Physics", 6))
TINY_AVAILABILITY = {"Mathematics": (6,), "English": (6,), "Physics": (6,)}
EQUIVALENCE_TOL = 1e-9


def random_tiny_instance(
    rng: np.random.Generator,
    max_students: int = 4,
    max_mentors: int = 3,
    max_activities: int = 10,
) -> tuple[Instance, int | None]:
    """A random instance small enough for :func:`brute_force`, plus a run day (None without waiting weight)."""
    while True:
        config = PolicyConfig(
            group_weight=float(rng.choice([0.5, 0.7, 1.0])),
            preference_variant=str(rng.choice(PREFERENCE_VARIANTS)),
            wait_weight=float(rng.choice([0.0, 0.0, 1.0])),
            waiting_scope=str(rng.choice(["all_subjects", "first_subject_only"])),
            slots=int(rng.integers(1, 3)),
            group_capacity=int(rng.integers(2, 4)),
        )
        students = []
        for i in range(int(rng.integers(min(2, max_students), max_students + 1))):
            k = int(rng.integers(1, 3))
            picks = rng.choice(len(TINY_SUBJECTS), size=k, replace=False)
            requests = tuple(
                Request(TINY_SUBJECTS[p], int(rng.integers(1, 5)), int(rng.choice([0, 2, 3, 4, 5]))) for p in picks
            )
            students.append(
                Student(
                    id=f"s{i}",
                    year=6,
                    class_id=f"c{int(rng.integers(0, 2))}",
                    requests=requests,
                    group=int(rng.random() < 0.8),
                    equipment=int(rng.integers(0, 2)),
                    help=int(rng.integers(0, 3)),
                    sd=int(rng.integers(0, 4)),
                    nh=float(rng.choice([0.5, 1.0, 1.5, 2.0])),
                    ws=int(rng.integers(0, 4)),
                    registration_day=int(rng.integers(0, 5)),
                )
            )
        mentors = []
        for j in range(int(rng.integers(1, max_mentors + 1))):
            k = int(rng.integers(1, 4))
            picks = rng.choice(len(TINY_SUBJECTS), size=k, replace=False)
            mentors.append(
                Mentor(
                    id=f"m{j}",
                    offers=tuple(Offer(TINY_SUBJECTS[p].name, (6,)) for p in picks),
                    capacity=int(rng.integers(1, 8)),
                    group=int(rng.random() < 0.8),
                    ym=[None, 0, 1, 2][int(rng.integers(0, 4))],
                    dm=int(rng.choice([0, 1, 3])),
                    gpm=str(rng.choice(["N", "W", "M", "S"])),
                    registration_day=int(rng.integers(0, 5)),
                )
            )
        instance = build_instance(students, mentors, TINY_AVAILABILITY, config)
        if 1 <= len(instance.activities) <= max_activities:
            run_day = 6 if config.wait_weight > 0 else None
            return instance, run_day


def drop_constraints(tag: str) -> Callable[[MilpModel], MilpModel]:
    """Model mutation for negative controls: remove every row carrying ``tag``."""

    def mutate(model: MilpModel) -> MilpModel:
        kept = [c for c in model.constraints if c.tag != tag]
        return MilpModel(model.variables, kept, model.objective, model.run_day, model._index)

    mutate.tag = tag  # type: ignore[attr-defined]
    return mutate


@dataclass(frozen=True)
class CaseResult:
    case: int
    seed: int
    n_activities: int
    bnb_objective: float
    oracle_objective: float
    bnb_status: str
    feasible: bool
    provenance: str

    @property
    def passed(self) -> bool:
        return (
            self.bnb_status == "optimal"
            and self.feasible
            and abs(self.bnb_objective - self.oracle_objective) < EQUIVALENCE_TOL
        )

    def describe(self) -> str:
        return (
            f"case {self.case} (seed {self.seed}, |E|={self.n_activities}, {self.provenance}): "
            f"bnb {self.bnb_objective!r} [{self.bnb_status}, feasible={self.feasible}] "
            f"vs oracle {self.oracle_objective!r}, diff {self.bnb_objective - self.oracle_objective:+.3g}"
        )


def equivalence_suite(
    cases: int = 200,
    seed: int = 0,
    mutate: Callable[[MilpModel], MilpModel] | None = None,
    limits: SolveLimits | None = None,
) -> list[CaseResult]:
    """Solve ``cases`` random tiny instances both ways; case ``i`` uses seed ``seed + i``."""
    provenance = f"mutated:{getattr(mutate, 'tag', 'custom')}" if mutate else "unmodified model"
    out = []
    for i in range(cases):
        case_seed = seed + i
        instance, run_day = random_tiny_instance(np.random.default_rng(case_seed))
        model = build_milp(instance, run_day=run_day)
        if mutate is not None:
            model = mutate(model)
        result = solve(model, limits)
        solution = extract_solution(model, result.values, instance, check=mutate is None)
        oracle = brute_force(instance, run_day=run_day)
        out.append(
            CaseResult(
                i,
                case_seed,
                len(instance.activities),
                result.objective,
                oracle.objective,
                result.status,
                validate_solution(instance, solution).feasible,
                provenance,
            )
        )
    return out


# ---------------------------------------------------------------------------
# generator goodness of fit

FIT_TOL = 0.03
WS_TOL = 0.01


@dataclass(frozen=True)
class FitCheck:
    marginal: str
    category: str
    expected: float
    observed: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.observed - self.expected) <= self.tolerance

    def describe(self) -> str:
        mark = "ok  " if self.passed else "FAIL"
        return f"{mark} {self.marginal}[{self.category}] expected {self.expected:.4f} observed {self.observed:.4f}"


def _table_checks(name: str, table: Sequence[tuple[object, float]], values: Sequence[object]) -> list[FitCheck]:
    counts = collections.Counter(values)
    n = len(values)
    return [FitCheck(name, str(v), p, counts[v] / n, FIT_TOL) for v, p in table]


def fit_suite(samples: int = 100_000, seed: int = 0, config: GeneratorConfig | None = None) -> list[FitCheck]:
    """Empirical marginals of ``samples`` students and mentors against the configured tables."""
    config = config or GeneratorConfig()
    rng = np.random.default_rng(seed)
    popularity = noisy_popularity(config, rng)
    students = generate_students(samples, config, rng, popularity)
    mentors = generate_mentors(samples, config, rng, popularity)
    parents, children = draw_families(rng, samples, config)

    checks = []
    checks += _table_checks("subject_count", config.subject_count, [len(s.requests) for s in students])
    checks += _table_checks("hours", config.hours, [r.hours for s in students for r in s.requests])
    checks += _table_checks("sd", config.sd, [s.sd for s in students])
    checks.append(FitCheck("student_group", "1", config.student_group, float(np.mean([s.group for s in students])), FIT_TOL))
    checks.append(FitCheck("single_parent", "1", config.single_parent, float(np.mean(parents == 1)), FIT_TOL))
    checks += _table_checks("children", config.children, children.tolist())
    checks.append(FitCheck("ws_mean", "mean", config.ws_mean, float(np.mean([s.ws for s in students])), WS_TOL))
    checks.append(FitCheck("mentor_group", "1", config.mentor_group, float(np.mean([m.group for m in mentors])), FIT_TOL))
    ranges = [next(r for r, _ in config.capacity_ranges if r[0] <= m.capacity <= r[1]) for m in mentors]
    checks += _table_checks("capacity_range", config.capacity_ranges, ranges)
    checks += _table_checks("dm", config.dm, [m.dm for m in mentors])
    checks += _table_checks("gpm", config.gpm, [m.gpm for m in mentors])
    checks += _table_checks("ym", config.ym, [m.ym for m in mentors])
    return checks


def nh_consistency(samples: int = 100_000, seed: int = 0, config: GeneratorConfig | None = None) -> float:
    """Largest absolute gap between the generated NH distribution and the one implied by the family tables."""
    config = config or GeneratorConfig()
    students = generate_students(samples, config, np.random.default_rng(seed))
    implied: dict[float, float] = collections.defaultdict(float)
    for parents, p_parent in ((1, config.single_parent), (2, 1 - config.single_parent)):
        for kids, p_kids in config.children:
            implied[min(2.5, max(0.5, kids / parents))] += p_parent * p_kids
    observed = collections.Counter(s.nh for s in students)
    return max(abs(observed[v] / samples - p) for v, p in implied.items())
