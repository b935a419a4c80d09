"""Domain types: students, mentors, subjects, activities, potential groups and solutions.

An :class:`Instance` is the static allocation problem. It is built once by
:func:`build_instance`, which derives the activity set (every mutually
acceptable student/mentor/subject triple), the potential groups of every
group-willing mentor and the pairwise similarity data used for group
coherence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from types import MappingProxyType
from typing import Any, Iterable, Mapping, Sequence

from mentormatch.config import PolicyConfig

SUBJECT_NAMES = (
    "Mathematics",
    "Hungarian Grammar",
    "Hungarian Literature",
    "English",
    "German",
    "History",
    "Physics",
    "Chemistry",
    "Biology",
    "Geography",
    "Informatics",
    "Environmental Studies",
    "Natural Science",
    "Music",
    "Visual Arts",
)

# years in which each subject is taught
DEFAULT_AVAILABILITY: Mapping[str, tuple[int, ...]] = MappingProxyType(
    {
        "Mathematics": tuple(range(1, 13)),
        "Hungarian Grammar": tuple(range(1, 13)),
        "Hungarian Literature": tuple(range(5, 13)),
        "English": tuple(range(4, 13)),
        "German": tuple(range(4, 13)),
        "History": tuple(range(5, 13)),
        "Physics": tuple(range(7, 13)),
        "Chemistry": tuple(range(7, 13)),
        "Biology": tuple(range(7, 13)),
        "Geography": tuple(range(7, 13)),
        "Informatics": tuple(range(5, 13)),
        "Environmental Studies": tuple(range(1, 5)),
        "Natural Science": tuple(range(5, 7)),
        "Music": tuple(range(1, 9)),
        "Visual Arts": tuple(range(1, 9)),
    }
)

GRADE_PREFERENCES = ("N", "W", "M", "S")
MATRICULATION = ("none", "base", "advanced", "N/A")

_SM = {"N": 1, "W": 3, "M": 0, "S": 0}
_WM = {"N": 0.0, "W": 1.5, "M": 3.0, "S": 4.5}


class InstanceError(ValueError):
    """Raised for malformed instance data."""


class SolutionReferenceError(ValueError):
    """A solution refers to students, mentors or groups absent from the instance."""


@dataclass(frozen=True, order=True)
class Subject:
    name: str
    year: int

    def __post_init__(self) -> None:
        if not 1 <= self.year <= 12:
            raise InstanceError(f"subject year out of range: {self.year}")

    def __str__(self) -> str:
        return f"{self.name}/{self.year}"


@dataclass(frozen=True)
class Request:
    """One requested subject: weekly hours wanted and last grade (0 = left blank)."""

    subject: Subject
    hours: int
    grade: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.hours <= 4:
            raise InstanceError(f"requested hours must be 1..4, got {self.hours}")
        if not 0 <= self.grade <= 5:
            raise InstanceError(f"grade must be 0..5, got {self.grade}")


def critical_year(year: int) -> int:
    return 2 if year == 12 else 1 if year == 11 else 0


def year_bracket(year: int) -> int:
    """Age bracket used by mentors' age preference: 0 for years 1-4, 1 for 5-8, 2 for 9-12."""
    return 0 if year <= 4 else 1 if year <= 8 else 2


@dataclass(frozen=True)
class Student:
    id: str
    year: int
    class_id: str
    requests: tuple[Request, ...]
    group: int = 0
    equipment: int = 0
    help: int = 0
    sd: int = 0
    nh: float = 0.5
    ws: int = 0
    matriculation: str = "none"
    registration_day: int = 0
    departure_day: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "requests", tuple(self.requests))
        if not 1 <= self.year <= 12:
            raise InstanceError(f"student {self.id}: year out of range")
        if not 1 <= len(self.requests) <= 5:
            raise InstanceError(f"student {self.id}: needs 1..5 requests")
        subjects = [r.subject for r in self.requests]
        if len(set(subjects)) != len(subjects):
            raise InstanceError(f"student {self.id}: duplicate requested subject")
        if self.group not in (0, 1) or self.equipment not in (0, 1):
            raise InstanceError(f"student {self.id}: group/equipment must be 0 or 1")
        if self.help not in (0, 1, 2):
            raise InstanceError(f"student {self.id}: help must be 0..2")
        if self.sd not in (0, 1, 2, 3) or self.ws not in (0, 1, 2, 3):
            raise InstanceError(f"student {self.id}: sd/ws must be 0..3")
        if not (0.5 <= self.nh <= 2.5 and float(2 * self.nh).is_integer()):
            raise InstanceError(f"student {self.id}: nh must be a half-integer in [0.5, 2.5]")
        if self.matriculation not in MATRICULATION:
            raise InstanceError(f"student {self.id}: unknown matriculation {self.matriculation!r}")
        if self.departure_day is not None and self.departure_day <= self.registration_day:
            raise InstanceError(f"student {self.id}: departure must follow registration")

    @property
    def cy(self) -> int:
        return critical_year(self.year)

    def rank(self, subject: Subject) -> int:
        for position, request in enumerate(self.requests, start=1):
            if request.subject == subject:
                return position
        raise KeyError(f"student {self.id} does not request {subject}")

    def request(self, subject: Subject) -> Request:
        return self.requests[self.rank(subject) - 1]

    @property
    def subjects(self) -> tuple[Subject, ...]:
        return tuple(r.subject for r in self.requests)


@dataclass(frozen=True)
class Offer:
    """A subject a mentor teaches, for the listed school years."""

    name: str
    years: tuple[int, ...] = tuple(range(1, 13))

    def __post_init__(self) -> None:
        object.__setattr__(self, "years", tuple(sorted(set(self.years))))
        if not self.years or not all(1 <= y <= 12 for y in self.years):
            raise InstanceError(f"offer {self.name}: bad years {self.years}")

    def covers(self, subject: Subject) -> bool:
        return subject.name == self.name and subject.year in self.years


@dataclass(frozen=True)
class Mentor:
    id: str
    offers: tuple[Offer, ...]
    capacity: int
    group: int = 0
    ym: int | None = None
    dm: int = 0
    gpm: str = "N"
    group_capacity: int | None = None
    registration_day: int = 0
    departure_day: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "offers", tuple(self.offers))
        names = [o.name for o in self.offers]
        if len(set(names)) != len(names):
            raise InstanceError(f"mentor {self.id}: duplicate offered subject")
        if self.capacity < 1:
            raise InstanceError(f"mentor {self.id}: capacity must be at least 1")
        if self.group not in (0, 1):
            raise InstanceError(f"mentor {self.id}: group must be 0 or 1")
        if self.ym not in (0, 1, 2, None):
            raise InstanceError(f"mentor {self.id}: ym must be 0..2 or None")
        if self.dm not in (0, 1, 3):
            raise InstanceError(f"mentor {self.id}: dm must be 0, 1 or 3")
        if self.gpm not in GRADE_PREFERENCES:
            raise InstanceError(f"mentor {self.id}: unknown grade preference {self.gpm!r}")
        if self.group_capacity is not None and self.group_capacity < 2:
            raise InstanceError(f"mentor {self.id}: group capacity below 2")
        if self.departure_day is not None and self.departure_day <= self.registration_day:
            raise InstanceError(f"mentor {self.id}: departure must follow registration")

    @property
    def grade_flag(self) -> int:
        return 0 if self.gpm == "N" else 1

    @property
    def sm(self) -> int:
        return _SM[self.gpm]

    @property
    def wm(self) -> float:
        return _WM[self.gpm]

    def offer_for(self, subject: Subject) -> Offer | None:
        for offer in self.offers:
            if offer.covers(subject):
                return offer
        return None

    def rank(self, subject: Subject) -> int:
        for position, offer in enumerate(self.offers, start=1):
            if offer.name == subject.name:
                return position
        raise KeyError(f"mentor {self.id} does not offer {subject.name}")


@dataclass(frozen=True, order=True)
class Activity:
    student_id: str
    mentor_id: str
    subject: Subject

    def __str__(self) -> str:
        return f"{self.student_id}|{self.mentor_id}|{self.subject}"


@dataclass(frozen=True, order=True)
class PotentialGroup:
    mentor_id: str
    subject: Subject
    slot: int
    capacity: int = field(default=5, compare=False)

    def __str__(self) -> str:
        return f"{self.mentor_id}|{self.subject}|{self.slot}"


@dataclass(frozen=True)
class StudentPairMetrics:
    """Similarity of two group-willing students, per shared subject for dr/dg."""

    sc: int
    de: int
    dr: Mapping[Subject, int]
    dg: Mapping[Subject, int]


def pair_metrics(first: Student, second: Student) -> StudentPairMetrics:
    shared = [s for s in first.subjects if s in set(second.subjects)]
    return StudentPairMetrics(
        sc=int(first.class_id == second.class_id),
        de=abs(first.equipment - second.equipment),
        dr={s: abs(first.request(s).hours - second.request(s).hours) for s in shared},
        # a blank grade (0) is compared literally
        dg={s: abs(first.request(s).grade - second.request(s).grade) for s in shared},
    )


@dataclass(frozen=True, eq=False)
class Instance:
    """A static matching problem with its derived activities and potential groups.

    Construct through :func:`build_instance`.
    """

    students: tuple[Student, ...]
    mentors: tuple[Mentor, ...]
    subjects: tuple[Subject, ...]
    config: PolicyConfig
    activities: tuple[Activity, ...]
    potential_groups: tuple[PotentialGroup, ...]
    pair_data: Mapping[tuple[str, str], StudentPairMetrics]
    student_by_id: Mapping[str, Student] = field(repr=False)
    mentor_by_id: Mapping[str, Mentor] = field(repr=False)

    def student(self, student_id: str) -> Student:
        return self.student_by_id[student_id]

    def mentor(self, mentor_id: str) -> Mentor:
        return self.mentor_by_id[mentor_id]

    def pair(self, first: str, second: str) -> StudentPairMetrics:
        key = (first, second)
        return self.pair_data[key] if key in self.pair_data else self.pair_data[(second, first)]

    def group_eligible(self, activity: Activity) -> bool:
        return bool(self.student(activity.student_id).group and self.mentor(activity.mentor_id).group)

    def slots_for(self, mentor_id: str, subject: Subject) -> tuple[PotentialGroup, ...]:
        return tuple(g for g in self.potential_groups if g.mentor_id == mentor_id and g.subject == subject)

    def with_config(self, config: PolicyConfig) -> "Instance":
        return build_instance(self.students, self.mentors, self.subjects, config)

    def to_dict(self) -> dict[str, Any]:
        return {
            "students": [student_to_dict(s) for s in self.students],
            "mentors": [mentor_to_dict(m) for m in self.mentors],
            "subjects": [{"name": s.name, "year": s.year} for s in self.subjects],
            "config": self.config.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"


def availability_subjects(availability: Mapping[str, Iterable[int]]) -> tuple[Subject, ...]:
    return tuple(sorted(Subject(name, year) for name, years in availability.items() for year in years))


def build_instance(
    students: Sequence[Student],
    mentors: Sequence[Mentor],
    subject_availability: Mapping[str, Iterable[int]] | Iterable[Subject] | None = None,
    config: PolicyConfig | None = None,
) -> Instance:
    """Validate participants and derive activities, potential groups and pair metrics.

    ``subject_availability`` is either a name -> years mapping or an iterable of
    :class:`Subject`; it defaults to :data:`DEFAULT_AVAILABILITY`.
    """
    config = config or PolicyConfig()
    if subject_availability is None:
        subject_availability = DEFAULT_AVAILABILITY
    if isinstance(subject_availability, Mapping):
        subjects = availability_subjects(subject_availability)
    else:
        subjects = tuple(sorted(set(subject_availability)))
    available = set(subjects)

    students = tuple(students)
    mentors = tuple(mentors)
    student_by_id: dict[str, Student] = {}
    for s in students:
        if s.id in student_by_id:
            raise InstanceError(f"duplicate student id {s.id!r}")
        for r in s.requests:
            if r.subject not in available:
                raise InstanceError(f"student {s.id} requests unavailable subject {r.subject}")
        if len(s.requests) > config.big_m:
            raise InstanceError(f"student {s.id} has more requests than big_m={config.big_m}")
        student_by_id[s.id] = s
    mentor_by_id: dict[str, Mentor] = {}
    for m in mentors:
        if m.id in mentor_by_id or m.id in student_by_id:
            raise InstanceError(f"duplicate mentor id {m.id!r}")
        mentor_by_id[m.id] = m

    activities = tuple(
        Activity(s.id, m.id, r.subject)
        for s in students
        for r in s.requests
        for m in mentors
        if m.offer_for(r.subject) is not None
    )

    group_keys: list[tuple[str, Subject]] = []
    seen: set[tuple[str, Subject]] = set()
    for a in activities:
        key = (a.mentor_id, a.subject)
        if key in seen:
            continue
        if student_by_id[a.student_id].group and mentor_by_id[a.mentor_id].group:
            seen.add(key)
            group_keys.append(key)
    mentor_order = {m.id: n for n, m in enumerate(mentors)}
    group_keys.sort(key=lambda k: (mentor_order[k[0]], k[1]))
    potential_groups = tuple(
        PotentialGroup(
            mentor_id,
            subject,
            t,
            mentor_by_id[mentor_id].group_capacity or config.group_capacity,
        )
        for mentor_id, subject in group_keys
        for t in range(1, config.slots + 1)
    )

    willing = [s for s in students if s.group]
    pair_data = {
        (a.id, b.id): pair_metrics(a, b)
        for a, b in combinations(willing, 2)
        if set(a.subjects) & set(b.subjects)
    }
    return Instance(
        students=students,
        mentors=mentors,
        subjects=subjects,
        config=config,
        activities=activities,
        potential_groups=potential_groups,
        pair_data=MappingProxyType(pair_data),
        student_by_id=MappingProxyType(student_by_id),
        mentor_by_id=MappingProxyType(mentor_by_id),
    )


# ---------------------------------------------------------------------------
# Solutions


@dataclass(frozen=True, eq=False)
class Solution:
    """Realised pairs and groups.

    Attributes:
        pairs: activity -> weekly pair hours (1..3).
        group_assignments: (activity, slot) -> weekly hours credited to the student.
        groups: realised potential group -> weekly group hours (2 or 3).
    """

    pairs: Mapping[Activity, int] = field(default_factory=dict)
    group_assignments: Mapping[tuple[Activity, int], int] = field(default_factory=dict)
    groups: Mapping[PotentialGroup, int] = field(default_factory=dict)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Solution):
            return NotImplemented
        return (
            dict(self.pairs) == dict(other.pairs)
            and dict(self.group_assignments) == dict(other.group_assignments)
            and dict(self.groups) == dict(other.groups)
        )

    def is_empty(self) -> bool:
        return not (self.pairs or self.group_assignments or self.groups)

    def members(self, group: PotentialGroup) -> list[Activity]:
        return [
            a
            for (a, t) in self.group_assignments
            if t == group.slot and a.mentor_id == group.mentor_id and a.subject == group.subject
        ]

    def matched_students(self) -> set[str]:
        return {a.student_id for a in self.pairs} | {a.student_id for a, _ in self.group_assignments}

    def matched_requests(self) -> set[tuple[str, Subject]]:
        return {(a.student_id, a.subject) for a in self.pairs} | {
            (a.student_id, a.subject) for a, _ in self.group_assignments
        }

    def mentor_hours(self) -> dict[str, int]:
        used: dict[str, int] = {}
        for a, h in self.pairs.items():
            used[a.mentor_id] = used.get(a.mentor_id, 0) + h
        for g, h in self.groups.items():
            used[g.mentor_id] = used.get(g.mentor_id, 0) + h
        return used

    def to_dict(self) -> dict[str, Any]:
        return {
            "pairs": [
                {"student": a.student_id, "mentor": a.mentor_id, "subject": _subject_dict(a.subject), "hours": h}
                for a, h in sorted(self.pairs.items())
            ],
            "groups": [
                {
                    "mentor": g.mentor_id,
                    "subject": _subject_dict(g.subject),
                    "slot": g.slot,
                    "hours": h,
                    "members": [
                        {"student": a.student_id, "hours": self.group_assignments[(a, g.slot)]}
                        for a in sorted(self.members(g))
                    ],
                }
                for g, h in sorted(self.groups.items())
            ],
        }


def solution_from_dict(data: Mapping[str, Any], instance: Instance) -> Solution:
    pairs = {
        Activity(p["student"], p["mentor"], _subject(p["subject"])): int(p["hours"]) for p in data.get("pairs", [])
    }
    groups: dict[PotentialGroup, int] = {}
    assignments: dict[tuple[Activity, int], int] = {}
    for g in data.get("groups", []):
        subject = _subject(g["subject"])
        mentor = instance.mentor_by_id.get(g["mentor"])
        capacity = (mentor.group_capacity if mentor else None) or instance.config.group_capacity
        group = PotentialGroup(g["mentor"], subject, int(g["slot"]), capacity)
        groups[group] = int(g["hours"])
        for member in g["members"]:
            assignments[(Activity(member["student"], g["mentor"], subject), group.slot)] = int(member["hours"])
    return Solution(pairs, assignments, groups)


@dataclass(frozen=True)
class Violation:
    constraint: str
    entities: tuple[str, ...]
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def add(self, constraint: str, entities: Iterable[Any], message: str) -> None:
        self.violations.append(Violation(constraint, tuple(str(e) for e in entities), message))

    def __str__(self) -> str:
        if not self.violations:
            return "feasible"
        return "\n".join(f"[{v.constraint}] {', '.join(v.entities)}: {v.message}" for v in self.violations)


def _check_references(instance: Instance, solution: Solution) -> None:
    activities = list(solution.pairs) + [a for a, _ in solution.group_assignments]
    for a in activities:
        if a.student_id not in instance.student_by_id:
            raise SolutionReferenceError(f"unknown student {a.student_id!r}")
        if a.mentor_id not in instance.mentor_by_id:
            raise SolutionReferenceError(f"unknown mentor {a.mentor_id!r}")
    for g in solution.groups:
        if g.mentor_id not in instance.mentor_by_id:
            raise SolutionReferenceError(f"unknown mentor {g.mentor_id!r}")


def validate_solution(instance: Instance, solution: Solution) -> ValidationReport:
    """Check a solution against every feasibility rule; an empty report means feasible.

    Raises:
        SolutionReferenceError: the solution names a student or mentor the
            instance does not contain.
    """
    _check_references(instance, solution)
    report = ValidationReport()
    known = set(instance.activities)
    potential = {(g.mentor_id, g.subject, g.slot): g for g in instance.potential_groups}

    for a, hours in solution.pairs.items():
        if a not in known:
            report.add("acceptability", [a], "subject not requested by the student or not offered by the mentor")
            continue
        q = instance.student(a.student_id).request(a.subject).hours
        if not 1 <= hours <= min(3, q):
            report.add("pair_hours", [a], f"pair hours {hours} outside 1..min(3, q={q})")

    realised = {(g.mentor_id, g.subject, g.slot): h for g, h in solution.groups.items()}
    for g, hours in solution.groups.items():
        mentor = instance.mentor(g.mentor_id)
        if not mentor.group:
            report.add("group_willingness", [g.mentor_id], "mentor is not willing to teach groups")
        elif (g.mentor_id, g.subject, g.slot) not in potential:
            report.add("group_willingness", [g], "no such potential group")
        if hours not in (2, 3):
            report.add("group_hours", [g], f"group hours {hours} not in {{2, 3}}")
        capacity = potential[(g.mentor_id, g.subject, g.slot)].capacity if (
            (g.mentor_id, g.subject, g.slot) in potential
        ) else instance.config.group_capacity
        size = len(solution.members(g))
        if not 2 <= size <= capacity:
            report.add("group_size", [g], f"{size} members, need 2..{capacity}")

    for (a, t), hours in solution.group_assignments.items():
        if a not in known:
            report.add("acceptability", [a], "subject not requested by the student or not offered by the mentor")
            continue
        if not instance.student(a.student_id).group:
            report.add("group_willingness", [a.student_id], "student is not willing to study in groups")
        key = (a.mentor_id, a.subject, t)
        if key not in realised:
            report.add("group_realisation", [a, t], "member of a group that is not realised")
            continue
        q = instance.student(a.student_id).request(a.subject).hours
        if not 0 <= hours <= min(q, realised[key]):
            report.add("member_hours", [a, t], f"member hours {hours} exceed min(q={q}, group hours={realised[key]})")

    for mentor_id, used in sorted(solution.mentor_hours().items()):
        cap = instance.mentor(mentor_id).capacity
        if used > cap:
            report.add("mentor_capacity", [mentor_id], f"{used} hours scheduled, capacity {cap}")

    counts: dict[tuple[str, Subject], int] = {}
    for a in list(solution.pairs) + [a for a, _ in solution.group_assignments]:
        counts[(a.student_id, a.subject)] = counts.get((a.student_id, a.subject), 0) + 1
    for (student_id, subject), n in sorted(counts.items()):
        if n > 1:
            report.add("subject", [student_id, subject], f"{n} assignments for one requested subject")
    return report


def solution_volume(instance: Instance, solution: Solution, group_weight: float | None = None) -> float:
    """Pair hours plus discounted group hours credited to students."""
    wg = instance.config.group_weight if group_weight is None else group_weight
    return sum(solution.pairs.values()) + wg * sum(solution.group_assignments.values())


# ---------------------------------------------------------------------------
# JSON


def _subject_dict(subject: Subject) -> dict[str, Any]:
    return {"name": subject.name, "year": subject.year}


def _subject(data: Mapping[str, Any]) -> Subject:
    return Subject(data["name"], int(data["year"]))


def student_to_dict(s: Student) -> dict[str, Any]:
    return {
        "id": s.id,
        "year": s.year,
        "class_id": s.class_id,
        "requests": [{"subject": _subject_dict(r.subject), "hours": r.hours, "grade": r.grade} for r in s.requests],
        "group": s.group,
        "equipment": s.equipment,
        "help": s.help,
        "sd": s.sd,
        "nh": s.nh,
        "ws": s.ws,
        "cy": s.cy,
        "matriculation": s.matriculation,
        "registration_day": s.registration_day,
        "departure_day": s.departure_day,
    }


def student_from_dict(data: Mapping[str, Any]) -> Student:
    student = Student(
        id=str(data["id"]),
        year=int(data["year"]),
        class_id=str(data.get("class_id", "")),
        requests=tuple(
            Request(_subject(r["subject"]), int(r["hours"]), int(r.get("grade", 0))) for r in data["requests"]
        ),
        group=int(data.get("group", 0)),
        equipment=int(data.get("equipment", 0)),
        help=int(data.get("help", 0)),
        sd=int(data.get("sd", 0)),
        nh=float(data.get("nh", 0.5)),
        ws=int(data.get("ws", 0)),
        matriculation=str(data.get("matriculation", "none")),
        registration_day=int(data.get("registration_day", 0)),
        departure_day=None if data.get("departure_day") is None else int(data["departure_day"]),
    )
    if "cy" in data and int(data["cy"]) != student.cy:
        raise InstanceError(f"student {student.id}: cy inconsistent with year")
    return student


def mentor_to_dict(m: Mentor) -> dict[str, Any]:
    return {
        "id": m.id,
        "offers": [{"name": o.name, "years": list(o.years)} for o in m.offers],
        "capacity": m.capacity,
        "group": m.group,
        "ym": m.ym,
        "dm": m.dm,
        "gpm": m.gpm,
        "group_capacity": m.group_capacity,
        "registration_day": m.registration_day,
        "departure_day": m.departure_day,
    }


def mentor_from_dict(data: Mapping[str, Any]) -> Mentor:
    return Mentor(
        id=str(data["id"]),
        offers=tuple(Offer(o["name"], tuple(o.get("years", range(1, 13)))) for o in data["offers"]),
        capacity=int(data["capacity"]),
        group=int(data.get("group", 0)),
        ym=None if data.get("ym") is None else int(data["ym"]),
        dm=int(data.get("dm", 0)),
        gpm=str(data.get("gpm", "N")),
        group_capacity=None if data.get("group_capacity") is None else int(data["group_capacity"]),
        registration_day=int(data.get("registration_day", 0)),
        departure_day=None if data.get("departure_day") is None else int(data["departure_day"]),
    )


def instance_from_dict(data: Mapping[str, Any]) -> Instance:
    subjects = [_subject(s) for s in data["subjects"]]
    return build_instance(
        [student_from_dict(s) for s in data["students"]],
        [mentor_from_dict(m) for m in data["mentors"]],
        subjects,
        PolicyConfig.from_dict(data.get("config")),
    )


def instance_from_json(text: str) -> Instance:
    return instance_from_dict(json.loads(text))
