from __future__ import annotations

import os

import pytest
from hypothesis import settings

from mentormatch.config import PolicyConfig
from mentormatch.model import Mentor, Offer, Request, Student, Subject, build_instance

settings.register_profile("default", deadline=None, print_blob=True)
settings.register_profile("ci", deadline=None, max_examples=300)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

MATH7 = Subject("Mathematics", 7)
PHYS7 = Subject("Physics", 7)


def student(
    sid: str = "s1",
    requests=((MATH7, 2, 0),),
    year: int = 7,
    group: int = 0,
    class_id: str = "school001/7",
    **kw,
) -> Student:
    reqs = tuple(Request(s, h, g) for s, h, g in requests)
    return Student(id=sid, year=year, class_id=class_id, requests=reqs, group=group, **kw)


def mentor(mid: str = "m1", subjects=("Mathematics",), capacity: int = 3, group: int = 0, **kw) -> Mentor:
    kw.setdefault("ym", 1)
    kw.setdefault("dm", 1)
    return Mentor(id=mid, offers=tuple(Offer(n) for n in subjects), capacity=capacity, group=group, **kw)


def instance_of(students, mentors, config: PolicyConfig | None = None):
    return build_instance(students, mentors, None, config)


@pytest.fixture
def single_pair():
    """One student (Mathematics 7, q=2) and one mentor with Q=3: w_e = 50 + 13 + 0.5 = 63.5."""
    return instance_of([student()], [mentor()])


@pytest.fixture
def group_pair():
    """Two group-willing students and a group-willing mentor on Mathematics 7."""
    return instance_of(
        [student("s1", ((MATH7, 3, 3),), group=1), student("s2", ((MATH7, 2, 4),), group=1)],
        [mentor(capacity=3, group=1)],
    )


# ---------------------------------------------------------------------------
# acceptance verdict lines, repeated in the terminal summary

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion and return the flag."""

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
