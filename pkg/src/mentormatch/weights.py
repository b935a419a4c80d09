"""Objective coefficients of the allocation program.

Every function here is pure. The per-activity weight is the sum of a volume
term, a preference term, a social-priority term and an optional waiting-time
term; a group assignment is worth the same weight scaled by the group
discount.
"""

from __future__ import annotations

from mentormatch.config import PolicyConfig
from mentormatch.model import Mentor, Student, StudentPairMetrics, Subject, pair_metrics, year_bracket


def volume_weight(config: PolicyConfig) -> float:
    return config.volume_weight


def age_preference(student: Student, mentor: Mentor) -> int:
    """1 when the mentor prefers the student's age bracket; no preference scores 0."""
    return int(mentor.ym is not None and mentor.ym == year_bracket(student.year))


def preference_weight(student: Student, mentor: Mentor, subject: Subject, variant: str = "A") -> float:
    """Subject-rank and age-preference weight of one activity.

    Raises:
        KeyError: the subject is missing from the student's requests or the
            mentor's offers.
    """
    student_term = 6 - student.rank(subject)
    mentor_term = 6 - mentor.rank(subject)
    if variant == "B":
        student_term **= 2
    elif variant == "C":
        student_term **= 2
        mentor_term **= 2
    elif variant != "A":
        raise ValueError(f"unknown preference variant {variant!r}")
    return float(student_term + mentor_term + 3 * age_preference(student, mentor))


def social_weight(student: Student, mentor: Mentor, subject: Subject) -> float:
    grade = student.request(subject).grade
    # literal formula: a badly mismatched grade preference can go negative
    grade_term = (1.5 - abs(grade - mentor.wm)) * mentor.grade_flag
    return (
        3 * student.sd * mentor.dm
        + student.ws * mentor.sm
        + grade_term
        + 2 * student.cy
        + (student.nh + student.help)
    )


def waiting_weight(run_day: int, student: Student, mentor: Mentor, subject: Subject, config: PolicyConfig) -> float:
    """Priority for days waited by both parties since registration.

    With ``waiting_scope="first_subject_only"`` only the student's currently
    top-ranked request earns the bonus.
    """
    if config.wait_weight == 0:
        return 0.0
    if run_day < student.registration_day or run_day < mentor.registration_day:
        raise ValueError(f"run day {run_day} precedes a registration day")
    if config.waiting_scope == "first_subject_only" and student.rank(subject) != 1:
        return 0.0
    waited = (run_day - student.registration_day) + (run_day - mentor.registration_day)
    return config.wait_weight * waited


def activity_weight(
    student: Student,
    mentor: Mentor,
    subject: Subject,
    config: PolicyConfig,
    run_day: int | None = None,
) -> float:
    """Weight of one hour of the activity done as a pair."""
    weight = (
        volume_weight(config)
        + preference_weight(student, mentor, subject, config.preference_variant)
        + social_weight(student, mentor, subject)
    )
    if config.wait_weight > 0:
        if run_day is None:
            raise ValueError("a run day is required when wait_weight > 0")
        weight += waiting_weight(run_day, student, mentor, subject, config)
    return weight


def group_activity_weight(
    student: Student,
    mentor: Mentor,
    subject: Subject,
    config: PolicyConfig,
    run_day: int | None = None,
) -> float:
    return activity_weight(student, mentor, subject, config, run_day) * config.group_weight


def coherence_from_metrics(metrics: StudentPairMetrics, subject: Subject) -> float:
    return float(10 * metrics.sc - 2 * metrics.de - metrics.dg[subject] - metrics.dr[subject])


def coherence_coefficient(first: Student, second: Student, subject: Subject) -> float:
    """Bonus (or penalty) for two students sharing a group in ``subject``."""
    return coherence_from_metrics(pair_metrics(first, second), subject)
