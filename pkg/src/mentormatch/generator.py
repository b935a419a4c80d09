"""Synthetic students, mentors and arrival timelines.

All attributes are drawn independently from fixed categorical tables. A
single ``numpy.random.Generator`` seeded from the config drives everything,
so a (config, seed) pair always produces the same population.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

from mentormatch.config import PolicyConfig
from mentormatch.model import (
    DEFAULT_AVAILABILITY,
    SUBJECT_NAMES,
    Instance,
    Mentor,
    Offer,
    Request,
    Student,
    Subject,
    build_instance,
)

Table = tuple[tuple[object, float], ...]

# relative frequency of subjects among mentor offers
DEFAULT_POPULARITY: Mapping[str, float] = {
    "Mathematics": 0.20,
    "Hungarian Grammar": 0.09,
    "Hungarian Literature": 0.07,
    "English": 0.14,
    "German": 0.06,
    "History": 0.07,
    "Physics": 0.07,
    "Chemistry": 0.05,
    "Biology": 0.05,
    "Geography": 0.04,
    "Informatics": 0.05,
    "Environmental Studies": 0.04,
    "Natural Science": 0.03,
    "Music": 0.02,
    "Visual Arts": 0.02,
}


@dataclass(frozen=True)
class GeneratorConfig:
    """Distribution tables for synthetic populations.

    Tables are ``((value, probability), ...)`` tuples and must sum to one.
    """

    n_students: int = 80
    n_mentors: int = 40
    seed: int = 0
    school_ratio: float = 0.67
    student_years: tuple[int, ...] = tuple(range(4, 13))
    subject_count: Table = ((1, 0.50), (2, 0.30), (3, 0.10), (4, 0.10))
    hours: Table = ((1, 0.33), (2, 0.33), (3, 0.25), (4, 0.09))
    grades: Table = ((0, 0.25), (2, 0.1875), (3, 0.1875), (4, 0.1875), (5, 0.1875))
    student_group: float = 2 / 3
    help: Table = ((0, 1 / 3), (1, 1 / 3), (2, 1 / 3))
    sd: Table = ((0, 0.65), (1, 0.20), (2, 0.10), (3, 0.05))
    single_parent: float = 0.183
    children: Table = ((1, 0.692), (2, 0.239), (3, 0.052), (4, 0.017))
    ws_mean: float = 0.786
    ws_max: int = 3
    matriculation_11: Table = (("none", 0.4), ("base", 0.4), ("advanced", 0.2))
    matriculation_12: Table = (("base", 0.5), ("advanced", 0.5))
    mentor_group: float = 0.54
    capacity_ranges: Table = (((1, 3), 0.4), ((4, 6), 0.4), ((7, 10), 0.2))
    dm: Table = ((0, 0.5), (1, 0.4), (3, 0.1))
    gpm: Table = (("N", 0.85), ("W", 0.05), ("M", 0.05), ("S", 0.05))
    ym: Table = ((0, 0.05), (1, 0.20), (2, 0.15), (None, 0.60))
    availability: Mapping[str, tuple[int, ...]] = field(default_factory=lambda: dict(DEFAULT_AVAILABILITY))
    popularity: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_POPULARITY))
    popularity_noise: float = 0.2

    def __post_init__(self) -> None:
        if self.n_students < 1 or self.n_mentors < 1:
            raise ValueError("need at least one student and one mentor")
        for name in ("subject_count", "hours", "grades", "help", "sd", "children", "matriculation_11",
                     "matriculation_12", "capacity_ranges", "dm", "gpm", "ym"):
            total = sum(p for _, p in getattr(self, name))
            if not math.isclose(total, 1.0, abs_tol=1e-9):
                raise ValueError(f"table {name} sums to {total}, not 1")
        if set(self.popularity) - set(self.availability):
            raise ValueError("popularity names a subject without availability")
        if not 0 <= self.popularity_noise < 1:
            raise ValueError("popularity_noise must lie in [0, 1)")


def _draw(rng: np.random.Generator, table: Table, size: int) -> list:
    values = [v for v, _ in table]
    idx = rng.choice(len(values), size=size, p=[p for _, p in table])
    return [values[i] for i in idx]


def noisy_popularity(config: GeneratorConfig, rng: np.random.Generator) -> dict[str, float]:
    """Per-instance subject popularity: each base weight times U[1-a, 1+a], renormalised."""
    names = [n for n in SUBJECT_NAMES if n in config.popularity] + sorted(
        set(config.popularity) - set(SUBJECT_NAMES)
    )
    a = config.popularity_noise
    factors = rng.uniform(1 - a, 1 + a, size=len(names))
    raw = {n: config.popularity[n] * f for n, f in zip(names, factors)}
    total = sum(raw.values())
    return {n: v / total for n, v in raw.items()}


def assign_subjects(
    years: Sequence[int | None],
    counts: Sequence[int],
    popularity: Mapping[str, float],
    availability: Mapping[str, Sequence[int]],
    rng: np.random.Generator,
) -> list[list[str]]:
    """Draw distinct subject names per person without replacement.

    A person with a year only draws subjects taught in that year (the
    popularity is renormalised over them); ``None`` means any subject.
    """
    names = list(popularity)
    weights = np.array([popularity[n] for n in names])
    masks: dict[int | None, np.ndarray] = {}
    out = []
    for year, k in zip(years, counts):
        if year not in masks:
            masks[year] = np.array([year is None or year in availability[n] for n in names])
        mask = masks[year]
        p = np.where(mask, weights, 0.0)
        n_available = int((p > 0).sum())
        if n_available == 0:
            raise ValueError(f"no subject available for year {year}")
        k = min(k, n_available)
        picks = rng.choice(len(names), size=k, replace=False, p=p / p.sum())
        out.append([names[i] for i in picks])
    return out


def weak_student_scores(rng: np.random.Generator, size: int, rate: float, cap: int) -> np.ndarray:
    """Poisson scores; draws above ``cap`` are redrawn."""
    values = rng.poisson(rate, size=size)
    bad = values > cap
    while bad.any():
        values[bad] = rng.poisson(rate, size=int(bad.sum()))
        bad = values > cap
    return values


def truncated_poisson_mean(rate: float, cap: int) -> float:
    """E[X | X <= cap] for X ~ Poisson(rate); the expected value of :func:`weak_student_scores`."""
    probs = [math.exp(-rate) * rate**k / math.factorial(k) for k in range(cap + 1)]
    return sum(k * p for k, p in enumerate(probs)) / sum(probs)


def calibrated_rate(target_mean: float, cap: int) -> float:
    """Poisson rate whose draws, redrawn above ``cap``, average ``target_mean``."""
    if not 0 < target_mean < cap / 2:
        raise ValueError("target mean must lie in (0, cap/2)")
    return brentq(lambda r: truncated_poisson_mean(r, cap) - target_mean, 1e-9, 10.0 * cap, xtol=1e-12)


def draw_families(rng: np.random.Generator, size: int, config: "GeneratorConfig") -> tuple[np.ndarray, np.ndarray]:
    """Independent numbers of parents (1 or 2) and children per household."""
    parents = np.where(rng.random(size) < config.single_parent, 1, 2)
    children = np.array(_draw(rng, config.children, size))
    return parents, children


def home_help_index(parents: int, children: int) -> float:
    """Children per parent at home, clamped to [0.5, 2.5]."""
    return min(2.5, max(0.5, children / parents))


def generate_students(
    n: int,
    config: GeneratorConfig,
    rng: np.random.Generator,
    popularity: Mapping[str, float] | None = None,
    id_prefix: str = "s",
) -> list[Student]:
    if n < 1:
        raise ValueError("n must be at least 1")
    popularity = popularity or noisy_popularity(config, rng)
    n_schools = math.ceil(config.school_ratio * n)
    schools = rng.integers(0, n_schools, size=n)
    years = rng.choice(config.student_years, size=n)
    counts = _draw(rng, config.subject_count, n)
    subjects = assign_subjects([int(y) for y in years], counts, popularity, config.availability, rng)
    group = rng.random(n) < config.student_group
    helps = _draw(rng, config.help, n)
    sds = _draw(rng, config.sd, n)
    parents, children = draw_families(rng, n, config)
    ws = weak_student_scores(rng, n, calibrated_rate(config.ws_mean, config.ws_max), config.ws_max)
    m11 = _draw(rng, config.matriculation_11, n)
    m12 = _draw(rng, config.matriculation_12, n)
    width = len(str(n))

    students = []
    for i in range(n):
        year = int(years[i])
        k = len(subjects[i])
        hours = _draw(rng, config.hours, k)
        grades = _draw(rng, config.grades, k)
        requests = tuple(Request(Subject(name, year), int(h), int(g)) for name, h, g in zip(subjects[i], hours, grades))
        students.append(
            Student(
                id=f"{id_prefix}{i:0{width}d}",
                year=year,
                class_id=f"school{int(schools[i]):03d}/{year}",
                requests=requests,
                group=int(group[i]),
                equipment=0,
                help=int(helps[i]),
                sd=int(sds[i]),
                nh=home_help_index(int(parents[i]), int(children[i])),
                ws=int(ws[i]),
                matriculation=m11[i] if year == 11 else m12[i] if year == 12 else "none",
            )
        )
    return students


def subject_count_for_capacity(capacity: int) -> int:
    """Largest number of subjects a mentor with this weekly capacity may offer."""
    return 3 if capacity < 4 else 4 if capacity <= 6 else 5


def generate_mentors(
    m: int,
    config: GeneratorConfig,
    rng: np.random.Generator,
    popularity: Mapping[str, float] | None = None,
    id_prefix: str = "m",
) -> list[Mentor]:
    if m < 1:
        raise ValueError("m must be at least 1")
    popularity = popularity or noisy_popularity(config, rng)
    group = rng.random(m) < config.mentor_group
    ranges = _draw(rng, config.capacity_ranges, m)
    capacities = [int(rng.integers(lo, hi + 1)) for lo, hi in ranges]
    counts = [int(rng.integers(1, subject_count_for_capacity(q) + 1)) for q in capacities]
    offers = assign_subjects([None] * m, counts, popularity, config.availability, rng)
    dms = _draw(rng, config.dm, m)
    gpms = _draw(rng, config.gpm, m)
    yms = _draw(rng, config.ym, m)
    width = len(str(m))
    return [
        Mentor(
            id=f"{id_prefix}{j:0{width}d}",
            # willing to teach every year in which the subject exists
            offers=tuple(Offer(name, tuple(config.availability[name])) for name in offers[j]),
            capacity=capacities[j],
            group=int(group[j]),
            ym=None if yms[j] is None else int(yms[j]),
            dm=int(dms[j]),
            gpm=str(gpms[j]),
        )
        for j in range(m)
    ]


def generate_instance(config: GeneratorConfig, policy: PolicyConfig | None = None) -> Instance:
    """A static instance with ``config.n_students`` students and ``config.n_mentors`` mentors."""
    rng = np.random.default_rng(config.seed)
    popularity = noisy_popularity(config, rng)
    mentors = generate_mentors(config.n_mentors, config, rng, popularity)
    students = generate_students(config.n_students, config, rng, popularity)
    return build_instance(students, mentors, config.availability, policy)


# ---------------------------------------------------------------------------
# dynamic populations


@dataclass(frozen=True)
class TimelineConfig:
    horizon: int = 300
    arrival_rate: float = 1.0
    mentor_ratio: float = 0.5
    student_stay_mean: float = 14.0
    student_stay_sd: float = 2.0
    student_stay_min: int = 7
    mentor_stay_mean: float = 21.0
    mentor_stay_sd: float = 2.0
    mentor_stay_min: int = 14

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.arrival_rate <= 0 or self.mentor_ratio <= 0:
            raise ValueError("arrival rate and mentor ratio must be positive")

    @property
    def n_students(self) -> int:
        return max(1, round(self.arrival_rate * self.horizon))

    @property
    def n_mentors(self) -> int:
        return max(1, round(self.mentor_ratio * self.n_students))


@dataclass(frozen=True)
class Timeline:
    """A dynamic population: everyone carries registration and departure days."""

    horizon: int
    students: tuple[Student, ...]
    mentors: tuple[Mentor, ...]
    availability: Mapping[str, tuple[int, ...]]


def stay_lengths(rng: np.random.Generator, size: int, mean: float, sd: float, minimum: int) -> np.ndarray:
    """Rounded normal stays, floored at ``minimum`` days."""
    return np.maximum(minimum, np.rint(rng.normal(mean, sd, size=size))).astype(int)


def generate_timeline(
    config: TimelineConfig,
    rng: np.random.Generator,
    generator: GeneratorConfig | None = None,
) -> Timeline:
    """Generate a population arriving uniformly over the horizon, with departure days."""
    generator = generator or GeneratorConfig()
    n, m = config.n_students, config.n_mentors
    popularity = noisy_popularity(generator, rng)
    mentors = generate_mentors(m, generator, rng, popularity)
    students = generate_students(n, generator, rng, popularity)
    s_reg = rng.integers(0, config.horizon, size=n)
    m_reg = rng.integers(0, config.horizon, size=m)
    s_stay = stay_lengths(rng, n, config.student_stay_mean, config.student_stay_sd, config.student_stay_min)
    m_stay = stay_lengths(rng, m, config.mentor_stay_mean, config.mentor_stay_sd, config.mentor_stay_min)
    students = [
        replace(s, registration_day=int(r), departure_day=int(r + d)) for s, r, d in zip(students, s_reg, s_stay)
    ]
    mentors = [
        replace(b, registration_day=int(r), departure_day=int(r + d)) for b, r, d in zip(mentors, m_reg, m_stay)
    ]
    return Timeline(config.horizon, tuple(students), tuple(mentors), dict(generator.availability))


def generate_population(
    timeline: TimelineConfig, seed: int, generator: GeneratorConfig | None = None
) -> Timeline:
    return generate_timeline(timeline, np.random.default_rng(seed), generator)
