import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mentormatch.config import PolicyConfig
from mentormatch.model import (
    Activity,
    InstanceError,
    PotentialGroup,
    Request,
    Solution,
    SolutionReferenceError,
    Student,
    Subject,
    build_instance,
    instance_from_json,
    pair_metrics,
    solution_from_dict,
    solution_volume,
    validate_solution,
)
from mentormatch.solver import brute_force
from mentormatch.verify import random_tiny_instance

from conftest import MATH7, PHYS7, instance_of, mentor, student


def test_single_compatible_triple():
    inst = instance_of([student()], [mentor()])
    assert inst.activities == (Activity("s1", "m1", MATH7),)


def test_no_common_subject():
    inst = instance_of([student()], [mentor(subjects=("Physics",))])
    assert inst.activities == ()


def test_group_willing_trio_gets_five_slots(group_pair):
    assert len(group_pair.activities) == 2
    assert len(group_pair.potential_groups) == 5
    assert [g.slot for g in group_pair.potential_groups] == [1, 2, 3, 4, 5]


def test_offer_years_restrict_activities():
    from mentormatch.model import Mentor, Offer

    m = Mentor("m1", (Offer("Mathematics", (9, 10)),), capacity=3)
    assert instance_of([student()], [m]).activities == ()


def test_duplicate_ids_rejected():
    with pytest.raises(InstanceError):
        instance_of([student("a"), student("a")], [mentor()])
    with pytest.raises(InstanceError):
        instance_of([student("a")], [mentor("a")])


def test_unavailable_subject_rejected():
    with pytest.raises(InstanceError):
        build_instance([student(requests=((Subject("Physics", 3), 1, 0),), year=3)], [mentor()])


@pytest.mark.parametrize(
    "kwargs",
    [
        {"year": 13},
        {"requests": ()},
        {"requests": ((MATH7, 1, 0), (MATH7, 2, 0))},
        {"nh": 0.7},
        {"sd": 4},
        {"registration_day": 5, "departure_day": 5},
    ],
)
def test_student_invariants(kwargs):
    with pytest.raises(InstanceError):
        student(**kwargs)


def test_request_bounds():
    with pytest.raises(InstanceError):
        Request(MATH7, 5, 0)
    with pytest.raises(InstanceError):
        Request(MATH7, 1, 6)


def test_critical_year_and_rank():
    assert student(year=12, requests=((Subject("Mathematics", 12), 1, 0),)).cy == 2
    assert student(year=11, requests=((Subject("Mathematics", 11), 1, 0),)).cy == 1
    s = student(requests=((MATH7, 1, 0), (PHYS7, 2, 0)))
    assert s.cy == 0 and s.rank(PHYS7) == 2


@pytest.mark.parametrize("gpm,flag,sm,wm", [("N", 0, 1, 0), ("W", 1, 3, 1.5), ("M", 1, 0, 3), ("S", 1, 0, 4.5)])
def test_grade_preference_constants(gpm, flag, sm, wm):
    m = mentor(gpm=gpm)
    assert (m.grade_flag, m.sm, m.wm) == (flag, sm, wm)


@given(
    st.sampled_from(["c1", "c2"]), st.sampled_from(["c1", "c2"]),
    st.integers(0, 1), st.integers(0, 1),
    st.integers(1, 4), st.integers(1, 4), st.integers(0, 5), st.integers(0, 5),
)
def test_pair_metrics_symmetric(c1, c2, e1, e2, q1, q2, g1, g2):
    a = student("a", ((MATH7, q1, g1),), group=1, class_id=c1, equipment=e1)
    b = student("b", ((MATH7, q2, g2),), group=1, class_id=c2, equipment=e2)
    ab, ba = pair_metrics(a, b), pair_metrics(b, a)
    assert (ab.sc, ab.de, dict(ab.dr), dict(ab.dg)) == (ba.sc, ba.de, dict(ba.dr), dict(ba.dg))
    assert ab.dr[MATH7] == abs(q1 - q2) and ab.dg[MATH7] == abs(g1 - g2)


def test_empty_solution_feasible(group_pair):
    assert validate_solution(group_pair, Solution()).feasible
    assert solution_volume(group_pair, Solution()) == 0


def test_capacity_violation():
    inst = instance_of([student(requests=((MATH7, 3, 0),))], [mentor(capacity=2)])
    report = validate_solution(inst, Solution({inst.activities[0]: 3}))
    assert [v.constraint for v in report.violations] == ["mentor_capacity"]


def test_pair_hours_capped_by_request(single_pair):
    report = validate_solution(single_pair, Solution({single_pair.activities[0]: 3}))
    assert [v.constraint for v in report.violations] == ["pair_hours"]


def test_single_member_group_violates_size(group_pair):
    g = group_pair.potential_groups[0]
    a = group_pair.activities[0]
    report = validate_solution(group_pair, Solution({}, {(a, 1): 2}, {g: 2}))
    assert "group_size" in [v.constraint for v in report.violations]


def test_group_volume(group_pair):
    g = group_pair.potential_groups[0]
    a, b = group_pair.activities
    sol = Solution({}, {(a, 1): 2, (b, 1): 2}, {g: 2})
    assert validate_solution(group_pair, sol).feasible
    assert solution_volume(group_pair, sol, 0.7) == pytest.approx(2.8)
    assert solution_volume(group_pair, Solution({a: 2})) == 2.0


def test_member_hours_bounded_by_group_hours(group_pair):
    g = group_pair.potential_groups[0]
    a, b = group_pair.activities
    report = validate_solution(group_pair, Solution({}, {(a, 1): 3, (b, 1): 2}, {g: 2}))
    assert [v.constraint for v in report.violations] == ["member_hours"]


def test_subject_at_most_once(group_pair):
    g = group_pair.potential_groups[0]
    a, b = group_pair.activities
    report = validate_solution(group_pair, Solution({a: 1}, {(a, 1): 2, (b, 1): 2}, {g: 2}))
    assert "subject" in [v.constraint for v in report.violations]


def test_unrealised_group_membership(group_pair):
    a, _ = group_pair.activities
    report = validate_solution(group_pair, Solution({}, {(a, 2): 1}, {}))
    assert [v.constraint for v in report.violations] == ["group_realisation"]


def test_dangling_reference_is_structural(single_pair):
    with pytest.raises(SolutionReferenceError):
        validate_solution(single_pair, Solution({Activity("ghost", "m1", MATH7): 1}))


def test_unwilling_student_in_group():
    inst = instance_of(
        [student("s1", group=1), student("s2", group=0)], [mentor(group=1)]
    )
    g = inst.potential_groups[0]
    a, b = inst.activities
    report = validate_solution(inst, Solution({}, {(a, 1): 2, (b, 1): 2}, {g: 2}))
    assert "group_willingness" in [v.constraint for v in report.violations]


def test_perturbed_optimum_fails_validation():
    """Pushing any pair's hours past q or Q makes an optimal solution infeasible."""
    checked = 0
    for seed in range(30):
        inst, day = random_tiny_instance(np.random.default_rng(seed))
        sol = brute_force(inst, run_day=day).solution
        for a, h in sol.pairs.items():
            q = inst.student(a.student_id).request(a.subject).hours
            cap = inst.mentor(a.mentor_id).capacity
            bumped = dict(sol.pairs)
            bumped[a] = max(q, cap, 3) + 1
            assert not validate_solution(inst, Solution(bumped, sol.group_assignments, sol.groups)).feasible
            checked += 1
    assert checked > 10


def test_json_round_trip(group_pair):
    text = group_pair.to_json()
    back = instance_from_json(text)
    assert back.to_json() == text
    assert set(json.loads(text)) == {"students", "mentors", "subjects", "config"}
    assert back.activities == group_pair.activities


def test_config_defaults_for_absent_keys():
    data = json.loads(instance_of([student()], [mentor()], PolicyConfig(group_weight=0.5)).to_json())
    data["config"] = {"group_weight": 0.5}
    assert instance_from_json(json.dumps(data)).config == PolicyConfig(group_weight=0.5)


def test_solution_round_trip(group_pair):
    g = group_pair.potential_groups[0]
    a, b = group_pair.activities
    sol = Solution({}, {(a, 1): 2, (b, 1): 1}, {g: 3})
    assert solution_from_dict(json.loads(json.dumps(sol.to_dict())), group_pair) == sol


def test_potential_group_capacity_override():
    inst = instance_of([student("s1", group=1), student("s2", group=1)], [mentor(group=1, group_capacity=3)])
    assert all(g.capacity == 3 for g in inst.potential_groups)
    assert PotentialGroup("m1", MATH7, 1) == inst.potential_groups[0]


def test_big_m_must_cover_requests():
    s = Student("s", 7, "c", tuple(Request(Subject(n, 7), 1, 0) for n in ("Mathematics", "Physics", "English")))
    with pytest.raises(InstanceError):
        instance_of([s], [mentor()], PolicyConfig(big_m=2))
