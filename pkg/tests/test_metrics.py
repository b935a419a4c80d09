import csv
import io
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mentormatch.config import PolicyConfig
from mentormatch.metrics import (
    MEASURES,
    InfeasibleSolutionError,
    MeasureVector,
    aggregate,
    csv_text,
    evaluate,
    objective_value,
    quartiles,
    summarize,
    to_long,
)
from mentormatch.model import Solution
from mentormatch.solver import brute_force
from mentormatch.verify import random_tiny_instance

from conftest import instance_of, mentor, student


def test_empty_solution_scores_zero(group_pair):
    assert evaluate(group_pair, Solution()) == MeasureVector()
    assert objective_value(group_pair, Solution()) == 0


def test_single_pair_measures(single_pair):
    sol = Solution({single_pair.activities[0]: 2})
    v = evaluate(single_pair, sol)
    assert (v.solo_time, v.solo_number, v.mentor_capacity_used, v.number_students, v.mentor_pairs) == (2, 1, 2, 1, 1)
    assert v.volume == 2 and v.group_number == 0 and v.preference == 13 and v.social == 0.5
    assert objective_value(single_pair, sol) == pytest.approx(122)


def test_group_measures(group_pair):
    g = group_pair.potential_groups[0]
    a, b = group_pair.activities
    sol = Solution({}, {(a, 1): 2, (b, 1): 2}, {g: 2})
    v = evaluate(group_pair, sol, PolicyConfig(group_weight=0.7))
    assert v.group_time == 4 and v.volume == pytest.approx(2.8)
    assert v.group_number == 1 and v.number_students == 2 and v.solo_number == 0
    assert v.number_pairs_groups == pytest.approx(0 + 0.7 * 2)
    assert v.mentor_capacity_used == 2
    # same class, no equipment difference, grades 3 vs 4, hours 3 vs 2
    assert v.group_connection == 10 - 1 - 1


def test_group_discount_toggle(group_pair):
    g = group_pair.potential_groups[0]
    a, b = group_pair.activities
    sol = Solution({}, {(a, 1): 2, (b, 1): 2}, {g: 2})
    plain = evaluate(group_pair, sol, discount_groups=False)
    discounted = evaluate(group_pair, sol)
    assert discounted.preference == pytest.approx(0.7 * plain.preference)
    assert discounted.social == pytest.approx(0.7 * plain.social)


def test_infeasible_solution_refused(single_pair):
    bad = Solution({single_pair.activities[0]: 3})
    with pytest.raises(InfeasibleSolutionError):
        evaluate(single_pair, bad)
    with pytest.raises(InfeasibleSolutionError):
        objective_value(single_pair, bad)


@pytest.mark.parametrize("seed", range(25))
def test_measure_invariants_on_optima(seed):
    inst, day = random_tiny_instance(np.random.default_rng(seed))
    sol = brute_force(inst, run_day=day).solution
    v = evaluate(inst, sol)
    wg = inst.config.group_weight
    assert v.solo_number == len(sol.pairs) and v.group_number == len(sol.groups)
    assert v.volume == pytest.approx(v.solo_time + wg * v.group_time)
    assert v.number_pairs_groups == pytest.approx(v.solo_number + wg * len(sol.group_assignments))
    assert v.mentor_capacity_used <= sum(m.capacity for m in inst.mentors)
    assert v.number_students == len(sol.matched_students())


def test_measure_vector_arithmetic():
    a = MeasureVector(volume=2, solo_number=1)
    b = MeasureVector(volume=1)
    assert (a + b).volume == 3 and a.dominates(b) and not b.dominates(a)
    assert list(a.as_dict()) == list(MEASURES)


@pytest.mark.parametrize(
    "values,expected",
    [([5], (5, 5, 5)), ([1, 2], (1, 1.5, 2)), ([1, 2, 3, 4, 5, 6, 7], (2, 4, 6)), ([1, 2, 3, 4, 5, 6, 7, 8], (2.5, 4.5, 6.5))],
)
def test_quartile_examples(values, expected):
    assert quartiles(values) == expected


@given(st.lists(st.integers(-1000, 1000), min_size=1, max_size=40))
def test_quartiles_against_direct_halves(values):
    data = np.sort(np.array(values, dtype=float))
    n = len(data)
    q1, med, q3 = quartiles(values)
    assert med == pytest.approx(np.median(data))
    if n > 1:
        assert q1 == pytest.approx(np.median(data[: n // 2]))
        assert q3 == pytest.approx(np.median(data[(n + 1) // 2 :]))
    assert data[0] <= q1 <= med <= q3 <= data[-1]


def test_constant_measure_has_zero_iqr():
    s = summarize([3.0] * 9)
    assert s["q3"] - s["q1"] == 0 and s["mean"] == 3


def _rows(seed):
    rng = random.Random(seed)
    return [
        {"cell": c, "seed": k, **{m: rng.randint(0, 20) for m in MEASURES}}
        for c in ("a", "b") for k in range(7)
    ]


@given(st.randoms(use_true_random=False))
def test_aggregate_permutation_invariant(rnd):
    rows = _rows(1)
    shuffled = rows[:]
    rnd.shuffle(shuffled)
    assert aggregate(rows, ["cell"]) == aggregate(shuffled, ["cell"])


def test_aggregate_single_row_collapses():
    out = aggregate(_rows(2)[:1], ["cell"])
    assert out[0]["n"] == 1
    assert out[0]["volume_q1"] == out[0]["volume_median"] == out[0]["volume_q3"] == out[0]["volume_mean"]


def test_aggregate_rejects_empty():
    with pytest.raises(ValueError):
        aggregate([], ["cell"])


def test_long_and_wide_csv():
    rows = _rows(3)[:2]
    wide = list(csv.reader(io.StringIO(csv_text(rows, ["cell", "seed", *MEASURES]))))
    assert wide[0] == ["cell", "seed", *MEASURES] and len(wide) == 3
    long_rows = to_long(rows, ["cell", "seed"])
    assert len(long_rows) == 2 * len(MEASURES)
    assert {r["measure"] for r in long_rows} == set(MEASURES)
    text = csv_text(long_rows, meta={"tool": "x"})
    assert text.startswith("# meta: ") and text == csv_text(long_rows, meta={"tool": "x"})


def test_csv_float_formatting_is_stable():
    text = csv_text([{"x": 0.1 + 0.2, "y": None, "z": 3}])
    assert text.splitlines()[1] == "0.3,,3"


def test_objective_uses_waiting_day():
    inst = instance_of([student(registration_day=2)], [mentor(registration_day=4)], PolicyConfig(wait_weight=1))
    sol = Solution({inst.activities[0]: 2})
    assert objective_value(inst, sol, run_day=10) == pytest.approx(2 * (63.5 + 8 + 6) - 5)
