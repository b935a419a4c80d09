import collections

import highspy
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mentormatch.config import PolicyConfig
from mentormatch.generator import GeneratorConfig, generate_instance
from mentormatch.metrics import objective_value
from mentormatch.milp import (
    CONSTRAINT_TAGS,
    InfeasibleAssignmentError,
    MilpModel,
    build_milp,
    check_assignment,
    expected_variable_count,
    export_mps,
    extract_solution,
    solution_to_values,
)
from mentormatch.model import Solution, validate_solution
from mentormatch.solver import brute_force, solve
from mentormatch.verify import drop_constraints, random_tiny_instance

from conftest import instance_of, mentor, student


def tiny(seed):
    return random_tiny_instance(np.random.default_rng(seed))


def test_single_pair_variables(single_pair):
    model = build_milp(single_pair)
    assert sorted(v.tag for v in model.variables) == sorted(["x_e", "y_e", "beta", "gamma", "m"])
    assert all(c.tag for c in model.constraints)
    x_e = model.var("x_e", single_pair.activities[0])
    assert model.variables[x_e].hi == 3 and model.variables[x_e].kind == "integer"
    assert model.objective[x_e] == 63.5


def test_group_pair_counts(group_pair):
    model = build_milp(group_pair)
    counts = collections.Counter(v.tag for v in model.variables)
    assert counts["y_g"] == counts["x_g"] == 5
    assert counts["y_et"] == counts["x_et"] == 10
    assert counts["z"] == 5
    assert model.n_vars == expected_variable_count(group_pair)


def test_empty_instance_gives_empty_model():
    inst = instance_of([student()], [mentor(subjects=("Physics",))])
    model = build_milp(inst)
    assert model.n_vars == 0 and model.constraints == []
    result = solve(model)
    assert result.status == "optimal" and result.objective == 0


@settings(max_examples=60)
@given(st.integers(0, 10_000))
def test_variable_count_closed_form(seed):
    inst, day = tiny(seed)
    assert build_milp(inst, run_day=day).n_vars == expected_variable_count(inst)


def _enumerated_count(instance):
    """Variable count by direct enumeration of the model's index sets."""
    n = 0
    for g in instance.potential_groups:
        members = [a for a in instance.activities if a.mentor_id == g.mentor_id and a.subject == g.subject
                   and instance.group_eligible(a)]
        n += 2 + 2 * len(members) + len(members) * (len(members) - 1) // 2
    n += 2 * len(instance.activities)
    n += len({(a.student_id, a.subject) for a in instance.activities})
    n += len({a.student_id for a in instance.activities})
    n += len({(a.student_id, a.mentor_id) for a in instance.activities})
    return n


def test_scale_model_builds_and_counts():
    inst = generate_instance(GeneratorConfig(n_students=80, n_mentors=40, seed=1))
    model = build_milp(inst)
    assert model.n_vars == expected_variable_count(inst) == _enumerated_count(inst)
    assert set(model.stats()["constraints"]) <= set(CONSTRAINT_TAGS)


def test_every_objective_term_references_a_variable(group_pair):
    model = build_milp(group_pair)
    assert all(0 <= j < model.n_vars for j in model.objective)


def test_member_coupling_present_and_needed(group_pair):
    model = build_milp(group_pair)
    assert "member_coupling" in model.stats()["constraints"]
    a, _ = group_pair.activities
    x = np.zeros(model.n_vars)
    # group hours credited to a student who is not a member
    x[model.var("x_et", (a, 1))] = 2
    with pytest.raises(InfeasibleAssignmentError) as err:
        check_assignment(model, x)
    assert err.value.tag in ("member_hours", "member_coupling")
    x[model.var("y_g", group_pair.potential_groups[0])] = 0
    relaxed = drop_constraints("member_coupling")(drop_constraints("member_hours")(model))
    check_assignment(relaxed, x)  # accepted once the member rows are gone
    assert relaxed.evaluate(x) > 0


def test_extract_rejects_unrealised_member(group_pair):
    model = build_milp(group_pair)
    a, _ = group_pair.activities
    x = np.zeros(model.n_vars)
    x[model.var("y_et", (a, 1))] = 1
    with pytest.raises(InfeasibleAssignmentError) as err:
        extract_solution(model, x, group_pair)
    assert err.value.tag == "group_realisation"


def test_extract_all_zero(group_pair):
    model = build_milp(group_pair)
    assert extract_solution(model, np.zeros(model.n_vars), group_pair).is_empty()


def test_extract_rejects_fractional(single_pair):
    model = build_milp(single_pair)
    x = np.zeros(model.n_vars)
    x[0] = 0.5
    with pytest.raises(InfeasibleAssignmentError) as err:
        check_assignment(model, x)
    assert err.value.tag == "integrality"


def test_extract_by_name(single_pair):
    model = build_milp(single_pair)
    a = single_pair.activities[0]
    named = {model.variables[model.var(t, k)].name: 1 for t, k in
             (("y_e", a), ("beta", ("s1", a.subject)), ("gamma", "s1"), ("m", ("s1", "m1")))}
    named[model.variables[model.var("x_e", a)].name] = 2
    sol = extract_solution(model, named, single_pair)
    assert sol == Solution({a: 2})


@settings(max_examples=80)
@given(st.integers(0, 10_000))
def test_solution_round_trip_and_objective(seed):
    """solution -> assignment -> solution, and the model objective equals the recomputed one."""
    inst, day = tiny(seed)
    model = build_milp(inst, run_day=day)
    sol = brute_force(inst, run_day=day).solution
    x = solution_to_values(model, inst, sol)
    check_assignment(model, x)
    assert extract_solution(model, x, inst) == sol
    assert validate_solution(inst, sol).feasible
    assert model.evaluate(x) == pytest.approx(objective_value(inst, sol, run_day=day), abs=1e-6)


def test_run_day_required_with_waiting(single_pair):
    with pytest.raises(ValueError):
        build_milp(single_pair, PolicyConfig(wait_weight=1))


def test_mps_deterministic_and_shaped(single_pair):
    model = build_milp(single_pair)
    text = export_mps(model)
    assert text == export_mps(build_milp(single_pair))
    assert "'INTORG'" in text and "'INTEND'" in text and text.rstrip().endswith("ENDATA")
    coupling = [i for i, c in enumerate(model.constraints) if c.tag == "pair_coupling"]
    assert len(coupling) == 2
    assert export_mps(MilpModel()) == export_mps(MilpModel())


def _highs_from_mps(text, tmp_path):
    path = tmp_path / "model.mps"
    path.write_text(text)
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.readModel(str(path))
    h.run()
    return h


@pytest.mark.parametrize("seed", [3, 11, 17, 42])
def test_mps_round_trip_with_external_solver(seed, tmp_path):
    inst, day = tiny(seed)
    model = build_milp(inst, run_day=day)
    h = _highs_from_mps(export_mps(model), tmp_path)
    assert h.getLp().num_col_ == model.n_vars
    assert h.getLp().num_row_ == len(model.constraints)
    # MPS minimises the negated objective
    assert -h.getInfo().objective_function_value == pytest.approx(solve(model).objective, abs=1e-6)


def test_mps_round_trip_at_scale(tmp_path):
    inst = generate_instance(GeneratorConfig(n_students=20, n_mentors=10, seed=4))
    model = build_milp(inst)
    h = _highs_from_mps(export_mps(model), tmp_path)
    lp = h.getLp()
    assert (lp.num_col_, lp.num_row_) == (model.n_vars, len(model.constraints))
    assert np.allclose(-np.asarray(lp.col_cost_), model.arrays()["c"])
