"""Assembly of the allocation mixed-integer program in solver-neutral form.

Variables (all integer, most binary), keyed by the instance entity they
describe:

========  ===========================================  ===============
tag       meaning                                      key
========  ===========================================  ===============
y_g       potential group realised                     PotentialGroup
x_g       weekly hours of the group (0, 2 or 3)        PotentialGroup
y_et      activity done inside group slot t            (Activity, t)
x_et      hours credited to the student in that group  (Activity, t)
y_e       activity done as a pair                      Activity
x_e       weekly pair hours (0..3)                     Activity
beta      student mentored in a requested subject      (student, Subject)
gamma     student mentored at all                      student
m         student has a pair with the mentor           (student, mentor)
z         two students share group slot t              (i, i', mentor, Subject, t)
========  ===========================================  ===============

The objective is maximised. Every row carries the tag of the rule it encodes
(see :data:`CONSTRAINT_TAGS`).
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

from mentormatch.model import Activity, Instance, PotentialGroup, Solution, Subject
from mentormatch.weights import activity_weight, coherence_from_metrics

VARIABLE_TAGS = ("y_g", "x_g", "y_et", "x_et", "y_e", "x_e", "beta", "gamma", "m", "z")
BINARY_TAGS = frozenset({"y_g", "y_et", "y_e", "beta", "gamma", "m", "z"})

CONSTRAINT_TAGS = (
    "pair_coupling",  # y_e <= x_e <= 3 y_e
    "group_hours",  # 2 y_g <= x_g <= 3 y_g
    "group_realisation",  # 2 y_g <= sum y_et <= c y_g
    "activity",  # y_e + sum_t y_et <= 1
    "subject",  # at most one mentor per requested subject
    "beta_link",
    "gamma_link",
    "mentor_capacity",
    "student_demand",  # x_e <= q
    "member_demand",  # x_et <= q
    "member_hours",  # x_et <= x_g
    "member_coupling",  # x_et <= 3 y_et
    "same_group",
    "mentor_pair",
    "slot_symmetry",
)

LE, EQ, GE = "<=", "=", ">="


@dataclass(frozen=True)
class Variable:
    index: int
    tag: str
    key: Any
    lo: int
    hi: int

    @property
    def kind(self) -> str:
        return "binary" if self.tag in BINARY_TAGS else "integer"

    @property
    def name(self) -> str:
        return f"{self.tag}[{_key_text(self.key)}]".replace(" ", "_")

    @property
    def mps_name(self) -> str:
        return f"C{self.index:07d}"


@dataclass(frozen=True)
class LinearConstraint:
    coefs: tuple[tuple[int, float], ...]
    sense: str
    rhs: float
    tag: str

    def __post_init__(self) -> None:
        if not self.tag:
            raise ValueError("constraint needs a provenance tag")
        if self.sense not in (LE, EQ, GE):
            raise ValueError(f"bad sense {self.sense!r}")

    def activity(self, values: Sequence[float]) -> float:
        return math.fsum(c * values[j] for j, c in self.coefs)

    def violation(self, values: Sequence[float]) -> float:
        lhs = self.activity(values)
        if self.sense == LE:
            return max(0.0, lhs - self.rhs)
        if self.sense == GE:
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


class InfeasibleAssignmentError(ValueError):
    """An assignment violates a model row or is not integral."""

    def __init__(self, tag: str, message: str) -> None:
        super().__init__(f"[{tag}] {message}")
        self.tag = tag


@dataclass
class MilpModel:
    """Maximisation model: integer variables, linear rows and a sparse objective."""

    variables: list[Variable] = field(default_factory=list)
    constraints: list[LinearConstraint] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    run_day: int | None = None
    _index: dict[tuple[str, Any], int] = field(default_factory=dict, repr=False)

    # -- construction -----------------------------------------------------

    def add_variable(self, tag: str, key: Any, lo: int = 0, hi: int = 1) -> int:
        if (tag, key) in self._index:
            raise ValueError(f"duplicate variable {tag}[{key}]")
        index = len(self.variables)
        self.variables.append(Variable(index, tag, key, lo, hi))
        self._index[(tag, key)] = index
        return index

    def add_constraint(self, coefs: Iterable[tuple[int, float]], sense: str, rhs: float, tag: str) -> None:
        merged: dict[int, float] = {}
        for j, c in coefs:
            merged[j] = merged.get(j, 0.0) + c
        row = tuple((j, c) for j, c in merged.items() if c != 0)
        self.constraints.append(LinearConstraint(row, sense, float(rhs), tag))

    # -- lookup -----------------------------------------------------------

    def var(self, tag: str, key: Any) -> int:
        return self._index[(tag, key)]

    def has(self, tag: str, key: Any) -> bool:
        return (tag, key) in self._index

    def by_name(self) -> dict[str, int]:
        names = {v.name: v.index for v in self.variables}
        names.update({v.mps_name: v.index for v in self.variables})
        return names

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    # -- evaluation -------------------------------------------------------

    def evaluate(self, values: Sequence[float]) -> float:
        return math.fsum(c * values[j] for j, c in self.objective.items())

    def first_violation(self, values: Sequence[float], tol: float = 1e-6) -> tuple[int, LinearConstraint] | None:
        for v in self.variables:
            x = values[v.index]
            if x < v.lo - tol or x > v.hi + tol:
                return -1, LinearConstraint(((v.index, 1.0),), LE, v.hi, f"bounds:{v.tag}")
        for i, row in enumerate(self.constraints):
            if row.violation(values) > tol:
                return i, row
        return None

    def arrays(self) -> dict[str, np.ndarray | sparse.csr_matrix]:
        """Dense/sparse arrays: objective ``c``, matrix ``A`` with ``row_lo <= A x <= row_hi``, bounds."""
        n = self.n_vars
        c = np.zeros(n)
        for j, coef in self.objective.items():
            c[j] = coef
        rows, cols, vals = [], [], []
        lo = np.empty(len(self.constraints))
        hi = np.empty(len(self.constraints))
        for i, row in enumerate(self.constraints):
            for j, coef in row.coefs:
                rows.append(i)
                cols.append(j)
                vals.append(coef)
            lo[i] = -np.inf if row.sense == LE else row.rhs
            hi[i] = np.inf if row.sense == GE else row.rhs
        A = sparse.csr_matrix((vals, (rows, cols)), shape=(len(self.constraints), n))
        lb = np.array([v.lo for v in self.variables], dtype=float)
        ub = np.array([v.hi for v in self.variables], dtype=float)
        return {"c": c, "A": A, "row_lo": lo, "row_hi": hi, "lb": lb, "ub": ub}

    def stats(self) -> dict[str, Any]:
        return {
            "variables": dict(sorted(Counter(v.tag for v in self.variables).items())),
            "constraints": dict(sorted(Counter(r.tag for r in self.constraints).items())),
            "n_variables": self.n_vars,
            "n_constraints": len(self.constraints),
            "n_objective_terms": len(self.objective),
        }


def _key_text(key: Any) -> str:
    if isinstance(key, tuple):
        return ",".join(_key_text(k) for k in key)
    return str(key)


# ---------------------------------------------------------------------------


def build_milp(instance: Instance, config=None, run_day: int | None = None) -> MilpModel:
    """Assemble the full model for ``instance`` under ``config`` (defaults to the instance's).

    ``run_day`` is the day of the matching run and is required when the
    waiting-time weight is positive.
    """
    config = config or instance.config
    if config.wait_weight > 0 and run_day is None:
        raise ValueError("run_day is required when wait_weight > 0")
    model = MilpModel(run_day=run_day)
    activities = instance.activities
    groups = instance.potential_groups

    slots_of: dict[tuple[str, Subject], list[PotentialGroup]] = defaultdict(list)
    for g in groups:
        slots_of[(g.mentor_id, g.subject)].append(g)
    eligible = [a for a in activities if instance.group_eligible(a)]

    # variables, grouped by tag
    for g in groups:
        model.add_variable("y_g", g)
    for g in groups:
        model.add_variable("x_g", g, 0, 3)
    for a in eligible:
        for g in slots_of[(a.mentor_id, a.subject)]:
            model.add_variable("y_et", (a, g.slot))
    for a in eligible:
        for g in slots_of[(a.mentor_id, a.subject)]:
            model.add_variable("x_et", (a, g.slot), 0, 3)
    for a in activities:
        model.add_variable("y_e", a)
    for a in activities:
        model.add_variable("x_e", a, 0, 3)

    by_request: dict[tuple[str, Subject], list[Activity]] = defaultdict(list)
    by_student_mentor: dict[tuple[str, str], list[Activity]] = defaultdict(list)
    by_mentor: dict[str, list[Activity]] = defaultdict(list)
    for a in activities:
        by_request[(a.student_id, a.subject)].append(a)
        by_student_mentor[(a.student_id, a.mentor_id)].append(a)
        by_mentor[a.mentor_id].append(a)
    for key in by_request:
        model.add_variable("beta", key)
    students_with_activity = list(dict.fromkeys(a.student_id for a in activities))
    for s in students_with_activity:
        model.add_variable("gamma", s)
    for key in by_student_mentor:
        model.add_variable("m", key)

    members_of: dict[PotentialGroup, list[Activity]] = {
        g: [a for a in eligible if a.mentor_id == g.mentor_id and a.subject == g.subject] for g in groups
    }
    z_keys = []
    for g in groups:
        for n, a in enumerate(members_of[g]):
            for b in members_of[g][n + 1 :]:
                key = (a.student_id, b.student_id, g.mentor_id, g.subject, g.slot)
                model.add_variable("z", key)
                z_keys.append((key, a, b, g))

    V = model.var

    def group_terms(a: Activity) -> list[int]:
        return [V("y_et", (a, g.slot)) for g in slots_of.get((a.mentor_id, a.subject), ()) if model.has("y_et", (a, g.slot))]

    # pair coupling
    for a in activities:
        model.add_constraint([(V("y_e", a), 1), (V("x_e", a), -1)], LE, 0, "pair_coupling")
        model.add_constraint([(V("x_e", a), 1), (V("y_e", a), -3)], LE, 0, "pair_coupling")
    # group hours
    for g in groups:
        model.add_constraint([(V("y_g", g), 2), (V("x_g", g), -1)], LE, 0, "group_hours")
        model.add_constraint([(V("x_g", g), 1), (V("y_g", g), -3)], LE, 0, "group_hours")
    # group realisation
    for g in groups:
        members = [V("y_et", (a, g.slot)) for a in members_of[g]]
        model.add_constraint([(V("y_g", g), 2)] + [(j, -1) for j in members], LE, 0, "group_realisation")
        model.add_constraint([(j, 1) for j in members] + [(V("y_g", g), -g.capacity)], LE, 0, "group_realisation")
    # activity exclusivity
    for a in activities:
        model.add_constraint([(V("y_e", a), 1)] + [(j, 1) for j in group_terms(a)], LE, 1, "activity")
    # one mentor per requested subject
    for key, acts in by_request.items():
        row = [(V("y_e", a), 1) for a in acts] + [(j, 1) for a in acts for j in group_terms(a)]
        model.add_constraint(row, LE, 1, "subject")
    # beta / gamma linkage
    for key, acts in by_request.items():
        row = [(V("beta", key), 1)] + [(V("y_e", a), -1) for a in acts] + [(j, -1) for a in acts for j in group_terms(a)]
        model.add_constraint(row, EQ, 0, "beta_link")
    betas_of: dict[str, list[int]] = defaultdict(list)
    for key in by_request:
        betas_of[key[0]].append(V("beta", key))
    for s in students_with_activity:
        model.add_constraint([(V("gamma", s), 1)] + [(j, -1) for j in betas_of[s]], LE, 0, "gamma_link")
        model.add_constraint([(j, 1) for j in betas_of[s]] + [(V("gamma", s), -config.big_m)], LE, 0, "gamma_link")
    # mentor capacity
    groups_of_mentor: dict[str, list[PotentialGroup]] = defaultdict(list)
    for g in groups:
        groups_of_mentor[g.mentor_id].append(g)
    for mentor in instance.mentors:
        row = [(V("x_e", a), 1) for a in by_mentor.get(mentor.id, ())]
        row += [(V("x_g", g), 1) for g in groups_of_mentor.get(mentor.id, ())]
        if row:
            model.add_constraint(row, LE, mentor.capacity, "mentor_capacity")
    # pair demand cap
    for a in activities:
        q = instance.student(a.student_id).request(a.subject).hours
        model.add_constraint([(V("x_e", a), 1)], LE, q, "student_demand")
    # member hour caps
    for a in eligible:
        q = instance.student(a.student_id).request(a.subject).hours
        for g in slots_of[(a.mentor_id, a.subject)]:
            model.add_constraint([(V("x_et", (a, g.slot)), 1)], LE, q, "member_demand")
    for a in eligible:
        for g in slots_of[(a.mentor_id, a.subject)]:
            model.add_constraint([(V("x_et", (a, g.slot)), 1), (V("x_g", g), -1)], LE, 0, "member_hours")
    # membership-hours coupling
    for a in eligible:
        for g in slots_of[(a.mentor_id, a.subject)]:
            model.add_constraint([(V("x_et", (a, g.slot)), 1), (V("y_et", (a, g.slot)), -3)], LE, 0, "member_coupling")
    # same-group linearisation
    for key, a, b, g in z_keys:
        z, ya, yb = V("z", key), V("y_et", (a, g.slot)), V("y_et", (b, g.slot))
        model.add_constraint([(ya, 1), (yb, 1), (z, -1)], LE, 1, "same_group")
        model.add_constraint([(z, 1), (ya, -1)], LE, 0, "same_group")
        model.add_constraint([(z, 1), (yb, -1)], LE, 0, "same_group")
    # mentor-pair indicator
    for key, acts in by_student_mentor.items():
        m = V("m", key)
        model.add_constraint([(m, 1)] + [(V("y_e", a), -1) for a in acts], LE, 0, "mentor_pair")
        model.add_constraint([(V("y_e", a), 1) for a in acts] + [(m, -config.big_m)], LE, 0, "mentor_pair")
    # interchangeable slots: realise them in order
    for key, slot_groups in slots_of.items():
        for g, h in zip(slot_groups, slot_groups[1:]):
            model.add_constraint([(V("y_g", h), 1), (V("y_g", g), -1)], LE, 0, "slot_symmetry")

    # objective
    weight_cache: dict[Activity, float] = {}
    for a in activities:
        w = activity_weight(instance.student(a.student_id), instance.mentor(a.mentor_id), a.subject, config, run_day)
        weight_cache[a] = w
        model.objective[V("x_e", a)] = w
    for a in eligible:
        for g in slots_of[(a.mentor_id, a.subject)]:
            model.objective[V("x_et", (a, g.slot))] = weight_cache[a] * config.group_weight
    for key, a, b, g in z_keys:
        coef = coherence_from_metrics(instance.pair(a.student_id, b.student_id), g.subject)
        if coef:
            model.objective[V("z", key)] = coef
    for key in by_student_mentor:
        if config.mentor_pair_weight:
            model.objective[V("m", key)] = -config.mentor_pair_weight
    model.objective = {j: c for j, c in model.objective.items() if c != 0}
    return model


def expected_variable_count(instance: Instance) -> int:
    """Closed-form variable count of :func:`build_milp` from the instance's derived sets."""
    n_e = len(instance.activities)
    slots: dict[tuple[str, Subject], int] = Counter((g.mentor_id, g.subject) for g in instance.potential_groups)
    group_members: Counter = Counter()
    n_et = 0
    for a in instance.activities:
        if instance.group_eligible(a):
            n_et += slots[(a.mentor_id, a.subject)]
            group_members[(a.mentor_id, a.subject)] += 1
    n_z = sum(slots[k] * n * (n - 1) // 2 for k, n in group_members.items())
    n_beta = len({(a.student_id, a.subject) for a in instance.activities})
    n_gamma = len({a.student_id for a in instance.activities})
    n_m = len({(a.student_id, a.mentor_id) for a in instance.activities})
    return 2 * len(instance.potential_groups) + 2 * n_et + 2 * n_e + n_beta + n_gamma + n_m + n_z


# ---------------------------------------------------------------------------
# MPS export


def _fmt_num(value: float) -> str:
    if float(value).is_integer():
        text = str(int(value))
    else:
        text = format(value, ".10g")
    if len(text) > 12:
        text = format(value, ".6e")
    return text


def _field_line(f1: str = "", f2: str = "", f3: str = "", f4: str = "", f5: str = "", f6: str = "") -> str:
    line = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:<12}   {f5:<8}  {f6:<12}"
    return line.rstrip()


def export_mps(model: MilpModel, name: str = "MENTOR") -> str:
    """Fixed-format MPS text of ``model``.

    MPS minimises, so the objective row holds the negated coefficients. All
    columns sit between integer markers; variable descriptions are listed in
    comment lines.
    """
    out = [
        "* mentormatch allocation model",
        "* sense: maximise; the OBJ row is negated because MPS minimises",
    ]
    out += [f"* {v.mps_name} {v.name}" for v in model.variables]
    out.append(f"NAME          {name}")
    out.append("ROWS")
    out.append(_field_line("N", "OBJ"))
    sense_code = {LE: "L", GE: "G", EQ: "E"}
    for i, row in enumerate(model.constraints):
        out.append(_field_line(sense_code[row.sense], f"R{i:07d}"))
    out.append("COLUMNS")
    column_entries: list[list[tuple[str, float]]] = [[] for _ in model.variables]
    for j, coef in sorted(model.objective.items()):
        column_entries[j].append(("OBJ", -coef))
    for i, row in enumerate(model.constraints):
        for j, coef in row.coefs:
            column_entries[j].append((f"R{i:07d}", coef))
    if model.variables:
        out.append(_field_line("", "MARKER", "'MARKER'", "", "'INTORG'"))
        for v in model.variables:
            entries = column_entries[v.index]
            if not entries:
                # a column must appear to be declared
                entries = [("OBJ", 0.0)]
            for k in range(0, len(entries), 2):
                pair = entries[k : k + 2]
                fields = [v.mps_name, pair[0][0], _fmt_num(pair[0][1])]
                if len(pair) == 2:
                    fields += [pair[1][0], _fmt_num(pair[1][1])]
                out.append(_field_line("", *fields))
        out.append(_field_line("", "MARKER", "'MARKER'", "", "'INTEND'"))
    out.append("RHS")
    rhs = [(f"R{i:07d}", row.rhs) for i, row in enumerate(model.constraints) if row.rhs != 0]
    for k in range(0, len(rhs), 2):
        pair = rhs[k : k + 2]
        fields = ["RHS", pair[0][0], _fmt_num(pair[0][1])]
        if len(pair) == 2:
            fields += [pair[1][0], _fmt_num(pair[1][1])]
        out.append(_field_line("", *fields))
    out.append("BOUNDS")
    for v in model.variables:
        if v.lo != 0:
            out.append(_field_line("LO", "BND", v.mps_name, _fmt_num(v.lo)))
        out.append(_field_line("UP", "BND", v.mps_name, _fmt_num(v.hi)))
    out.append("ENDATA")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# solution extraction


def as_value_array(model: MilpModel, assignment: Mapping[str, float] | Sequence[float] | np.ndarray) -> np.ndarray:
    """Normalise an assignment given by variable name (or MPS column name) or by position."""
    if isinstance(assignment, Mapping):
        names = model.by_name()
        values = np.zeros(model.n_vars)
        for key, value in assignment.items():
            if key not in names:
                raise KeyError(f"unknown variable {key!r}")
            values[names[key]] = value
        return values
    values = np.asarray(assignment, dtype=float)
    if values.shape != (model.n_vars,):
        raise ValueError(f"assignment has {values.shape} entries, model has {model.n_vars} variables")
    return values


def check_assignment(model: MilpModel, values: np.ndarray, tol: float = 1e-6) -> None:
    """Raise :class:`InfeasibleAssignmentError` naming the first violated rule."""
    for v in model.variables:
        if abs(values[v.index] - round(values[v.index])) > tol:
            raise InfeasibleAssignmentError("integrality", f"{v.name} = {values[v.index]} is not integral")
    hit = model.first_violation(values, tol)
    if hit is not None:
        i, row = hit
        raise InfeasibleAssignmentError(row.tag, f"row {i} violated by {row.violation(values):.3g}")


def extract_solution(
    model: MilpModel,
    assignment: Mapping[str, float] | Sequence[float] | np.ndarray,
    instance: Instance,
    tol: float = 1e-6,
    check: bool = True,
) -> Solution:
    """Turn a feasible model assignment into a :class:`Solution`.

    ``check=False`` skips the row check, for decoding assignments of mutated
    models that the solution validator is then expected to reject.
    """
    values = as_value_array(model, assignment)
    if check:
        check_assignment(model, values, tol)
    x = np.rint(values).astype(int)
    pairs: dict[Activity, int] = {}
    groups: dict[PotentialGroup, int] = {}
    members: dict[tuple[Activity, int], int] = {}
    for v in model.variables:
        if v.tag == "y_e" and x[v.index]:
            pairs[v.key] = int(x[model.var("x_e", v.key)])
        elif v.tag == "y_g" and x[v.index]:
            groups[v.key] = int(x[model.var("x_g", v.key)])
    realised = {(g.mentor_id, g.subject, g.slot) for g in groups}
    for v in model.variables:
        if v.tag == "y_et" and x[v.index]:
            a, t = v.key
            if (a.mentor_id, a.subject, t) in realised:
                members[v.key] = int(x[model.var("x_et", v.key)])
    return Solution(pairs, members, groups)


def solution_to_values(model: MilpModel, instance: Instance, solution: Solution) -> np.ndarray:
    """Inverse of :func:`extract_solution`: the model assignment encoding ``solution``."""
    x = np.zeros(model.n_vars)
    for a, h in solution.pairs.items():
        x[model.var("y_e", a)] = 1
        x[model.var("x_e", a)] = h
        x[model.var("m", (a.student_id, a.mentor_id))] = 1
    for g, h in solution.groups.items():
        x[model.var("y_g", g)] = 1
        x[model.var("x_g", g)] = h
    in_slot: dict[tuple[str, Subject, int], list[Activity]] = defaultdict(list)
    for (a, t), h in solution.group_assignments.items():
        x[model.var("y_et", (a, t))] = 1
        x[model.var("x_et", (a, t))] = h
        in_slot[(a.mentor_id, a.subject, t)].append(a)
    for (mentor_id, subject, t), acts in in_slot.items():
        for a in acts:
            for b in acts:
                key = (a.student_id, b.student_id, mentor_id, subject, t)
                if model.has("z", key):
                    x[model.var("z", key)] = 1
    for student_id, subject in solution.matched_requests():
        x[model.var("beta", (student_id, subject))] = 1
        x[model.var("gamma", student_id)] = 1
    return x
