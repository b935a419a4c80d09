"""Exact maximisation of the allocation program.

:func:`solve` runs a deterministic branch-and-bound over LP relaxations
(HiGHS dual simplex, warm-started between nodes). :func:`brute_force` is an
independent oracle for tiny instances: it enumerates pair/group structures
and hours directly from the instance and never touches the model.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Mapping

import highspy
import numpy as np

from mentormatch.config import PolicyConfig
from mentormatch.milp import EQ, GE, LE, LinearConstraint, MilpModel, as_value_array, build_milp, extract_solution
from mentormatch.model import Activity, Instance, PotentialGroup, Solution, Subject
from mentormatch.weights import activity_weight, coherence_from_metrics

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
GAP_REACHED = "gap_reached"
LIMIT_REACHED = "limit_reached"

# branching priority by variable tag: groups decide the structure
_TAG_PRIORITY = {"y_g": 0, "y_et": 1, "y_e": 2, "m": 3, "z": 3, "beta": 3, "gamma": 3}
_INTEGER_PRIORITY = 4

PRUNE_TOL = 1e-6
METHODS = ("bnb", "highs")


@dataclass(frozen=True)
class SolveLimits:
    time_limit: float = math.inf
    node_limit: int | None = None
    gap: float = 0.0
    int_tol: float = 1e-6

    def __post_init__(self) -> None:
        if not 0.0 <= self.gap < 1.0:
            raise ValueError("gap must lie in [0, 1)")


@dataclass
class SolveResult:
    """Outcome of a solve.

    ``values`` is the model assignment (None for :func:`brute_force`, which
    returns ``solution`` instead). ``trace`` holds (node, incumbent, bound)
    triples in processing order.
    """

    status: str
    objective: float
    bound: float
    nodes: int
    wall_time: float
    values: np.ndarray | None = None
    solution: Solution | None = None
    trace: list[tuple[int, float, float]] = field(default_factory=list, repr=False)

    @property
    def proven_optimal(self) -> bool:
        return self.status == OPTIMAL

    @property
    def gap(self) -> float:
        return relative_gap(self.objective, self.bound)

    def assignment(self, model: MilpModel) -> dict[str, int]:
        if self.values is None:
            raise ValueError("no model assignment attached")
        return {v.name: int(round(self.values[v.index])) for v in model.variables}


def relative_gap(incumbent: float, bound: float) -> float:
    return max(0.0, bound - incumbent) / max(abs(incumbent), 1e-9)


# ---------------------------------------------------------------------------
# LP relaxation


class LpRelaxation:
    """The continuous relaxation of a model, re-solved under changing column bounds."""

    def __init__(self, model: MilpModel) -> None:
        arrays = model.arrays()
        self.n = model.n_vars
        self.lb = arrays["lb"]
        self.ub = arrays["ub"]
        self.highs = highspy.Highs()
        self.highs.setOptionValue("output_flag", False)
        self.highs.setOptionValue("threads", 1)
        self.highs.setOptionValue("presolve", "off")
        self.highs.setOptionValue("primal_feasibility_tolerance", 1e-7)
        self.highs.setOptionValue("dual_feasibility_tolerance", 1e-7)
        lp = highspy.HighsLp()
        lp.num_col_ = self.n
        lp.num_row_ = len(model.constraints)
        lp.col_cost_ = arrays["c"]
        lp.col_lower_ = self.lb
        lp.col_upper_ = self.ub
        lp.row_lower_ = arrays["row_lo"]
        lp.row_upper_ = arrays["row_hi"]
        lp.sense_ = highspy.ObjSense.kMaximize
        A = arrays["A"].tocsc()
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = A.indptr
        lp.a_matrix_.index_ = A.indices
        lp.a_matrix_.value_ = A.data
        lp.a_matrix_.num_col_ = self.n
        lp.a_matrix_.num_row_ = len(model.constraints)
        self.highs.passModel(lp)
        self._all = np.arange(self.n, dtype=np.int32)

    def solve(self, lb: np.ndarray, ub: np.ndarray) -> tuple[float, np.ndarray] | None:
        """Optimal value and point under the given bounds, or None when infeasible."""
        self.highs.changeColsBounds(self.n, self._all, lb, ub)
        self.highs.run()
        status = self.highs.getModelStatus()
        if status == highspy.HighsModelStatus.kInfeasible:
            return None
        if status != highspy.HighsModelStatus.kOptimal:
            # retry from scratch once; numerical trouble after many warm starts
            self.highs.clearSolver()
            self.highs.run()
            status = self.highs.getModelStatus()
            if status == highspy.HighsModelStatus.kInfeasible:
                return None
            if status != highspy.HighsModelStatus.kOptimal:
                raise RuntimeError(f"LP relaxation ended with status {self.highs.modelStatusToString(status)}")
        x = np.asarray(self.highs.getSolution().col_value)
        return float(self.highs.getInfo().objective_function_value), x


def lp_bound(model: MilpModel, fixed_vars: Mapping[Any, float] | None = None) -> float | None:
    """Value of the LP relaxation with some variables fixed; None if that is infeasible.

    ``fixed_vars`` maps variable names, MPS column names or indices to values.
    """
    if model.n_vars == 0:
        return 0.0
    relaxation = LpRelaxation(model)
    lb, ub = relaxation.lb.copy(), relaxation.ub.copy()
    names = model.by_name()
    for key, value in (fixed_vars or {}).items():
        j = key if isinstance(key, (int, np.integer)) else names[key]
        if not model.variables[j].lo <= value <= model.variables[j].hi:
            return None
        lb[j] = ub[j] = value
    out = relaxation.solve(lb, ub)
    return None if out is None else out[0]


# ---------------------------------------------------------------------------
# branch and bound


def strengthen(model: MilpModel) -> MilpModel:
    """Copy of ``model`` with big-M coupling rows tightened.

    A row ``x - U*y <= 0`` with binary ``y`` whose ``x`` is capped at ``u < U``
    by a single-variable row becomes ``x - u*y <= 0``. Integer-feasible points
    are unchanged; the LP relaxation gets tighter.
    """
    cap = {v.index: float(v.hi) for v in model.variables}
    for row in model.constraints:
        if row.sense == LE and len(row.coefs) == 1 and row.coefs[0][1] > 0:
            j, c = row.coefs[0]
            cap[j] = min(cap[j], math.floor(row.rhs / c))
    binary = {v.index for v in model.variables if v.kind == "binary"}
    rows = []
    for row in model.constraints:
        if row.sense == LE and row.rhs == 0 and len(row.coefs) == 2:
            (j, a), (k, b) = row.coefs
            if a == 1 and b < 0 and k in binary and cap[j] < -b:
                row = LinearConstraint(((j, 1.0), (k, -cap[j])), LE, 0.0, row.tag)
        rows.append(row)
    return MilpModel(model.variables, rows, model.objective, model.run_day, model._index)


def _exact_feasible(model: MilpModel, x: np.ndarray) -> bool:
    """Integer check of every row; all model coefficients are integers."""
    xi = [int(v) for v in x]
    for v in model.variables:
        if not v.lo <= xi[v.index] <= v.hi:
            return False
    for row in model.constraints:
        lhs = sum(int(c) * xi[j] for j, c in row.coefs)
        rhs = int(row.rhs)
        if row.sense == LE and lhs > rhs or row.sense == GE and lhs < rhs or row.sense == EQ and lhs != rhs:
            return False
    return True


@dataclass(order=True)
class _Node:
    priority: tuple[float, int]
    bound: float = field(compare=False)
    changes: tuple[tuple[int, float, float], ...] = field(compare=False)
    depth: int = field(compare=False, default=0)


def _branch_and_bound(model: MilpModel, limits: SolveLimits, start: float) -> SolveResult:
    relaxation = LpRelaxation(strengthen(model))
    root_lb, root_ub = relaxation.lb, relaxation.ub
    priority = np.array(
        [_TAG_PRIORITY.get(v.tag, _INTEGER_PRIORITY) if v.kind == "binary" else _INTEGER_PRIORITY for v in model.variables]
    )
    if not all(float(c).is_integer() for row in model.constraints for _, c in row.coefs):
        raise ValueError("exact re-verification needs integer row coefficients")

    incumbent = np.zeros(model.n_vars)
    inc_obj = model.evaluate(incumbent)
    best_bound = math.inf
    trace: list[tuple[int, float, float]] = []
    heap: list[_Node] = []
    counter = itertools.count()
    nodes = 0
    status = OPTIMAL

    def node_arrays(node: _Node) -> tuple[np.ndarray, np.ndarray]:
        lb, ub = root_lb.copy(), root_ub.copy()
        for j, lo, hi in node.changes:
            lb[j], ub[j] = lo, hi
        return lb, ub

    # depth-first until a first nonzero incumbent exists, best-bound afterwards
    dive: list[_Node] = []
    current: _Node | None = _Node((0.0, next(counter)), math.inf, ())
    while current is not None or heap or dive:
        if dive and inc_obj > 0:
            for n in dive:
                heapq.heappush(heap, n)
            dive.clear()
        open_bound = max([-heap[0].priority[0]] if heap else [], default=-math.inf)
        if dive:
            open_bound = max(open_bound, max(n.bound for n in dive))
        if current is not None:
            open_bound = max(open_bound, current.bound)
        best_bound = min(best_bound, max(open_bound, inc_obj))
        if best_bound <= inc_obj + PRUNE_TOL:
            break
        if limits.gap > 0 and relative_gap(inc_obj, best_bound) <= limits.gap:
            status = GAP_REACHED
            break
        if time.perf_counter() - start > limits.time_limit or (
            limits.node_limit is not None and nodes >= limits.node_limit
        ):
            status = LIMIT_REACHED
            break

        if current is None:
            current = dive.pop() if dive else heapq.heappop(heap)
        node, current = current, None
        if node.bound <= inc_obj + PRUNE_TOL:
            continue
        nodes += 1
        lb, ub = node_arrays(node)
        out = relaxation.solve(lb, ub)
        if out is not None:
            obj, x = out
            obj = min(obj, node.bound)
            if obj > inc_obj + PRUNE_TOL:
                frac = np.abs(x - np.rint(x))
                candidates = np.flatnonzero(frac > limits.int_tol)
                if candidates.size == 0:
                    point = np.rint(x)
                    if _exact_feasible(model, point):
                        value = model.evaluate(point)
                        if value > inc_obj:
                            incumbent, inc_obj = point, value
                    else:
                        log.warning("node %d: rounded LP point fails exact check; node dropped", nodes)
                else:
                    # most fractional among the highest-priority class, ties by index
                    best_class = priority[candidates].min()
                    pool = candidates[priority[candidates] == best_class]
                    j = int(pool[np.argmax(np.round(0.5 - np.abs(frac[pool] - 0.5), 9))])
                    down = node.changes + ((j, lb[j], math.floor(x[j])),)
                    up = node.changes + ((j, math.ceil(x[j]), ub[j]),)
                    # plunge into the up child: it commits to a group or pair
                    current = _Node((-obj, next(counter)), obj, up, node.depth + 1)
                    sibling = _Node((-obj, next(counter)), obj, down, node.depth + 1)
                    if inc_obj > 0:
                        heapq.heappush(heap, sibling)
                    else:
                        dive.append(sibling)
        trace.append((nodes, inc_obj, best_bound))
    else:
        best_bound = inc_obj

    if status == OPTIMAL:
        best_bound = inc_obj
    trace.append((nodes, inc_obj, best_bound))
    return SolveResult(
        status=status,
        objective=inc_obj,
        bound=max(best_bound, inc_obj),
        nodes=nodes,
        wall_time=time.perf_counter() - start,
        values=incumbent,
        trace=trace,
    )


def _highs_mip(model: MilpModel, limits: SolveLimits, start: float) -> SolveResult:
    relaxation = LpRelaxation(model)
    h = relaxation.highs
    h.setOptionValue("presolve", "on")
    h.changeColsIntegrality(model.n_vars, relaxation._all, np.full(model.n_vars, highspy.HighsVarType.kInteger))
    h.setOptionValue("mip_rel_gap", limits.gap)
    h.setOptionValue("mip_abs_gap", PRUNE_TOL)
    h.setOptionValue("mip_feasibility_tolerance", limits.int_tol)
    if math.isfinite(limits.time_limit):
        h.setOptionValue("time_limit", float(limits.time_limit))
    if limits.node_limit is not None:
        h.setOptionValue("mip_max_nodes", int(limits.node_limit))
    h.run()
    status = h.getModelStatus()
    info = h.getInfo()
    x = np.rint(np.asarray(h.getSolution().col_value)) if info.primal_solution_status else np.zeros(model.n_vars)
    if not _exact_feasible(model, x):
        x = np.zeros(model.n_vars)
    objective = model.evaluate(x)
    bound = max(float(info.mip_dual_bound), objective)
    if status == highspy.HighsModelStatus.kOptimal:
        code = OPTIMAL if limits.gap == 0 or relative_gap(objective, bound) <= 1e-9 else GAP_REACHED
    else:
        code = LIMIT_REACHED
    return SolveResult(code, objective, bound, int(info.mip_node_count), time.perf_counter() - start, values=x)


def solve(model: MilpModel, limits: SolveLimits | None = None, method: str = "bnb") -> SolveResult:
    """Maximise ``model``.

    ``method="bnb"`` is the built-in branch-and-bound; ``"highs"`` hands the
    whole program to the HiGHS MIP solver. Both return an assignment that
    passed an exact integer feasibility check. The all-zero assignment is
    always feasible, so there is always an incumbent.
    """
    limits = limits or SolveLimits()
    start = time.perf_counter()
    if model.n_vars == 0:
        return SolveResult(OPTIMAL, 0.0, 0.0, 0, time.perf_counter() - start, values=np.zeros(0))
    if method == "bnb":
        return _branch_and_bound(model, limits, start)
    if method == "highs":
        return _highs_mip(model, limits, start)
    raise ValueError(f"unknown method {method!r}")


def solve_instance(
    instance: Instance,
    limits: SolveLimits | None = None,
    method: str = "bnb",
    run_day: int | None = None,
    config: PolicyConfig | None = None,
) -> tuple[SolveResult, Solution, MilpModel]:
    """Build, solve and decode in one call."""
    model = build_milp(instance, config, run_day)
    result = solve(model, limits, method)
    solution = extract_solution(model, result.values, instance)
    result.solution = solution
    return result, solution, model


# ---------------------------------------------------------------------------
# external solutions


def read_solution_file(text: str) -> dict[str, float]:
    """Parse ``name = value`` (or ``name value``) lines; ``#`` and ``*`` start comments."""
    values: dict[str, float] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith("*"):
            continue
        parts = line.replace("=", " ").split()
        if len(parts) < 2:
            raise ValueError(f"cannot parse solution line {raw!r}")
        values[parts[0]] = float(parts[1])
    return values


def verify_external(model: MilpModel, instance: Instance, text: str) -> tuple[Solution, float]:
    """Check an externally produced assignment and decode it; returns the solution and its objective."""
    values = as_value_array(model, read_solution_file(text))
    solution = extract_solution(model, values, instance)
    return solution, model.evaluate(values)


# ---------------------------------------------------------------------------
# brute-force oracle

MAX_BRUTE_ACTIVITIES = 10
MAX_BRUTE_SLOTS = 2


class BruteForceRefused(ValueError):
    """The instance is too large for exhaustive enumeration."""


def brute_force(instance: Instance, config: PolicyConfig | None = None, run_day: int | None = None) -> SolveResult:
    """True optimum of a tiny instance by exhaustive enumeration.

    Every activity is either unused, a pair, or placed in one of the slots of
    its (mentor, subject); each structure respecting one-assignment-per-request
    and group sizes is scored with every admissible choice of pair hours, group
    hours and member hours. Hours are enumerated per mentor, which is exact
    because they interact only through that mentor's capacity.
    """
    config = config or instance.config
    start = time.perf_counter()
    activities = list(instance.activities)
    if len(activities) > MAX_BRUTE_ACTIVITIES:
        raise BruteForceRefused(f"{len(activities)} activities > {MAX_BRUTE_ACTIVITIES}")
    if config.slots > MAX_BRUTE_SLOTS:
        raise BruteForceRefused(f"{config.slots} slots > {MAX_BRUTE_SLOTS}")

    weight = {
        a: activity_weight(instance.student(a.student_id), instance.mentor(a.mentor_id), a.subject, config, run_day)
        for a in activities
    }
    demand = {a: instance.student(a.student_id).request(a.subject).hours for a in activities}
    capacity = {m.id: m.capacity for m in instance.mentors}

    def options(a: Activity) -> list[object]:
        opts: list[object] = [None, "pair"]
        if instance.student(a.student_id).group and instance.mentor(a.mentor_id).group:
            opts += list(range(1, config.slots + 1))
        return opts

    group_cap = {
        m.id: m.group_capacity or config.group_capacity for m in instance.mentors
    }

    best_value = 0.0
    best_solution = Solution()
    leaves = 0
    choice: dict[Activity, object] = {}
    taken: set[tuple[str, Subject]] = set()

    def score(choice: dict[Activity, object]) -> tuple[float, Solution] | None:
        pairs = [a for a, c in choice.items() if c == "pair"]
        slots: dict[tuple[str, Subject, int], list[Activity]] = defaultdict(list)
        for a, c in choice.items():
            if isinstance(c, int):
                slots[(a.mentor_id, a.subject, c)].append(a)
        for (mentor_id, _, _), members in slots.items():
            if not 2 <= len(members) <= group_cap[mentor_id]:
                return None
        value = 0.0
        for (mentor_id, subject, _), members in slots.items():
            for n, a in enumerate(members):
                for b in members[n + 1 :]:
                    value += coherence_from_metrics(instance.pair(a.student_id, b.student_id), subject)
        value -= config.mentor_pair_weight * len({(a.student_id, a.mentor_id) for a in pairs})

        chosen_pairs: dict[Activity, int] = {}
        chosen_groups: dict[PotentialGroup, int] = {}
        chosen_members: dict[tuple[Activity, int], int] = {}
        for mentor in instance.mentors:
            my_pairs = [a for a in pairs if a.mentor_id == mentor.id]
            my_groups = [k for k in slots if k[0] == mentor.id]
            best: tuple[float, tuple, tuple, tuple] | None = None
            pair_ranges = [range(1, min(3, demand[a]) + 1) for a in my_pairs]
            for pair_hours in itertools.product(*pair_ranges):
                for group_hours in itertools.product((2, 3), repeat=len(my_groups)):
                    if sum(pair_hours) + sum(group_hours) > capacity[mentor.id]:
                        continue
                    member_ranges = []
                    member_keys = []
                    for k, gh in zip(my_groups, group_hours):
                        for a in slots[k]:
                            member_keys.append((a, k[2]))
                            member_ranges.append(range(0, min(demand[a], gh) + 1))
                    for member_hours in itertools.product(*member_ranges):
                        v = sum(weight[a] * h for a, h in zip(my_pairs, pair_hours))
                        v += sum(weight[a] * config.group_weight * h for (a, _), h in zip(member_keys, member_hours))
                        if best is None or v > best[0]:
                            best = (v, pair_hours, group_hours, tuple(zip(member_keys, member_hours)))
            if best is None:
                if my_pairs or my_groups:
                    return None
                continue
            value += best[0]
            chosen_pairs.update(zip(my_pairs, best[1]))
            for k, gh in zip(my_groups, best[2]):
                mentor_id, subject, slot = k
                chosen_groups[PotentialGroup(mentor_id, subject, slot, group_cap[mentor_id])] = gh
            chosen_members.update(dict(best[3]))
        return value, Solution(chosen_pairs, chosen_members, chosen_groups)

    def visit(n: int, pair_count: dict[str, int]) -> None:
        nonlocal best_value, best_solution, leaves
        if n == len(activities):
            leaves += 1
            scored = score(choice)
            if scored is not None and scored[0] > best_value + 1e-12:
                best_value, best_solution = scored
            return
        a = activities[n]
        for opt in options(a):
            if opt is not None and (a.student_id, a.subject) in taken:
                continue
            if opt == "pair" and pair_count.get(a.mentor_id, 0) + 1 > capacity[a.mentor_id]:
                continue
            if opt is not None:
                choice[a] = opt
                taken.add((a.student_id, a.subject))
            counts = dict(pair_count)
            if opt == "pair":
                counts[a.mentor_id] = counts.get(a.mentor_id, 0) + 1
            visit(n + 1, counts)
            if opt is not None:
                del choice[a]
                taken.discard((a.student_id, a.subject))

    visit(0, {})
    return SolveResult(
        status=OPTIMAL,
        objective=best_value,
        bound=best_value,
        nodes=leaves,
        wall_time=time.perf_counter() - start,
        solution=best_solution,
    )
