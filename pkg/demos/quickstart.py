"""Generate a small population, solve it exactly and look at the matching."""

import numpy as np

from mentormatch.generator import GeneratorConfig, generate_instance
from mentormatch.metrics import evaluate, objective_value
from mentormatch.solver import brute_force, solve_instance
from mentormatch.verify import random_tiny_instance


def main() -> None:
    instance = generate_instance(GeneratorConfig(n_students=12, n_mentors=6, seed=3))
    print(f"{len(instance.students)} students, {len(instance.mentors)} mentors, "
          f"{len(instance.activities)} feasible activities, {len(instance.potential_groups)} group slots")

    result, solution, model = solve_instance(instance)
    print(f"branch-and-bound: {result.status} after {result.nodes} nodes, objective {result.objective:.2f}")
    print(f"model has {model.n_vars} variables and {len(model.constraints)} rows")

    for activity, hours in sorted(solution.pairs.items(), key=lambda kv: kv[0].student_id):
        print(f"  pair   {activity.student_id} with {activity.mentor_id} on {activity.subject.name}: {hours} h/week")
    for group, hours in solution.groups.items():
        members = ", ".join(a.student_id for a in solution.members(group))
        print(f"  group  {group.mentor_id} on {group.subject.name} ({hours} h/week): {members}")

    measures = evaluate(instance, solution)
    print("measures:", {k: round(v, 2) for k, v in measures.as_dict().items()})
    print(f"objective recomputed from the weights: {objective_value(instance, solution):.2f}")

    tiny, day = random_tiny_instance(np.random.default_rng(5))
    exact = brute_force(tiny, run_day=day)
    check = solve_instance(tiny, run_day=day)[0]
    print(f"tiny instance ({len(tiny.activities)} activities): exhaustive optimum {exact.objective:.4f}, "
          f"branch-and-bound {check.objective:.4f}")

if __name__ == "__main__":
    main()
