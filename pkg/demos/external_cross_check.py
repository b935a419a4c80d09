"""Export the model as MPS, solve it with an outside solver and verify its answer."""

import tempfile
from pathlib import Path

import highspy

from mentormatch.generator import GeneratorConfig, generate_instance
from mentormatch.milp import build_milp, export_mps
from mentormatch.model import validate_solution
from mentormatch.solver import solve, verify_external


def main() -> None:
    instance = generate_instance(GeneratorConfig(n_students=15, n_mentors=8, seed=2))
    model = build_milp(instance)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "model.mps"
        path.write_text(export_mps(model))
        outside = highspy.Highs()
        outside.setOptionValue("output_flag", False)
        outside.readModel(str(path))
        outside.run()
        names = outside.getLp().col_names_
        values = outside.getSolution().col_value
    text = "\n".join(f"{n} = {round(v)}" for n, v in zip(names, values))
    solution, value = verify_external(model, instance, text)
    print(f"outside solver: objective {value:.4f}, feasible {validate_solution(instance, solution).feasible}")
    ours = solve(model)
    print(f"built-in branch-and-bound: objective {ours.objective:.4f} ({ours.status}, {ours.nodes} nodes)")


if __name__ == "__main__":
    main()
