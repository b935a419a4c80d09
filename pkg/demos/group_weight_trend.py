"""How the group discount shifts hours between pairs and groups (a small static sweep)."""

import statistics

from mentormatch.generator import GeneratorConfig
from mentormatch.simulator import ExperimentGrid, sweep


def main(seeds: int = 5) -> None:
    grid = ExperimentGrid(mode="static", group_weights=(0.5, 0.7, 1.0),
                          generator=GeneratorConfig(n_students=40, n_mentors=20))
    result = sweep(grid, range(seeds))
    print(f"{'w^g':>5} {'solo_time':>10} {'group_time':>11} {'groups':>7}")
    for wg in grid.group_weights:
        rows = [r for r in result.rows if r["group_weight"] == wg]
        mean = lambda key: statistics.fmean(r[key] for r in rows)  # noqa: E731
        print(f"{wg:5.1f} {mean('solo_time'):10.2f} {mean('group_time'):11.2f} {mean('group_number'):7.2f}")


if __name__ == "__main__":
    main()
