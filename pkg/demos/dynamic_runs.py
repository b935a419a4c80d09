"""Follow a dynamic pool through weekly matching runs."""

from mentormatch.config import PolicyConfig
from mentormatch.generator import TimelineConfig, generate_population
from mentormatch.simulator import run_simulation


def main() -> None:
    timeline = generate_population(TimelineConfig(horizon=70, arrival_rate=2), seed=11)
    for wt in (0.0, 10.0):
        runlog = run_simulation(timeline, frequency=7, policy=PolicyConfig(wait_weight=wt))
        print(f"waiting weight {wt:g}")
        for record in runlog.records:
            m = record.measures
            print(f"  day {record.day:3d}: pool {record.n_students:3d}/{record.n_mentors:3d}, "
                  f"{int(m.solo_number)} pairs, {int(m.group_number)} groups, volume {m.volume:.1f}")
        totals = runlog.totals()
        print(f"  total: {int(totals['number_students'])} students matched, volume {totals['volume']:.1f}")


if __name__ == "__main__":
    main()
