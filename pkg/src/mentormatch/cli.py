"""Command line entry point: ``mentormatch {generate,solve,simulate,sweep,report,verify}``.

Every output file carries a ``meta`` block (tool version, command, resolved
configuration, seed). Outputs contain no timestamps or timings, so re-running
the same command reproduces them byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from mentormatch import __version__
from mentormatch.config import PREFERENCE_VARIANTS, WAITING_SCOPES, PolicyConfig
from mentormatch.generator import GeneratorConfig, TimelineConfig, generate_instance, generate_population
from mentormatch.metrics import MEASURES, aggregate, csv_text, evaluate, to_long
from mentormatch.milp import InfeasibleAssignmentError, build_milp, export_mps, extract_solution
from mentormatch.model import InstanceError, instance_from_dict, validate_solution
from mentormatch.simulator import CELL_KEYS, ExperimentGrid, run_simulation, sweep
from mentormatch.solver import METHODS, OPTIMAL, SolveLimits, solve, verify_external
from mentormatch.verify import drop_constraints, equivalence_suite, fit_suite, nh_consistency

log = logging.getLogger("mentormatch")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INVALID = 3
EXIT_NOT_PROVEN = 4


class ValidationFailure(Exception):
    """Bad input data or a failed check; maps to exit code 3."""


# ---------------------------------------------------------------------------
# argument types


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _nonneg_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(value) or value < 0:
        raise argparse.ArgumentTypeError(f"must be a finite number >= 0, got {text}")
    return value


def _group_weight(text: str) -> float:
    value = _nonneg_float(text)
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError(f"group weight must lie in (0, 1], got {text}")
    return value


def _gap(text: str) -> float:
    value = _nonneg_float(text)
    if value >= 1:
        raise argparse.ArgumentTypeError("gap must lie in [0, 1)")
    return value


def _listof(item: Callable[[str], Any]) -> Callable[[str], tuple]:
    def parse(text: str) -> tuple:
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if not parts:
            raise argparse.ArgumentTypeError("empty list")
        return tuple(item(p) for p in parts)

    return parse


def _choice(options: Sequence[str]) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise argparse.ArgumentTypeError(f"expected one of {', '.join(options)}, got {text!r}")
        return text

    return parse


# ---------------------------------------------------------------------------
# output helpers


def _color(text: str, code: str) -> str:
    if os.environ.get("NO_COLOR") or not sys.stdout.isatty():
        return text
    return f"\033[{code}m{text}\033[0m"


def _meta(args: argparse.Namespace, config: Mapping[str, Any], seed: Any) -> dict[str, Any]:
    return {"tool": "mentormatch", "version": __version__, "command": args.command, "config": dict(config), "seed": seed}


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8")
    log.info("wrote %s", path)
    return path


def _json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=1) + "\n"


def _measure_table(records: list[dict[str, Any]], id_keys: Sequence[str], long: bool, meta: Mapping[str, Any]) -> str:
    if long:
        return csv_text(to_long(records, id_keys), [*id_keys, "measure", "value"], meta)
    return csv_text(records, [*id_keys, *MEASURES], meta)


def _policy(args: argparse.Namespace, base: PolicyConfig | None = None) -> PolicyConfig:
    base = base or PolicyConfig()
    changes = {}
    for flag, key in (("wg", "group_weight"), ("pref_variant", "preference_variant"), ("wt", "wait_weight"),
                      ("wt_scope", "waiting_scope"), ("slots", "slots")):
        value = getattr(args, flag, None)
        if value is not None:
            changes[key] = value
    try:
        return base.with_(**changes)
    except ValueError as exc:
        raise ValidationFailure(str(exc)) from None


def _limits(args: argparse.Namespace) -> SolveLimits:
    return SolveLimits(
        time_limit=args.time_limit if args.time_limit is not None else math.inf,
        node_limit=args.node_limit,
        gap=args.gap,
    )


def _limits_dict(limits: SolveLimits) -> dict[str, Any]:
    return {
        "time_limit": None if math.isinf(limits.time_limit) else limits.time_limit,
        "node_limit": limits.node_limit,
        "gap": limits.gap,
    }


def _load_instance(path: Path):
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValidationFailure(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ValidationFailure(f"{path} is not JSON: {exc}") from None
    body = data.get("instance", data) if isinstance(data, dict) else data
    try:
        return instance_from_dict(body)
    except (InstanceError, KeyError, TypeError, ValueError) as exc:
        raise ValidationFailure(f"invalid instance {path}: {exc}") from None


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args: argparse.Namespace) -> int:
    gen = GeneratorConfig(n_students=args.students, n_mentors=args.mentors, seed=args.seed)
    instance = generate_instance(gen, _policy(args))
    config = {"students": args.students, "mentors": args.mentors, "policy": instance.config.to_dict()}
    meta = _meta(args, config, args.seed)
    _write(args.out, "instance.json", _json({"meta": meta, "instance": instance.to_dict()}))
    if args.stats:
        stats = {
            "students": len(instance.students),
            "mentors": len(instance.mentors),
            "requests": sum(len(s.requests) for s in instance.students),
            "requested_hours": sum(r.hours for s in instance.students for r in s.requests),
            "mentor_capacity": sum(m.capacity for m in instance.mentors),
            "activities": len(instance.activities),
            "potential_groups": len(instance.potential_groups),
            "group_willing_students": sum(s.group for s in instance.students),
            "group_willing_mentors": sum(m.group for m in instance.mentors),
        }
        _write(args.out, "stats.json", _json({"meta": meta, "stats": stats}))
        for key, value in stats.items():
            print(f"{key:24s} {value}")
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    instance = _load_instance(args.instance)
    policy = _policy(args, instance.config)
    if policy != instance.config:
        instance = instance.with_config(policy)
    if policy.wait_weight > 0 and args.run_day is None:
        raise ValidationFailure("--wt > 0 needs --run-day")
    model = build_milp(instance, policy, args.run_day)
    limits = _limits(args)
    config = {"instance": str(args.instance), "policy": policy.to_dict(), "limits": _limits_dict(limits),
              "method": args.method, "run_day": args.run_day}
    meta = _meta(args, config, None)

    if args.export_mps:
        header = "".join(f"* {line}\n" for line in ("meta: " + json.dumps(meta, sort_keys=True)).splitlines())
        _write(args.out, "model.mps", header + export_mps(model))

    if args.external is not None:
        try:
            solution, objective = verify_external(model, instance, args.external.read_text(encoding="utf-8"))
        except (InfeasibleAssignmentError, KeyError, ValueError) as exc:
            raise ValidationFailure(f"external solution rejected: {exc}") from None
        status, bound, nodes = "external", objective, 0
    else:
        result = solve(model, limits, args.method)
        solution = extract_solution(model, result.values, instance)
        status, objective, bound, nodes = result.status, result.objective, result.bound, result.nodes

    report = validate_solution(instance, solution)
    if not report.feasible:
        print(str(report), file=sys.stderr)
        raise ValidationFailure("solution fails validation")
    measures = evaluate(instance, solution, policy, discount_groups=not args.no_discount)
    _write(args.out, "solution.json", _json({
        "meta": meta, "status": status, "objective": objective, "bound": bound, "nodes": nodes,
        "solution": solution.to_dict(),
    }))
    _write(args.out, "measures.csv", _measure_table([{"status": status, **measures.as_dict()}], ["status"], args.long, meta))

    gap = (bound - objective) / max(abs(bound), 1e-9) if bound > objective else 0.0
    word = _color(status, "32" if status == OPTIMAL else "33")
    print(f"{word}: objective {objective:.6f}, bound {bound:.6f}, gap {gap:.4%}, nodes {nodes}")
    if status in (OPTIMAL, "external"):
        return EXIT_OK
    return EXIT_NOT_PROVEN


def _timeline_config(args: argparse.Namespace) -> TimelineConfig:
    try:
        return TimelineConfig(horizon=args.horizon, arrival_rate=args.arrival, mentor_ratio=args.mentor_ratio)
    except ValueError as exc:
        raise ValidationFailure(str(exc)) from None


def cmd_simulate(args: argparse.Namespace) -> int:
    policy = _policy(args)
    timeline_config = _timeline_config(args)
    timeline = generate_population(timeline_config, args.seed)
    limits = _limits(args)
    runlog = run_simulation(timeline, args.frequency, policy, args.seed, limits, args.method)
    config = {"timeline": dataclasses.asdict(timeline_config), "frequency": args.frequency,
              "policy": policy.to_dict(), "limits": _limits_dict(limits), "method": args.method}
    meta = _meta(args, config, args.seed)
    _write(args.out, "runs.jsonl", runlog.to_jsonl(meta))
    rows = [{"day": r.day, **r.measures.as_dict()} for r in runlog.records]
    rows.append({"day": "total", **runlog.totals()})
    _write(args.out, "measures.csv", _measure_table(rows, ["day"], args.long, meta))
    totals = runlog.totals()
    print(
        f"{len(timeline.students)} students, {len(timeline.mentors)} mentors, {len(runlog.records)} runs; "
        f"matched {int(totals['number_students'])} students, {int(totals['solo_number'])} pairs, "
        f"{int(totals['group_number'])} groups"
    )
    not_proven = [r.day for r in runlog.records if r.status != OPTIMAL]
    if not_proven:
        log.warning("%d runs without proven optimality", len(not_proven))
        return EXIT_NOT_PROVEN
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    base = _policy(args)
    waits = tuple((wt, scope) for wt in args.wt_list for scope in args.wt_scope_list)
    try:
        grid = ExperimentGrid(
            frequencies=args.frequency,
            group_weights=args.wg_list or (base.group_weight,),
            preference_variants=args.pref_variant_list or (base.preference_variant,),
            waits=waits,
            mode=args.mode,
            timeline=_timeline_config(args),
            generator=GeneratorConfig(n_students=args.students, n_mentors=args.mentors),
            base_policy=base,
        )
        for cell in grid.cells():
            grid.policy(cell)
    except ValueError as exc:
        raise ValidationFailure(str(exc)) from None
    seeds = list(range(args.seed_start, args.seed_start + args.seeds))
    limits = _limits(args)
    result = sweep(grid, seeds, limits, args.method, args.jobs, keep_logs=args.logs)
    config = {
        "mode": args.mode,
        "grid": {"frequency": list(args.frequency) if args.mode == "dynamic" else None,
                 "group_weight": list(grid.group_weights), "preference_variant": list(grid.preference_variants),
                 "waits": [list(w) for w in waits]},
        "timeline": dataclasses.asdict(grid.timeline) if args.mode == "dynamic" else None,
        "static_size": [args.students, args.mentors] if args.mode == "static" else None,
        "base_policy": base.to_dict(), "limits": _limits_dict(limits), "method": args.method,
    }
    meta = _meta(args, config, seeds)
    id_keys = ["cell", "seed", *CELL_KEYS, "status", "runs", "objective", "bound"]
    _write(args.out, "measures.csv", _measure_table(result.rows, id_keys, args.long, meta))
    summary = result.summary()
    if summary:
        columns = [*CELL_KEYS, "n"] + [k for k in summary[0] if k not in CELL_KEYS and k != "n"]
        _write(args.out, "summary.csv", csv_text(summary, columns, meta))
    if args.logs:
        lines = [json.dumps({"meta": meta}, sort_keys=True)]
        for (cell, seed), runlog in sorted(result.logs.items()):
            for record in runlog.records:
                lines.append(json.dumps({"cell": cell, "seed": seed, **record.to_dict()}, sort_keys=True))
        _write(args.out, "runs.jsonl", "\n".join(lines) + "\n")
    if result.failures:
        _write(args.out, "failures.json", _json({"meta": meta, "failures": result.failures}))
        for f in result.failures:
            print(_color("failed", "31") + f" cell {f['cell']} seed {f['seed']}: {f['error']}", file=sys.stderr)
    print(f"{len(grid.cells())} cells x {len(seeds)} seeds = {len(result.rows)} rows, {len(result.failures)} failed")
    if result.failures:
        return EXIT_INVALID
    if any(r["status"] != OPTIMAL for r in result.rows):
        return EXIT_NOT_PROVEN
    return EXIT_OK


def _parse_cell(text: str) -> Any:
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


def _read_measure_csv(path: Path) -> list[dict[str, Any]]:
    try:
        lines = [line for line in path.read_text(encoding="utf-8").splitlines() if not line.startswith("#")]
    except OSError as exc:
        raise ValidationFailure(f"cannot read {path}: {exc}") from None
    rows = [{k: _parse_cell(v) for k, v in r.items()} for r in csv.DictReader(io.StringIO("\n".join(lines)))]
    if not rows:
        raise ValidationFailure(f"{path} has no rows")
    if "measure" in rows[0]:
        raise ValidationFailure(f"{path} is in long form; report reads the wide table")
    return rows


def cmd_report(args: argparse.Namespace) -> int:
    rows = _read_measure_csv(args.measures)
    missing = [k for k in args.by if k not in rows[0]]
    if missing:
        raise ValidationFailure(f"unknown grouping column(s): {', '.join(missing)}")
    rows = [r for r in rows if r.get("status") != "failed"]
    summary = aggregate(rows, args.by)
    meta = _meta(args, {"measures": str(args.measures), "by": list(args.by)}, None)
    if args.long:
        records = [
            {**{k: s[k] for k in args.by}, "n": s["n"], "measure": m, "stat": stat, "value": s[f"{m}_{stat}"]}
            for s in summary for m in MEASURES for stat in ("mean", "median", "q1", "q3", "min", "max")
        ]
        text = csv_text(records, [*args.by, "n", "measure", "stat", "value"], meta)
    else:
        text = csv_text(summary, None, meta)
    _write(args.out, "summary.csv", text)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    ok = True
    mutate = drop_constraints(args.inject) if args.inject else None
    cases = equivalence_suite(args.cases, args.seed, mutate)
    failed = [c for c in cases if not c.passed]
    print(f"oracle equivalence: {len(cases) - len(failed)}/{len(cases)} cases agree")
    for c in failed:
        print("  " + _color("MISMATCH", "31") + " " + c.describe())
    ok &= not failed
    if not args.skip_fit:
        checks = fit_suite(args.samples, args.seed)
        bad = [c for c in checks if not c.passed]
        print(f"generator marginals: {len(checks) - len(bad)}/{len(checks)} within tolerance")
        for c in bad:
            print("  " + c.describe())
        gap = nh_consistency(args.samples, args.seed)
        print(f"home-help index vs family tables: max deviation {gap:.4f}")
        ok &= not bad and gap <= 0.03
    print(_color("PASS", "32") if ok else _color("FAIL", "31"))
    return EXIT_OK if ok else EXIT_INVALID


# ---------------------------------------------------------------------------
# parser


def _add_policy_flags(p: argparse.ArgumentParser, lists: bool = False) -> None:
    p.add_argument("--wg", type=_group_weight, help="group weight in (0, 1] (default 0.7)")
    p.add_argument("--pref-variant", type=_choice(PREFERENCE_VARIANTS), help="preference weighting variant")
    p.add_argument("--slots", type=int, help="potential group slots per mentor and subject")
    if not lists:
        p.add_argument("--wt", type=_nonneg_float, help="waiting-time weight (default 0)")
        p.add_argument("--wt-scope", type=_choice(WAITING_SCOPES), help="which requests earn the waiting weight")


def _add_limit_flags(p: argparse.ArgumentParser, default_method: str) -> None:
    p.add_argument("--time-limit", type=_nonneg_float, help="seconds per solve (default: none)")
    p.add_argument("--node-limit", type=_positive_int, help="branch-and-bound nodes per solve")
    p.add_argument("--gap", type=_gap, default=0.0, help="relative gap at which to stop (default 0)")
    p.add_argument("--method", choices=METHODS, default=default_method, help=f"solver (default {default_method})")


def _add_timeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--arrival", type=_nonneg_float, default=1.0, help="students registering per day (default 1)")
    p.add_argument("--horizon", type=_positive_int, default=300, help="simulated days (default 300)")
    p.add_argument("--mentor-ratio", type=_nonneg_float, default=0.5, help="mentors per student (default 0.5)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mentormatch", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, helptext: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=helptext, description=helptext)
        p.add_argument("--out", type=Path, default=Path("."), help="output directory (default: current)")
        return p

    p = command("generate", "generate a static instance")
    p.add_argument("--students", type=_positive_int, required=True)
    p.add_argument("--mentors", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stats", action="store_true", help="also write and print summary statistics")
    _add_policy_flags(p)
    p.set_defaults(handler=cmd_generate)

    p = command("solve", "solve an instance and score the matching")
    p.add_argument("instance", type=Path, help="instance JSON written by generate")
    _add_policy_flags(p)
    _add_limit_flags(p, "bnb")
    p.add_argument("--run-day", type=int, help="matching day, needed for waiting weights")
    p.add_argument("--export-mps", action="store_true", help="also write model.mps")
    p.add_argument("--external", type=Path, help="verify a 'name = value' solution file instead of solving")
    p.add_argument("--no-discount", action="store_true", help="score group preference/social terms undiscounted")
    p.add_argument("--long", action="store_true", help="tidy measures table")
    p.add_argument("--wide", dest="long", action="store_false", help="one column per measure (default)")
    p.set_defaults(handler=cmd_solve)

    p = command("simulate", "simulate dynamic matching over a horizon")
    _add_timeline_flags(p)
    p.add_argument("--frequency", type=_positive_int, default=7, help="days between matching runs (default 7)")
    p.add_argument("--seed", type=int, default=0)
    _add_policy_flags(p)
    _add_limit_flags(p, "highs")
    p.add_argument("--long", action="store_true")
    p.add_argument("--wide", dest="long", action="store_false")
    p.set_defaults(handler=cmd_simulate)

    p = command("sweep", "run a policy grid over many seeds")
    p.add_argument("--mode", choices=("dynamic", "static"), default="dynamic")
    _add_timeline_flags(p)
    p.add_argument("--students", type=_positive_int, default=80, help="static mode instance size")
    p.add_argument("--mentors", type=_positive_int, default=40, help="static mode instance size")
    p.add_argument("--frequency", type=_listof(_positive_int), default=(7,), help="comma list (default 7)")
    p.add_argument("--wt", dest="wt_list", type=_listof(_nonneg_float), default=(0.0,), help="comma list of waiting weights")
    p.add_argument("--wt-scope", dest="wt_scope_list", type=_listof(_choice(WAITING_SCOPES)), default=("all_subjects",))
    p.add_argument("--wg-list", "--wgs", dest="wg_list", type=_listof(_group_weight), help="comma list of group weights")
    p.add_argument("--pref-variants", dest="pref_variant_list", type=_listof(_choice(PREFERENCE_VARIANTS)))
    p.add_argument("--seeds", type=_positive_int, default=1, help="number of seeds")
    p.add_argument("--seed-start", type=int, default=0)
    p.add_argument("--jobs", type=_positive_int, default=1, help="parallel worker processes")
    p.add_argument("--logs", action="store_true", help="also write every run to runs.jsonl")
    _add_policy_flags(p, lists=True)
    _add_limit_flags(p, "highs")
    p.add_argument("--long", action="store_true")
    p.add_argument("--wide", dest="long", action="store_false")
    p.set_defaults(handler=cmd_sweep)

    p = command("report", "summarise a sweep's measures.csv per cell")
    p.add_argument("measures", type=Path)
    p.add_argument("--by", type=_listof(str), default=CELL_KEYS, help="grouping columns")
    p.add_argument("--long", action="store_true")
    p.add_argument("--wide", dest="long", action="store_false")
    p.set_defaults(handler=cmd_report)

    p = command("verify", "oracle equivalence and generator goodness-of-fit suites")
    p.add_argument("--cases", type=_positive_int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=_positive_int, default=100_000)
    p.add_argument("--skip-fit", action="store_true")
    p.add_argument("--inject", metavar="TAG", help="negative control: drop every constraint row with this tag")
    p.set_defaults(handler=cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * args.verbose
    logging.basicConfig(level=max(level, logging.DEBUG), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except ValidationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
