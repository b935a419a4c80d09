import csv
import io
import json
import subprocess
import sys

import pytest

from mentormatch.cli import EXIT_INVALID, EXIT_NOT_PROVEN, EXIT_OK, main
from mentormatch.milp import build_milp
from mentormatch.model import instance_from_dict
from mentormatch.solver import solve


def run(*argv):
    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:  # argparse usage errors
        return exc.code


def rows(path):
    lines = [line for line in path.read_text().splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


@pytest.fixture
def tiny_instance(tmp_path):
    out = tmp_path / "gen"
    assert run("generate", "--students", 6, "--mentors", 3, "--seed", 2, "--out", out) == EXIT_OK
    return out / "instance.json"


def test_generate_is_reproducible(tmp_path, capsys):
    for name in ("a", "b"):
        assert run("generate", "--students", 80, "--mentors", 40, "--seed", 1, "--stats", "--out", tmp_path / name) == 0
    first = (tmp_path / "a" / "instance.json").read_bytes()
    assert first == (tmp_path / "b" / "instance.json").read_bytes()
    doc = json.loads(first)
    assert doc["meta"]["seed"] == 1 and doc["meta"]["config"]["students"] == 80
    inst = instance_from_dict(doc["instance"])
    assert (len(inst.students), len(inst.mentors)) == (80, 40)
    assert "activities" in capsys.readouterr().out


@pytest.mark.parametrize("flags", [("--students", 0, "--mentors", 3), ("--students", 5, "--mentors", "x")])
def test_generate_usage_errors(flags, tmp_path):
    assert run("generate", *flags, "--out", tmp_path) == 2


def test_solve_tiny(tiny_instance, tmp_path):
    out = tmp_path / "solve"
    assert run("solve", tiny_instance, "--export-mps", "--out", out) == EXIT_OK
    doc = json.loads((out / "solution.json").read_text())
    assert doc["status"] == "optimal"
    inst = instance_from_dict(json.loads(tiny_instance.read_text())["instance"])
    assert doc["objective"] == pytest.approx(solve(build_milp(inst), method="highs").objective, abs=1e-6)
    mps = (out / "model.mps").read_text()
    assert mps.startswith("* meta: ") and "ENDATA" in mps
    measures = rows(out / "measures.csv")
    assert len(measures) == 1 and measures[0]["status"] == "optimal"


def test_solve_long_table(tiny_instance, tmp_path):
    assert run("solve", tiny_instance, "--long", "--wg", 0.5, "--out", tmp_path) == EXIT_OK
    table = rows(tmp_path / "measures.csv")
    assert [r["measure"] for r in table][:2] == ["number_students", "number_pairs_groups"]
    assert json.loads((tmp_path / "solution.json").read_text())["meta"]["config"]["policy"]["group_weight"] == 0.5


def test_solve_time_limit_not_proven(tmp_path, capsys):
    gen = tmp_path / "gen"
    run("generate", "--students", 80, "--mentors", 40, "--seed", 1, "--out", gen)
    code = run("solve", gen / "instance.json", "--time-limit", 1, "--out", tmp_path / "s")
    assert code == EXIT_NOT_PROVEN
    assert "gap" in capsys.readouterr().out
    assert json.loads((tmp_path / "s" / "solution.json").read_text())["status"] == "limit_reached"


def test_solve_invalid_instance(tmp_path, tiny_instance):
    doc = json.loads(tiny_instance.read_text())
    doc["instance"]["students"].append(doc["instance"]["students"][0])
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert run("solve", bad, "--out", tmp_path) == EXIT_INVALID
    (tmp_path / "junk.json").write_text("{not json")
    assert run("solve", tmp_path / "junk.json", "--out", tmp_path) == EXIT_INVALID


def test_solve_wait_needs_run_day(tiny_instance, tmp_path):
    assert run("solve", tiny_instance, "--wt", 1, "--out", tmp_path) == EXIT_INVALID
    assert run("solve", tiny_instance, "--wt", 1, "--run-day", 5, "--out", tmp_path) == EXIT_OK


def test_solve_external_file(tiny_instance, tmp_path):
    inst = instance_from_dict(json.loads(tiny_instance.read_text())["instance"])
    model = build_milp(inst)
    result = solve(model)
    sol_file = tmp_path / "ext.sol"
    sol_file.write_text("\n".join(f"{k} = {v}" for k, v in result.assignment(model).items()))
    assert run("solve", tiny_instance, "--external", sol_file, "--out", tmp_path / "ext") == EXIT_OK
    assert json.loads((tmp_path / "ext" / "solution.json").read_text())["objective"] == pytest.approx(result.objective)
    sol_file.write_text("nonexistent_var = 1\n")
    assert run("solve", tiny_instance, "--external", sol_file, "--out", tmp_path / "ext2") == EXIT_INVALID


def test_simulate_arrival_four(tmp_path, capsys):
    code = run("simulate", "--arrival", 4, "--horizon", 300, "--frequency", 300, "--seed", 0, "--out", tmp_path)
    assert code == EXIT_OK
    assert capsys.readouterr().out.startswith("1200 students, 600 mentors, 1 runs")
    lines = (tmp_path / "runs.jsonl").read_text().splitlines()
    assert json.loads(lines[0])["meta"]["config"]["timeline"]["arrival_rate"] == 4
    assert rows(tmp_path / "measures.csv")[-1]["day"] == "total"


def test_simulate_reproducible(tmp_path):
    for name in ("a", "b"):
        assert run("simulate", "--horizon", 20, "--frequency", 4, "--seed", 3, "--out", tmp_path / name) == 0
    for f in ("runs.jsonl", "measures.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_sweep_cell_count(tmp_path, capsys):
    code = run("sweep", "--frequency", "1,2,7,14", "--wt", "0,1,2,10", "--seeds", 20, "--horizon", 3,
               "--out", tmp_path)
    assert code == EXIT_OK
    assert "16 cells x 20 seeds = 320 rows" in capsys.readouterr().out
    table = rows(tmp_path / "measures.csv")
    assert len(table) == 320
    assert len(rows(tmp_path / "summary.csv")) == 16


def test_sweep_reproducible_and_parallel(tmp_path):
    args = ("sweep", "--frequency", "5,10", "--wgs", "0.5,1", "--seeds", 2, "--horizon", 20, "--logs")
    assert run(*args, "--out", tmp_path / "a") == 0
    assert run(*args, "--jobs", 2, "--out", tmp_path / "b") == 0
    for f in ("measures.csv", "summary.csv", "runs.jsonl"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_sweep_rejects_bad_lists(tmp_path):
    assert run("sweep", "--wgs", "0.5,1.5", "--out", tmp_path) == 2
    assert run("sweep", "--frequency", "0", "--out", tmp_path) == 2


def test_report_from_sweep(tmp_path):
    assert run("sweep", "--mode", "static", "--students", 8, "--mentors", 4, "--wgs", "0.5,1",
               "--seeds", 3, "--out", tmp_path) == 0
    assert run("report", tmp_path / "measures.csv", "--by", "group_weight", "--out", tmp_path / "r") == 0
    summary = rows(tmp_path / "r" / "summary.csv")
    assert [r["group_weight"] for r in summary] == ["0.5", "1.0"] and summary[0]["n"] == "3"
    assert run("report", tmp_path / "measures.csv", "--by", "nonsense", "--out", tmp_path / "r") == EXIT_INVALID


def test_verify_cases(capsys):
    assert run("verify", "--cases", 10, "--skip-fit") == EXIT_OK
    out = capsys.readouterr().out
    assert "10/10 cases agree" in out and "\033[" not in out


def test_verify_negative_control(capsys):
    assert run("verify", "--cases", 30, "--skip-fit", "--inject", "mentor_capacity") == EXIT_INVALID
    assert "mutated:mentor_capacity" in capsys.readouterr().out


def test_entry_point_and_no_color(tmp_path):
    env = {"NO_COLOR": "1", "PATH": "/usr/bin:/bin"}
    done = subprocess.run(
        [sys.executable, "-m", "mentormatch.cli", "verify", "--cases", "2", "--skip-fit"],
        capture_output=True, text=True, env=env, cwd=tmp_path,
    )
    assert done.returncode == 0 and "\033[" not in done.stdout
    help_text = subprocess.run([sys.executable, "-m", "mentormatch.cli", "--help"], capture_output=True, text=True)
    for sub in ("generate", "solve", "simulate", "sweep", "report", "verify"):
        assert sub in help_text.stdout
