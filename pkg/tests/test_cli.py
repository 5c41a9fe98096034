import importlib.util
import json
from pathlib import Path

import pytest

from src.cli import RunConfig, execute


ROOT = Path(__file__).resolve().parents[1]


def _load_runner():
    spec = importlib.util.spec_from_file_location("run_ocp", ROOT / "scripts" / "run_ocp.py")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


run_ocp = _load_runner()


def _run(argv, capsys):
    code = run_ocp.main(argv)
    return code, json.loads(capsys.readouterr().out)


def _write_problem(tmp_path, L: str = "u1^2") -> Path:
    path = tmp_path / "problem.ocp"
    path.write_text(
        "\n".join(["n = 1", "r = 1", "a = 0.0", "b = 1.0", "A = [0.0]", "B = [1.0]", f'L = "{L}"', 'phi1 = "u1"']) + "\n",
        encoding="utf-8",
    )
    return path


def test_validate_builtin_and_file(tmp_path, capsys) -> None:
    code, report = _run(["validate", "--builtin", "torres-6.1"], capsys)
    assert code == 0
    assert report["problem"]["name"] == "torres-6.1"
    assert report["problem"]["n"] == 2

    code, report = _run(["validate", "--problem", str(_write_problem(tmp_path))], capsys)
    assert code == 0
    assert report["problem"]["name"] == "problem"


def test_invalid_inputs_exit_with_usage_code(tmp_path, capsys) -> None:
    code, report = _run(["validate", "--problem", str(_write_problem(tmp_path, "u1^2 + y1"))], capsys)
    assert code == 2
    assert report["error"]["type"] == "ProblemFileError"
    assert report["error"]["key"] == "L"
    assert report["error"]["line"] == 7

    code, report = _run(["validate", "--problem", str(tmp_path / "missing.ocp")], capsys)
    assert code == 2
    assert report["error"]["type"] == "FileNotFoundError"

    code, report = _run(["validate", "--builtin", "nope"], capsys)
    assert code == 2

    code, report = _run(["solve", "--builtin", "baseline", "--nodes", "1"], capsys)
    assert code == 2
    assert "--nodes must be >= 2" in report["error"]["message"]

    code, report = _run(["cost"], capsys)
    assert code == 2
    assert "Exactly one of --problem and --builtin" in report["error"]["message"]


def test_conflicting_problem_sources_are_rejected_by_the_parser() -> None:
    with pytest.raises(SystemExit) as info:
        run_ocp.main(["validate", "--builtin", "baseline", "--problem", "x.ocp"])

    assert info.value.code == 2


def test_cost_reports_admissibility_verdict(tmp_path, capsys) -> None:
    code, report = _run(["cost", "--builtin", "baseline", "--nodes", "10"], capsys)
    assert code == 0
    assert report["cost_P"] == pytest.approx(1.0, abs=1e-12)
    assert report["nodes"] == 11

    pair = tmp_path / "pair.csv"
    pair.write_text("t,x1,u1\n0.0,0.0,2.0\n0.5,0.5,2.0\n1.0,1.0,2.0\n", encoding="utf-8")
    code, report = _run(["cost", "--builtin", "baseline", "--pair", str(pair)], capsys)
    assert code == 1
    assert not report["admissible"]["pass"]
    assert report["admissible"]["max_residual"] == pytest.approx(1.0)

    code, report = _run(["cost", "--builtin", "torres-6.1", "--pair", str(pair)], capsys)
    assert code == 2


def test_transform_exit_codes(capsys) -> None:
    code, report = _run(["transform", "--builtin", "baseline", "--profile", "two-step 0.5 1.5"], capsys)
    assert code == 0
    assert report["abs_diff"] <= 1e-12

    code, report = _run(["transform", "--builtin", "baseline", "--profile", "two-step 0.4 1.6"], capsys)
    assert code == 2
    assert "out of box" in report["error"]["message"]


def test_solve_writes_report_and_trajectory(tmp_path) -> None:
    out = tmp_path / "runs" / "baseline.json"

    code = run_ocp.main(["solve", "--builtin", "baseline", "--nodes", "20", "--out", str(out)])

    report = json.loads(out.read_text(encoding="utf-8"))
    assert code == 0
    assert report["converged"]
    assert report["cost"] == pytest.approx(1.0, abs=1e-4)
    assert report["trajectory_csv"] == "baseline.csv"
    assert (tmp_path / "runs" / "baseline.csv").read_text(encoding="utf-8").startswith("t,x1,u1\n")


def test_solve_budget_failure_exits_one(capsys) -> None:
    code, report = _run(["solve", "--builtin", "lq", "--nodes", "20", "--max-iter", "2"], capsys)

    assert code == 1
    assert report["message"] == "iteration limit reached"


@pytest.mark.parametrize(
    "argv, expected",
    [
        (["check", "growth", "--builtin", "torres-6.1"], 0),
        (["check", "affine", "--builtin", "torres-6.1"], 1),
        (["check", "cov", "--builtin", "torres-6.1"], 2),
        (["check", "coercivity", "--builtin", "baseline"], 0),
        (["check", "affine", "--builtin", "lq"], 0),
        (["check", "coercivity", "--builtin", "baseline", "--shells", "3"], 2),
    ],
)
def test_check_exit_codes(argv, expected: int, capsys) -> None:
    code, report = _run(argv, capsys)

    assert code == expected
    if expected != 2:
        assert report["command"] == "check"


def test_verify_extremal_on_baseline(capsys) -> None:
    code, report = _run(["verify-extremal", "--builtin", "baseline", "--nodes", "20"], capsys)

    assert code == 0
    assert report["verification"]["pass"]
    assert set(report["verification"]["lifts"]) == {"identity", "two-step 0.5 1.5"}


def test_events_file_records_run_and_outer_iterations(tmp_path, capsys) -> None:
    events = tmp_path / "events.jsonl"

    code = run_ocp.main(["solve", "--builtin", "baseline", "--nodes", "10", "--events-file", str(events)])
    capsys.readouterr()

    rows = [json.loads(line) for line in events.read_text(encoding="utf-8").splitlines()]
    assert code == 0
    assert rows[0]["event"] == "run_start"
    assert rows[0]["args"]["builtin"] == "baseline"
    assert rows[-1] == {**rows[-1], "event": "run_end", "exit_code": 0}
    outer = [row for row in rows if row["event"] == "outer_iteration"]
    assert outer and all(row["command"] == "solve" for row in outer)
    assert all("timestamp" in row for row in rows)


def test_example_is_reproducible_for_a_seed(tmp_path) -> None:
    first, second = tmp_path / "first.json", tmp_path / "second.json"
    argv = ["example", "torres-6.1", "--seed", "7", "--samples", "256", "--sweep-nodes", "8", "16"]

    code_first = run_ocp.main(argv + ["--out", str(first)])
    code_second = run_ocp.main(argv + ["--out", str(second)])

    assert code_first == code_second
    assert first.read_bytes() == second.read_bytes()
    report = json.loads(first.read_text(encoding="utf-8"))
    assert report["seed"] == 7
    assert list(report["stages"]) == ["validate", "growth", "coercivity", "affine", "boundedness", "extremal"]
    assert report["stages"]["affine"]["verdict"] == "inapplicable"


def test_execute_renders_errors_as_json() -> None:
    code, text = execute(RunConfig(command="check", builtin="torres-6.1", check="cov"))

    assert code == 2
    assert json.loads(text)["error"]["type"] == "InvariantError"

    with pytest.raises(ValueError, match="check needs one of"):
        RunConfig(command="check", builtin="baseline", check="nope")


def test_example_baseline_passes_every_stage(capsys) -> None:
    code, report = _run(["example", "baseline", "--samples", "256", "--sweep-nodes", "10", "20"], capsys)

    assert code == 0
    assert report["pass"]
    stages = report["stages"]
    assert list(stages) == ["validate", "growth", "growth_cov", "coercivity", "affine", "boundedness", "extremal"]
    assert all(stage["exit"] == 0 for stage in stages.values())
    assert [grid["nodes"] for grid in stages["boundedness"]["grids"]] == [10, 20]
    assert stages["extremal"]["worst_gap"] <= 1e-2


def test_example_rejects_unknown_problem_and_bad_sweep(capsys) -> None:
    code, report = _run(["example", "nope"], capsys)
    assert code == 2
    assert report["error"]["type"] == "ValueError"
    assert "Unknown builtin problem 'nope'" in report["error"]["message"]

    code, report = _run(["example", "baseline", "--sweep-nodes", "20", "10"], capsys)
    assert code == 2
    assert "increasing" in report["error"]["message"]
