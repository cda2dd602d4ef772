import json
import subprocess
import sys

import pytest

from offload_opt import solver
from offload_opt.cli import dumps, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def instance_file(tmp_path, capsys):
    path = tmp_path / "inst.json"
    assert run(capsys, "gen", "--n-servers", "20", "--seed", "3", "--out", str(path))[0] == 0
    return path


def test_solve_then_evaluate_round_trip(tmp_path, capsys, instance_file):
    code, out, _ = run(capsys, "solve", "--instance", str(instance_file))
    assert code == 0
    sol = json.loads(out)
    assert sol["branch"] == "offload"
    assert sol["gates"]["qbar_star"] is None  # unbounded
    plan = tmp_path / "plan.json"
    plan.write_text(out)
    code, out, _ = run(capsys, "evaluate", "--instance", str(instance_file), "--plan", str(plan))
    assert code == 0
    cb = json.loads(out)
    assert cb["objective_j"] == pytest.approx(sol["objective_j"], rel=1e-12)
    assert cb["feasible"] is True


def test_inline_solve(capsys):
    code, out, _ = run(capsys, "solve", "--n-servers", "30", "--alpha", "70", "--seed", "1")
    assert code == 0
    assert len(json.loads(out)["allocations"]) == 5


def test_infeasible_exit_code(capsys):
    code, _, err = run(capsys, "solve", "--tau-d", "1e-9")
    assert code == 2
    assert "infeasible" in err


def test_invalid_inputs_exit_one(tmp_path, capsys, instance_file):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "solve", "--instance", str(bad))[0] == 1

    data = json.loads(instance_file.read_text())
    data["alpha"] = -1
    bad.write_text(json.dumps(data))
    code, _, err = run(capsys, "solve", "--instance", str(bad))
    assert code == 1
    assert "NonPositiveField" in err

    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"x0": 0.5, "allocations": [{"id": "nope", "fraction": 0.5}]}))
    assert run(capsys, "evaluate", "--instance", str(instance_file), "--plan", str(plan))[0] == 1

    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--vary", "beta", "--values", "1", "--out", "-"])
    assert exc.value.code == 1


def test_sweep_to_stdout(capsys):
    code, out, _ = run(capsys, "sweep", "--vary", "m", "--values", "1..10", "--trials", "10", "--out", "-", "--jobs", "1")
    assert code == 0
    assert len(out.strip().splitlines()) == 1 + 400


def test_sweep_file_is_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["sweep", "--vary", "alpha", "--values", "5,20", "--trials", "5", "--seed", "9"]
    assert run(capsys, *args, "--out", str(a))[0] == 0
    assert run(capsys, *args, "--out", str(b), "--jobs", "2")[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_seed_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("OFFLOAD_OPT_SEED", "4")
    _, env_out, _ = run(capsys, "gen", "--n-servers", "3")
    _, flag_out, _ = run(capsys, "gen", "--n-servers", "3", "--seed", "4")
    assert env_out == flag_out
    monkeypatch.setenv("OFFLOAD_OPT_SEED", "x")
    assert run(capsys, "gen", "--n-servers", "3")[0] == 1


def test_verify_quick_passes(capsys):
    code, out, _ = run(capsys, "verify", "--level", "quick")
    assert code == 0
    assert "all checks passed" in out


def test_verify_catches_broken_cubic(monkeypatch, capsys):
    real = solver.solve_cubic
    monkeypatch.setattr(solver, "solve_cubic", lambda c: real(c) * 1.01)
    code, out, _ = run(capsys, "verify", "--level", "quick")
    assert code == 1
    assert "[FAIL]" in out


def test_dumps_formats():
    assert dumps(0.1) == "0.10000000000000001"
    assert dumps(float("inf")) == "null"
    assert json.loads(dumps({"a": [1, 2.5, None, True]})) == {"a": [1, 2.5, None, True]}


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "offload_opt", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "verify" in proc.stdout
