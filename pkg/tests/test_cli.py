import csv
import json
import math
from pathlib import Path

import pytest

from geomech import cli

ROOT = Path(__file__).resolve().parent.parent
PROBLEMS = sorted((ROOT / "problems").glob("*.json"))
GOLDEN = Path(__file__).resolve().parent / "golden"


def command_of(path):
    return json.loads(path.read_text())["options"]["command"]


def close(a, b, path="$"):
    if isinstance(a, float) or isinstance(b, float):
        assert math.isclose(float(a), float(b), rel_tol=1e-6, abs_tol=1e-9), path
    elif isinstance(a, dict):
        assert sorted(a) == sorted(b), path
        for k in a:
            close(a[k], b[k], f"{path}/{k}")
    elif isinstance(a, list):
        assert len(a) == len(b), path
        for i, (x, y) in enumerate(zip(a, b)):
            close(x, y, f"{path}/{i}")
    else:
        assert a == b, path


@pytest.fixture(scope="module")
def reports():
    out = {}
    for p in PROBLEMS:
        prob = cli.load(p)
        out[p.name] = cli.run(command_of(p), prob)
    return out


def test_every_golden_problem_succeeds(reports):
    assert len(reports) >= 10
    for name, rep in reports.items():
        assert rep.exit_code == cli.EXIT_OK, (name, rep.failed)


def test_reports_match_frozen_outputs(reports):
    for name, rep in reports.items():
        frozen = json.loads((GOLDEN / name).read_text())
        close(json.loads(cli._emit(rep, "json")), frozen, name)


def test_json_output_is_byte_identical_across_runs(capsys):
    path = str(ROOT / "problems" / "radial.json")
    assert cli.main(["noether", path, "--format", "json"]) == 0
    first = capsys.readouterr().out
    assert cli.main(["noether", path, "--format", "json"]) == 0
    assert capsys.readouterr().out == first
    assert json.loads(first)["status"] == "ok"


def base():
    return {"chart": {"coordinates": ["x", "y"]},
            "lagrangian": "(vx^2 + vy^2)/2 - (x^2 + y^2)/2",
            "options": {"command": "noether"}}


def test_unknown_coordinate_in_symmetry_is_reported_with_pointer():
    raw = base()
    raw["symmetries"] = [{"name": "rot", "field": {"x": "y", "z": "1"}}]
    with pytest.raises(cli.ProblemError) as err:
        cli.load_dict(raw)
    assert err.value.pointer == "/symmetries/0/field/z"


def test_undeclared_symbol_in_lagrangian_is_reported():
    raw = base()
    raw["lagrangian"] = "vx^2 + m*x"
    with pytest.raises(cli.ProblemError) as err:
        cli.load_dict(raw)
    assert err.value.pointer == "/lagrangian"


def test_bad_assumption_kind_and_unknown_key():
    raw = base()
    raw["chart"]["assumptions"] = [{"expr": "x", "kind": "small"}]
    with pytest.raises(cli.ProblemError) as err:
        cli.load_dict(raw)
    assert err.value.pointer == "/chart/assumptions/0/kind"
    raw = base()
    raw["extra"] = 1
    with pytest.raises(cli.ProblemError) as err:
        cli.load_dict(raw)
    assert err.value.pointer == "/extra"


def test_usage_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["analyze", str(bad)]) == cli.EXIT_USAGE
    assert cli.main(["analyze", str(tmp_path / "missing.json")]) == cli.EXIT_USAGE
    assert cli.main(["frobnicate", str(bad)]) == cli.EXIT_USAGE
    assert cli.main([]) == cli.EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_analyze_reports_regular_dynamics(tmp_path, capsys):
    path = tmp_path / "osc.json"
    raw = base()
    raw["options"]["command"] = "analyze"
    path.write_text(json.dumps(raw))
    assert cli.main(["analyze", str(path), "--format", "json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "ok"


def test_failed_certificate_exits_1(tmp_path, capsys):
    raw = base()
    raw["symmetries"] = [{"name": "shift", "field": {"x": "1"}}]
    path = tmp_path / "shift.json"
    path.write_text(json.dumps(raw))
    assert cli.main(["noether", str(path), "--format", "json"]) == cli.EXIT_FAILED
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "failed"


def test_iteration_cap_exits_3(capsys):
    path = str(ROOT / "problems" / "singular_a.json")
    assert cli.main(["constrain", path, "--max-iter", "1"]) == cli.EXIT_NONTERMINATION
    assert "nontermination" in capsys.readouterr().out


def test_export_csv_writes_trajectory(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    path = str(ROOT / "problems" / "kepler.json")
    assert cli.main(["integrate", path, "--export-csv", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0][0] == "t" and len(rows) > 10
    assert float(rows[1][0]) == 0.0
    capsys.readouterr()


def test_run_all_directory(capsys):
    code = cli.main(["--all", str(ROOT / "problems"), "--format", "json"])
    out = capsys.readouterr().out
    assert code == 0
    assert out.count('"status": "ok"') == len(PROBLEMS)
