from __future__ import annotations

import json

import pandas as pd
import pytest

from cli import main
from processors.fixtures import generate_fixture
from processors.instance_loader import parse_document, write_instance


@pytest.fixture(autouse=True)
def _in_tmp(tmp_path, monkeypatch) -> None:
    monkeypatch.chdir(tmp_path)


def _tiny8_file(tmp_path, **config) -> str:
    doc = generate_fixture("tiny8").model_dump(mode="json", exclude_none=True)
    doc["config"].update(config)
    path = tmp_path / "tiny8-edited.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def test_simulate_against_a_baseline(tmp_path, capsys) -> None:
    code = main(["simulate", "fig5-skip", "--baseline", "fig5-standard", "--out", str(tmp_path / "sim")])
    out = capsys.readouterr().out
    assert code == 0
    assert "fig5-skip: total waiting time 4700, finish time 12" in out
    assert "fig5-standard: total waiting time 5400, finish time 13" in out
    assert "waiting time reduction 12.96%" in out
    assert "finish time reduction 7.69%" in out
    assert (tmp_path / "sim" / "trace.csv").exists()
    manifest = json.loads((tmp_path / "sim" / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["instance"]["name"] == "fig5-skip"
    assert set(manifest["artifacts"]) == {"trace"}


def test_params_without_demand(tmp_path, capsys) -> None:
    assert main(["params", "tiny8", "--demand", "0", "--out", str(tmp_path / "p")]) == 0
    summary = pd.read_csv(tmp_path / "p" / "params_summary.csv")
    assert list(summary["required_services"]) == [0, 0]
    assert list(summary["densest_window"]) == ["1-8", "9-16"]
    stations = pd.read_csv(tmp_path / "p" / "params_stations.csv")
    assert len(stations) == 16
    out = capsys.readouterr().out
    assert "densest_window" in out and "crowdedness" in out


def test_solve_writes_solution_and_timetable(tmp_path, capsys) -> None:
    out = tmp_path / "solve"
    code = main(["solve", "tiny8", "--engine", "highs", "--time-limit", "120", "--out", str(out)])
    assert code == 0
    assert "status=optimal" in capsys.readouterr().out
    assert (out / "solution.txt").read_text(encoding="utf-8").startswith("# status=optimal")
    assert (out / "timetable.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["options"]["model"] == "1a"
    assert manifest["options"]["engine"] == "highs"


def test_build_then_normalize_the_mps(tmp_path) -> None:
    assert main(["build", "tiny8", "--model", "2b", "--out", str(tmp_path / "built")]) == 0
    written = tmp_path / "built" / "tiny8-2b.mps"
    assert written.exists()
    assert main(["export-mps", "--from-mps", str(written), "--out", str(tmp_path / "again")]) == 0
    (again,) = (tmp_path / "again").glob("*.mps")
    assert again.read_text(encoding="utf-8") == written.read_text(encoding="utf-8")


def test_fixture_to_file(tmp_path) -> None:
    assert main(["fixture", "tiny8", "--out", str(tmp_path / "inst" / "x.json")]) == 0
    path = tmp_path / "inst" / "x.json"
    assert parse_document(json.loads(path.read_text(encoding="utf-8"))).name == "tiny8"
    assert (tmp_path / "inst" / "manifest.json").exists()


def test_instance_file_round_trips_through_the_cli(tmp_path, capsys) -> None:
    path = write_instance(generate_fixture("fig5-standard"), tmp_path / "fig5.json")
    assert main(["simulate", str(path), "--out", str(tmp_path / "sim")]) == 0
    assert "total waiting time 5400" in capsys.readouterr().out


def test_unknown_fixture(tmp_path, capsys) -> None:
    assert main(["solve", "nosuch", "--out", str(tmp_path / "x")]) == 1
    assert "Unknown fixture" in capsys.readouterr().err


def test_schema_error(tmp_path, capsys) -> None:
    path = _tiny8_file(tmp_path, h_min=-5.0)
    assert main(["solve", path, "--out", str(tmp_path / "x")]) == 1
    assert "schema error at /config/h_min" in capsys.readouterr().err


def test_infeasible_instance(tmp_path) -> None:
    path = _tiny8_file(tmp_path, fleet=1)
    assert main(["solve", path, "--engine", "highs", "--time-limit", "60", "--out", str(tmp_path / "x")]) == 2


def test_missing_source(tmp_path, capsys) -> None:
    assert main(["solve", "--out", str(tmp_path / "x")]) == 1
    assert "Missing parameter" in capsys.readouterr().err


def test_simulate_needs_a_timetable(tmp_path, capsys) -> None:
    assert main(["simulate", "tiny8", "--out", str(tmp_path / "x")]) == 1
    assert "timetable for tiny8" in capsys.readouterr().err


def test_simulate_a_written_solution(tmp_path, capsys) -> None:
    solved = tmp_path / "solve"
    assert main(["solve", "tiny8", "--engine", "highs", "--time-limit", "120", "--out", str(solved)]) == 0
    capsys.readouterr()

    assert main(["simulate", "tiny8", "--solution", str(solved / "solution.txt"), "--out", str(tmp_path / "a")]) == 0
    from_solution = capsys.readouterr().out
    assert main(["simulate", "tiny8", "--timetable", str(solved / "timetable.csv"), "--out", str(tmp_path / "b")]) == 0
    from_csv = capsys.readouterr().out

    assert from_solution.startswith("tiny8: total waiting time ")
    assert from_solution.splitlines()[0] == from_csv.splitlines()[0]
    assert (tmp_path / "a" / "trace.csv").exists()


def test_simulate_takes_one_timetable_source(tmp_path) -> None:
    with pytest.raises(SystemExit):
        main(["simulate", "tiny8", "--solution", "s.txt", "--timetable", "t.csv", "--out", str(tmp_path / "x")])
