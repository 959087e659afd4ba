from __future__ import annotations

import pytest

from errors import IoFailure, ParseError
from services.solution_io import read_solution, solution_text, write_solution
from services.solver import MilpSolution


def test_text_layout() -> None:
    sol = MilpSolution("optimal", 3.0, {"tau[1]": 1.0, "d[1][2]": 100.5}, bound=3.0, wall_time=0.25, nodes=7)
    assert solution_text(sol) == (
        "# status=optimal objective=3 bound=3 wall_time=0.250 nodes=7\n"
        "tau[1] 1\n"
        "d[1][2] 100.5\n"
    )


def test_write_then_read(tmp_path) -> None:
    sol = MilpSolution("feasible", 12.5, {"x[1]": 0.0, "h[2]": 90.0}, bound=14.0, wall_time=1.5, nodes=40)
    path = write_solution(sol, tmp_path / "runs" / "tiny8.sol")
    back = read_solution(path)
    assert back.status == "feasible"
    assert back.objective == 12.5 and back.bound == 14.0
    assert back.assignment == sol.assignment
    assert back.nodes == 40
    assert back.instance_name == "tiny8"


def test_no_incumbent(tmp_path) -> None:
    path = write_solution(MilpSolution("infeasible", None), tmp_path / "none.sol")
    back = read_solution(path)
    assert back.objective is None and back.bound is None
    assert back.assignment == {}


@pytest.mark.parametrize(
    ("text", "line"),
    [
        ("tau[1] 1\n", 1),
        ("# status=done objective=1 bound=1 wall_time=0\n", 1),
        ("# status=optimal objective=1 bound=1\n", 1),
        ("# status=optimal objective=1 bound=1 wall_time=0 nodes=1\ntau[1]\n", 2),
        ("# status=optimal objective=1 bound=1 wall_time=0 nodes=1\ntau[1] 1\nx[2] yes\n", 3),
    ],
)
def test_malformed(tmp_path, text: str, line: int) -> None:
    path = tmp_path / "bad.sol"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ParseError) as err:
        read_solution(path)
    assert err.value.line_number == line


def test_missing(tmp_path) -> None:
    with pytest.raises(IoFailure):
        read_solution(tmp_path / "nothing.sol")
