# services/solution_io.py
from __future__ import annotations

from pathlib import Path
from typing import Optional, Union

from errors import IoFailure, ParseError
from services.solver import STATUSES, MilpSolution

_HEADER_KEYS = ("status", "objective", "bound", "wall_time", "nodes")


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return "none"
    value = float(value)
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def solution_text(solution: MilpSolution) -> str:
    header = (
        f"# status={solution.status} objective={_fmt(solution.objective)} "
        f"bound={_fmt(solution.bound)} wall_time={solution.wall_time:.3f} nodes={solution.nodes}"
    )
    body = [f"{name} {_fmt(value)}" for name, value in solution.assignment.items()]
    return "\n".join([header, *body]) + "\n"


def write_solution(solution: MilpSolution, path: Union[str, Path]) -> Path:
    """Plain text: one header comment, then `var value` per line."""
    out = Path(path)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(solution_text(solution), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(out), exc.strerror or str(exc)) from exc
    return out


def _header(line: str, line_no: int) -> dict[str, str]:
    fields = {}
    for token in line.lstrip("#").split():
        key, sep, value = token.partition("=")
        if not sep:
            raise ParseError(line_no, f"header token {token!r} is not key=value")
        fields[key] = value
    missing = [k for k in _HEADER_KEYS[:4] if k not in fields]
    if missing:
        raise ParseError(line_no, f"header lacks {', '.join(missing)}")
    if fields["status"] not in STATUSES:
        raise ParseError(line_no, f"unknown status {fields['status']!r}")
    return fields


def _optional(text: str, line_no: int) -> Optional[float]:
    if text == "none":
        return None
    try:
        return float(text)
    except ValueError as exc:
        raise ParseError(line_no, f"expected a number, got {text!r}") from exc


def read_solution(path: Union[str, Path]) -> MilpSolution:
    src = Path(path)
    try:
        lines = src.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoFailure(str(src), exc.strerror or str(exc)) from exc
    if not lines or not lines[0].startswith("#"):
        raise ParseError(1, "missing '# status=...' header")
    fields = _header(lines[0], 1)
    assignment: dict[str, float] = {}
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(line_no, "expected 'name value'")
        value = _optional(parts[1], line_no)
        if value is None:
            raise ParseError(line_no, f"{parts[0]} has no value")
        assignment[parts[0]] = value
    return MilpSolution(
        status=fields["status"],
        objective=_optional(fields["objective"], 1),
        assignment=assignment,
        bound=_optional(fields["bound"], 1),
        wall_time=float(_optional(fields["wall_time"], 1) or 0.0),
        nodes=int(fields.get("nodes", "0")),
        instance_name=src.stem,
    )


__all__ = ["write_solution", "read_solution", "solution_text"]
