# services/mps.py
"""
MPS export and import.

Files are written in the fixed dialect when every name fits in eight
characters, otherwise in the free dialect (flagged by a ``* DIALECT FREE``
header comment). Objective sense is recorded as a ``* OBJSENSE MAX`` comment,
and constraint-family tags as ``* family <tag>`` comments inside ROWS, so a
written file reads back into an equivalent instance while staying readable by
tools that ignore comments.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Optional, Union

from errors import IoFailure, ParseError
from formulation.milp import InstanceBuilder, MilpInstance, Row, make_objective, make_row

_SECTIONS = ("NAME", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA", "OBJSENSE")
_ROW_TYPES = {"L": "<=", "G": ">=", "E": "="}
_SENSE_TYPES = {v: k for k, v in _ROW_TYPES.items()}
_FIXED_NAME = 8
_FIXED_VALUE = 12
_RHS_SET = "RHS"
_BOUND_SET = "BND"

PathLike = Union[str, Path]


def _fmt(value: float) -> str:
    value = float(value)
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def _is_fixed(instance: MilpInstance) -> bool:
    names = [v.name for v in instance.variables] + [r.name for r in instance.rows] + [instance.objective.name]
    if any(len(n) > _FIXED_NAME or " " in n for n in names):
        return False
    values = [c for r in instance.rows for _, c in r.coefs] + [r.rhs for r in instance.rows]
    values += [c for _, c in instance.objective.coefs]
    values += [b for v in instance.variables for b in (v.lower, v.upper) if math.isfinite(b)]
    return all(len(_fmt(x)) <= _FIXED_VALUE for x in values)


class _Lines:
    def __init__(self, fixed: bool) -> None:
        self.fixed = fixed
        self.out: list[str] = []

    def raw(self, text: str) -> None:
        self.out.append(text)

    def entry(self, kind: str, first: str, second: str = "", value: Optional[float] = None) -> None:
        val = "" if value is None else _fmt(value)
        if self.fixed:
            line = f" {kind:<2} {first:<8}  {second:<8}  {val:>12}"
        else:
            line = " " + " ".join(tok for tok in (kind or "   ", first, second, val) if tok)
        self.out.append(line.rstrip())

    def text(self) -> str:
        return "\n".join(self.out) + "\n"


def to_mps_text(instance: MilpInstance) -> str:
    fixed = _is_fixed(instance)
    obj = instance.objective
    lines = _Lines(fixed)
    lines.raw(f"* {instance.name}")
    if not fixed:
        lines.raw("* DIALECT FREE")
    lines.raw(f"* OBJSENSE {obj.sense.upper()}")
    lines.raw(f"NAME          {instance.name}" if fixed else f"NAME {instance.name}")

    lines.raw("ROWS")
    lines.entry("N", obj.name)
    tag = None
    for r in instance.rows:
        if r.tag != tag:
            tag = r.tag
            lines.raw(f"* family {tag}")
        lines.entry(_SENSE_TYPES[r.sense], r.name)

    columns: dict[str, list[tuple[str, float]]] = {v.name: [] for v in instance.variables}
    for v, c in obj.coefs:
        columns[v].append((obj.name, c))
    for r in instance.rows:
        for v, c in r.coefs:
            columns[v].append((r.name, c))
    lines.raw("COLUMNS")
    for name, entries in columns.items():
        if not entries:
            lines.entry("", name, obj.name, 0.0)
        for row_name, c in entries:
            lines.entry("", name, row_name, c)

    lines.raw("RHS")
    if obj.constant:
        lines.entry("", _RHS_SET, obj.name, -obj.constant)
    for r in instance.rows:
        if r.rhs:
            lines.entry("", _RHS_SET, r.name, r.rhs)
    lines.raw("RANGES")

    lines.raw("BOUNDS")
    for v in instance.variables:
        lo, up = v.lower, v.upper
        if v.is_binary:
            lines.entry("BV", _BOUND_SET, v.name)
            if (lo, up) != (0.0, 1.0):
                lines.entry("FX" if lo == up else "LO", _BOUND_SET, v.name, lo)
                if lo != up:
                    lines.entry("UP", _BOUND_SET, v.name, up)
            continue
        if lo == up:
            lines.entry("FX", _BOUND_SET, v.name, lo)
            continue
        if math.isinf(lo) and math.isinf(up):
            lines.entry("FR", _BOUND_SET, v.name)
            continue
        if math.isinf(lo):
            lines.entry("MI", _BOUND_SET, v.name)
        elif lo != 0.0:
            lines.entry("LO", _BOUND_SET, v.name, lo)
        if math.isfinite(up):
            lines.entry("UP", _BOUND_SET, v.name, up)
    lines.raw("ENDATA")
    return lines.text()


def write_mps(instance: MilpInstance, destination: PathLike) -> Path:
    path = Path(destination)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as handle:
            handle.write(to_mps_text(instance))
    except OSError as exc:
        raise IoFailure(str(path), exc.strerror or str(exc)) from exc
    return path


# ---------- reading ----------

def _number(token: str, line_no: int) -> float:
    try:
        return float(token)
    except ValueError as exc:
        raise ParseError(line_no, f"expected a number, got {token!r}") from exc


def parse_mps(lines: Iterable[str], name: str = "mps") -> MilpInstance:
    section = None
    sense = "min"
    tag = "mps"
    obj_name: Optional[str] = None
    row_order: list[str] = []
    row_sense: dict[str, str] = {}
    row_tag: dict[str, str] = {}
    row_coefs: dict[str, list[tuple[str, float]]] = {}
    rhs: dict[str, float] = {}
    obj_coefs: list[tuple[str, float]] = []
    constant = 0.0
    col_order: list[str] = []
    kinds: dict[str, str] = {}
    lower: dict[str, float] = {}
    upper: dict[str, float] = {}
    in_int_block = False

    def declare(col: str) -> None:
        if col not in kinds:
            col_order.append(col)
            kinds[col] = "binary" if in_int_block else "continuous"
            lower[col], upper[col] = 0.0, (1.0 if in_int_block else math.inf)

    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        if line.startswith("*"):
            words = line[1:].split()
            if len(words) == 2 and words[0] == "OBJSENSE":
                sense = words[1].lower()
            elif len(words) == 2 and words[0] == "family":
                tag = words[1]
            continue
        tokens = line.split()
        if not line[0].isspace():
            head = tokens[0]
            if head not in _SECTIONS:
                raise ParseError(line_no, f"unknown section {head!r}")
            section = head
            if head == "NAME" and len(tokens) > 1:
                name = tokens[1]
            if head == "OBJSENSE" and len(tokens) > 1:
                sense = tokens[1].lower()
            if head == "ENDATA":
                break
            continue

        if section == "OBJSENSE":
            sense = tokens[0].lower()
            if sense not in ("max", "min", "maximize", "minimize"):
                raise ParseError(line_no, f"unknown objective sense {tokens[0]!r}")
            sense = sense[:3]
        elif section == "ROWS":
            if len(tokens) != 2:
                raise ParseError(line_no, "ROWS entries need a type and a name")
            kind, row = tokens
            if kind == "N":
                if obj_name is None:
                    obj_name = row
                continue
            if kind not in _ROW_TYPES:
                raise ParseError(line_no, f"unknown row type {kind!r}")
            if row in row_sense:
                raise ParseError(line_no, f"row {row} declared twice")
            row_order.append(row)
            row_sense[row] = _ROW_TYPES[kind]
            row_tag[row] = tag
            row_coefs[row] = []
        elif section == "COLUMNS":
            if "'MARKER'" in tokens or "MARKER" in tokens:
                in_int_block = "'INTORG'" in tokens or "INTORG" in tokens
                continue
            if len(tokens) not in (3, 5):
                raise ParseError(line_no, "COLUMNS entries need a column and row/value pairs")
            col = tokens[0]
            declare(col)
            for row, val in zip(tokens[1::2], tokens[2::2]):
                value = _number(val, line_no)
                if row == obj_name:
                    obj_coefs.append((col, value))
                elif row in row_coefs:
                    row_coefs[row].append((col, value))
                else:
                    raise ParseError(line_no, f"unknown row {row!r}")
        elif section == "RHS":
            pairs = tokens[1:] if len(tokens) % 2 == 1 else tokens
            for row, val in zip(pairs[0::2], pairs[1::2]):
                value = _number(val, line_no)
                if row == obj_name:
                    constant = -value
                elif row in row_sense:
                    rhs[row] = value
                else:
                    raise ParseError(line_no, f"unknown row {row!r}")
        elif section == "RANGES":
            raise ParseError(line_no, "ranged rows are not supported")
        elif section == "BOUNDS":
            if len(tokens) < 3:
                raise ParseError(line_no, "BOUNDS entries need a type, a set name and a column")
            kind, col = tokens[0], tokens[2]
            declare(col)
            value = _number(tokens[3], line_no) if len(tokens) > 3 else None
            if kind == "BV":
                kinds[col], lower[col], upper[col] = "binary", 0.0, 1.0
            elif kind in ("UP", "LO", "FX", "UI", "LI") and value is None:
                raise ParseError(line_no, f"{kind} bound needs a value")
            elif kind in ("UP", "UI"):
                upper[col] = value
            elif kind in ("LO", "LI"):
                lower[col] = value
            elif kind == "FX":
                lower[col] = upper[col] = value
            elif kind == "FR":
                lower[col], upper[col] = -math.inf, math.inf
            elif kind == "MI":
                lower[col] = -math.inf
            elif kind == "PL":
                upper[col] = math.inf
            else:
                raise ParseError(line_no, f"unknown bound type {kind!r}")
        else:
            raise ParseError(line_no, "data line outside any section")

    if obj_name is None:
        raise ParseError(0, "no objective (N) row")
    for col in col_order:
        if kinds[col] == "binary" and not (0.0 <= lower[col] and upper[col] <= 1.0):
            raise ParseError(0, f"integer column {col} is not binary; general integers are not supported")

    builder = InstanceBuilder(name)
    for col in col_order:
        builder.add_variable(col, kinds[col], lower[col], upper[col])
    rows: list[Row] = [
        make_row(r, row_coefs[r], row_sense[r], rhs.get(r, 0.0), row_tag[r]) for r in row_order
    ]
    builder.extend(rows)
    objective = make_objective(obj_name, "max" if sense == "max" else "min", obj_coefs, constant)
    return builder.build(objective)


def read_mps(source: PathLike) -> MilpInstance:
    path = Path(source)
    try:
        with path.open("r", encoding="utf-8") as handle:
            return parse_mps(handle, name=path.stem)
    except OSError as exc:
        raise IoFailure(str(path), exc.strerror or str(exc)) from exc


__all__ = ["to_mps_text", "write_mps", "parse_mps", "read_mps"]
