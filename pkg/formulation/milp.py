# formulation/milp.py
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Iterable, Literal, Mapping, Optional, Union

from errors import ConfigMismatch

VarKind = Literal["binary", "continuous"]
Sense = Literal["<=", "=", ">="]
ObjSense = Literal["max", "min"]

SENSES: tuple[str, ...] = ("<=", "=", ">=")
FAMILY_TAGS: tuple[str, ...] = (
    "zone",
    "timetable",
    "headway",
    "turnaround",
    "rolling_stock",
    "demand",
    "skip_stop",
    "linearization",
    "objective_link",
)

Coefs = Union[Mapping[str, float], Iterable[tuple[str, float]]]


@dataclass(frozen=True)
class Variable:
    name: str
    kind: VarKind
    lower: float = 0.0
    upper: float = math.inf

    @property
    def is_binary(self) -> bool:
        return self.kind == "binary"


@dataclass(frozen=True)
class Row:
    name: str
    coefs: tuple[tuple[str, float], ...]
    sense: Sense
    rhs: float
    tag: str

    def activity(self, values: Mapping[str, float]) -> float:
        return sum(c * values.get(v, 0.0) for v, c in self.coefs)

    def violation(self, values: Mapping[str, float]) -> float:
        """Amount by which the row is violated (0 when satisfied)."""
        lhs = self.activity(values)
        if self.sense == "<=":
            return max(0.0, lhs - self.rhs)
        if self.sense == ">=":
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


@dataclass(frozen=True)
class Objective:
    name: str
    sense: ObjSense
    coefs: tuple[tuple[str, float], ...]
    constant: float = 0.0

    def value(self, values: Mapping[str, float]) -> float:
        return self.constant + sum(c * values.get(v, 0.0) for v, c in self.coefs)


@dataclass(frozen=True)
class Violation:
    kind: str                       # "row" | "bound" | "integrality"
    name: str
    amount: float
    tag: Optional[str] = None


def merge_coefs(coefs: Coefs) -> tuple[tuple[str, float], ...]:
    """Sum duplicate variables, drop zeros, keep first-seen order."""
    items = coefs.items() if isinstance(coefs, Mapping) else coefs
    acc: dict[str, float] = {}
    for v, c in items:
        acc[v] = acc.get(v, 0.0) + float(c)
    return tuple((v, c) for v, c in acc.items() if c != 0.0)


def make_row(name: str, coefs: Coefs, sense: Sense, rhs: float, tag: str) -> Row:
    if sense not in SENSES:
        raise ConfigMismatch(f"row {name}: unknown sense {sense!r}")
    return Row(name, merge_coefs(coefs), sense, float(rhs), tag)


def make_objective(name: str, sense: ObjSense, coefs: Coefs, constant: float = 0.0) -> Objective:
    if sense not in ("max", "min"):
        raise ConfigMismatch(f"objective {name}: unknown sense {sense!r}")
    return Objective(name, sense, merge_coefs(coefs), float(constant))


@dataclass(frozen=True)
class MilpInstance:
    """
    A generic mixed 0-1 linear program.

    `objective` is the active one; `objectives` keeps every objective built for
    the model (bi-objective models carry both) so drivers can switch between
    them without rebuilding.
    """

    name: str
    variables: tuple[Variable, ...]
    rows: tuple[Row, ...]
    objective: Objective
    objectives: Mapping[str, Objective] = field(default_factory=dict)
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        declared = self.index
        if len(declared) != len(self.variables):
            raise ConfigMismatch(f"instance {self.name}: duplicate variable names")
        for r in self.rows:
            for v, _ in r.coefs:
                if v not in declared:
                    raise ConfigMismatch(f"row {r.name} references undeclared variable {v}")
        for obj in (self.objective, *self.objectives.values()):
            for v, _ in obj.coefs:
                if v not in declared:
                    raise ConfigMismatch(f"objective {obj.name} references undeclared variable {v}")

    # ---------- lookups ----------

    @cached_property
    def index(self) -> dict[str, int]:
        return {v.name: pos for pos, v in enumerate(self.variables)}

    def variable(self, name: str) -> Variable:
        return self.variables[self.index[name]]

    def binaries(self) -> list[str]:
        return [v.name for v in self.variables if v.is_binary]

    def tag_counts(self) -> Counter:
        return Counter(r.tag for r in self.rows)

    def rows_tagged(self, tag: str) -> list[Row]:
        return [r for r in self.rows if r.tag == tag]

    def row(self, name: str) -> Row:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    # ---------- derivations ----------

    def with_objective(self, name: str) -> "MilpInstance":
        if name not in self.objectives:
            raise ConfigMismatch(f"instance {self.name} has no objective {name!r}")
        return replace(self, objective=self.objectives[name])

    def with_cut(self, row: Row) -> "MilpInstance":
        return replace(self, rows=self.rows + (row,))

    def with_bounds(self, bounds: Mapping[str, tuple[float, float]]) -> "MilpInstance":
        unknown = set(bounds) - set(self.index)
        if unknown:
            raise ConfigMismatch(f"cannot bound undeclared variables: {sorted(unknown)[:5]}")
        vars_ = tuple(
            replace(v, lower=bounds[v.name][0], upper=bounds[v.name][1]) if v.name in bounds else v
            for v in self.variables
        )
        return replace(self, variables=vars_)

    def fix(self, assignment: Mapping[str, float]) -> "MilpInstance":
        """Pin the listed variables to the given values."""
        return self.with_bounds({name: (float(val), float(val)) for name, val in assignment.items()})

    # ---------- checking ----------

    def objective_value(self, values: Mapping[str, float], name: Optional[str] = None) -> float:
        obj = self.objective if name is None else self.objectives[name]
        return obj.value(values)

    def check(self, values: Mapping[str, float], tol: float = 1e-6) -> list[Violation]:
        """Every bound, integrality and row violation above `tol`."""
        found: list[Violation] = []
        for v in self.variables:
            val = values.get(v.name, 0.0)
            if val < v.lower - tol:
                found.append(Violation("bound", v.name, v.lower - val))
            elif val > v.upper + tol:
                found.append(Violation("bound", v.name, val - v.upper))
            if v.is_binary and abs(val - round(val)) > tol:
                found.append(Violation("integrality", v.name, abs(val - round(val))))
        for r in self.rows:
            amount = r.violation(values)
            if amount > tol:
                found.append(Violation("row", r.name, amount, r.tag))
        return found


class InstanceBuilder:
    """Mutable accumulator that freezes into a MilpInstance."""

    def __init__(self, name: str) -> None:
        self.name = name
        self._variables: dict[str, Variable] = {}
        self._rows: list[Row] = []

    def add_variable(self, name: str, kind: VarKind, lower: float = 0.0, upper: float = math.inf) -> str:
        if name in self._variables:
            raise ConfigMismatch(f"variable {name} declared twice")
        if kind == "binary":
            lower, upper = max(0.0, lower), min(1.0, upper)
        if lower > upper:
            raise ConfigMismatch(f"variable {name}: lower bound {lower} exceeds upper bound {upper}")
        self._variables[name] = Variable(name, kind, float(lower), float(upper))
        return name

    def extend(self, rows: Iterable[Row]) -> None:
        self._rows.extend(rows)

    @property
    def variables(self) -> tuple[Variable, ...]:
        return tuple(self._variables.values())

    def build(
        self,
        objective: Objective,
        objectives: Optional[Mapping[str, Objective]] = None,
        metadata: Optional[Mapping[str, Any]] = None,
    ) -> MilpInstance:
        return MilpInstance(
            name=self.name,
            variables=self.variables,
            rows=tuple(self._rows),
            objective=objective,
            objectives=dict(objectives or {objective.name: objective}),
            metadata=dict(metadata or {}),
        )


__all__ = [
    "FAMILY_TAGS",
    "SENSES",
    "Variable",
    "Row",
    "Objective",
    "Violation",
    "MilpInstance",
    "InstanceBuilder",
    "make_row",
    "make_objective",
    "merge_coefs",
]
