# errors.py
from __future__ import annotations

from typing import Optional


class MetroTimetableError(Exception):
    """Base class for every failure raised by the toolkit."""


# ---------- topology / demand ----------

class DistanceTooShort(MetroTimetableError, ValueError):
    def __init__(self, distance: float, envelope: float) -> None:
        self.distance = distance
        self.envelope = envelope
        super().__init__(
            f"Segment of {distance:g} m cannot reach cruising speed "
            f"(acceleration + braking need {envelope:g} m)"
        )


class UnknownStation(MetroTimetableError, KeyError):
    def __init__(self, station: int) -> None:
        self.station = station
        super().__init__(f"Unknown station: {station}")

    def __str__(self) -> str:
        return self.args[0]


class NonPositiveCapacity(MetroTimetableError, ValueError):
    pass


class NonPositiveFactor(MetroTimetableError, ValueError):
    pass


class LineTooShort(MetroTimetableError, ValueError):
    pass


# ---------- model building ----------

class ConfigMismatch(MetroTimetableError, ValueError):
    pass


class MissingParameter(MetroTimetableError, ValueError):
    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"Missing parameter: {name}")


class ModeMismatch(MetroTimetableError, ValueError):
    pass


class UnboundedTime(MetroTimetableError, ValueError):
    def __init__(self, variable: str) -> None:
        self.variable = variable
        super().__init__(f"Time variable {variable} has no finite upper bound")


# ---------- solving ----------

class NumericalFailure(MetroTimetableError):
    def __init__(self, status: int, message: str, condition: Optional[float] = None) -> None:
        self.status = status
        self.condition = condition
        detail = f" (condition estimate {condition:.3e})" if condition is not None else ""
        super().__init__(f"LP engine failed with status {status}: {message}{detail}")


class Infeasible(MetroTimetableError):
    pass


class TimeLimitReached(MetroTimetableError):
    def __init__(self, message: str, incumbent: Optional[float] = None) -> None:
        self.incumbent = incumbent
        super().__init__(message)


# ---------- files ----------

class IoFailure(MetroTimetableError, OSError):
    def __init__(self, path: str, reason: str) -> None:
        self.path = path
        super().__init__(f"{path}: {reason}")

    def __str__(self) -> str:
        return self.args[0]


class ParseError(MetroTimetableError, ValueError):
    def __init__(self, line_number: int, message: str) -> None:
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class SchemaError(MetroTimetableError, ValueError):
    def __init__(self, pointer: str, message: str) -> None:
        self.pointer = pointer or "/"
        super().__init__(f"{self.pointer}: {message}")


# ---------- simulation / frontier / fixtures ----------

class InfeasibleTimetable(MetroTimetableError, ValueError):
    def __init__(self, service: int, station: Optional[int], reason: str) -> None:
        self.service = service
        self.station = station
        where = f"service {service}" + (f", station {station}" if station is not None else "")
        super().__init__(f"{where}: {reason}")


class TimetableMismatch(MetroTimetableError, ValueError):
    pass


class EmptyFrontier(MetroTimetableError):
    pass


class UnknownFixture(MetroTimetableError, KeyError):
    def __init__(self, name: str, known: tuple[str, ...]) -> None:
        self.name = name
        super().__init__(f"Unknown fixture {name!r}; choose one of: {', '.join(known)}")

    def __str__(self) -> str:
        return self.args[0]


__all__ = [
    "MetroTimetableError",
    "DistanceTooShort",
    "UnknownStation",
    "NonPositiveCapacity",
    "NonPositiveFactor",
    "LineTooShort",
    "ConfigMismatch",
    "MissingParameter",
    "ModeMismatch",
    "UnboundedTime",
    "NumericalFailure",
    "Infeasible",
    "TimeLimitReached",
    "IoFailure",
    "ParseError",
    "SchemaError",
    "InfeasibleTimetable",
    "TimetableMismatch",
    "EmptyFrontier",
    "UnknownFixture",
]
