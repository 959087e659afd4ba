"""Helper utilities for dashboard tooltip copy.

Strings live in ``helptext_content.ini`` so planners can reword KPI, table and
chart help without touching Python. The parser keeps ``#`` as literal text and
preserves key case, since the KPI keys are upper case and column keys are not.
Every section mirrors a group of attributes on :class:`HELP`; keys missing from
the INI fall back to the defaults below.
"""

from __future__ import annotations

from configparser import ConfigParser
from pathlib import Path
from typing import Mapping

_HELP_FILE = Path(__file__).with_name("helptext_content.ini")

_DEFAULT_KPI = {
    "KPI_SERVICES": "Selected services per direction (upstream / downstream).",
    "KPI_SHORT_TURN": "Services that reverse at an intermediate turnaround station.",
    "KPI_TURNAROUNDS": "Trains reused for a service in the opposite direction instead of leaving a depot.",
    "KPI_TRAINS": "Trains pulled out of each depot.",
    "KPI_WAITING": "Passenger-seconds spent on platforms until the boarding train departs.",
    "KPI_LOAD": "Highest onboard load divided by train capacity.",
    "KPI_STATUS": "Solver outcome: optimal, feasible (limit reached with a solution), infeasible or time_limit.",
}

_DEFAULT_TIMETABLE_COLUMNS = {
    "service": "Potential service index; upstream services come first.",
    "station": "Station id; downstream stations are numbered after the upstream ones.",
    "arrival": "Arrival time in seconds.",
    "departure": "Departure time in seconds.",
    "stops": "1 when the service stops, 0 when it passes through.",
    "train": "Physical train operating the service.",
    "source": "Depot the train left from, or the service it turned back from.",
    "zone": "Operation zone as first-last turnaround station.",
}

_DEFAULT_TRACE_COLUMNS = {
    "family": "Flow quantity: w waiting, wb eligible, nb boarded, v left behind, na alighted, n onboard.",
    "service": "Service index.",
    "station": "Station where the quantity is measured.",
    "destination": "Destination station for per-pair quantities, empty for per-station totals.",
    "value": "Passengers.",
}

_DEFAULT_MODEL_COLUMNS = {
    "section": "rows, variables or objective.",
    "name": "Constraint family, variable kind, or objective sense and name.",
    "count": "Number of rows, variables or objective terms.",
}

_DEFAULT_CHARTS = {
    "CHART_DIAGRAM": "Train paths over time; dotted paths are short-turn services, open markers are skipped stations.",
    "CHART_PARETO": "Trade-off between turnarounds and passenger travel time; each point is a non-dominated timetable.",
    "CHART_LOAD": "Onboard passengers leaving each station, against train capacity.",
}

_DEFAULT_SOLVER = {
    "SOLVER_ENGINE": "branch_and_bound runs the built-in solver; highs hands the model to HiGHS.",
    "SOLVER_TIME_LIMIT": "Wall-clock budget per solve in seconds.",
}


def _read_config() -> ConfigParser:
    parser = ConfigParser(
        interpolation=None,
        comment_prefixes=(),
        inline_comment_prefixes=(),
        strict=False,
    )
    parser.optionxform = str  # preserve case for column names
    if _HELP_FILE.exists():
        with _HELP_FILE.open("r", encoding="utf-8") as handle:
            parser.read_file(handle)
    return parser


def _merge_section(parser: ConfigParser, section: str, defaults: Mapping[str, str]) -> dict[str, str]:
    values = dict(defaults)
    if parser.has_section(section):
        for key, value in parser.items(section):
            values[key] = value.strip()
    return values


_parser = _read_config()
_kpi = _merge_section(_parser, "KPI", _DEFAULT_KPI)
_timetable = _merge_section(_parser, "TIMETABLE_COLUMNS", _DEFAULT_TIMETABLE_COLUMNS)
_trace = _merge_section(_parser, "TRACE_COLUMNS", _DEFAULT_TRACE_COLUMNS)
_model = _merge_section(_parser, "MODEL_COLUMNS", _DEFAULT_MODEL_COLUMNS)
_charts = _merge_section(_parser, "CHARTS", _DEFAULT_CHARTS)
_solver = _merge_section(_parser, "SOLVER", _DEFAULT_SOLVER)


class HELP:
    """Central place to edit dashboard help copy.

    Edit ``helptext_content.ini`` next to this file, then restart the app (or
    clear cached resources) to pick up the new text.
    """

    DEFAULT: str | None = None

    # KPI tooltips
    KPI_SERVICES = _kpi["KPI_SERVICES"]
    KPI_SHORT_TURN = _kpi["KPI_SHORT_TURN"]
    KPI_TURNAROUNDS = _kpi["KPI_TURNAROUNDS"]
    KPI_TRAINS = _kpi["KPI_TRAINS"]
    KPI_WAITING = _kpi["KPI_WAITING"]
    KPI_LOAD = _kpi["KPI_LOAD"]
    KPI_STATUS = _kpi["KPI_STATUS"]

    # Tables
    TIMETABLE_COLUMNS = _timetable
    TRACE_COLUMNS = _trace
    MODEL_COLUMNS = _model

    # Charts
    CHART_DIAGRAM = _charts["CHART_DIAGRAM"]
    CHART_PARETO = _charts["CHART_PARETO"]
    CHART_LOAD = _charts["CHART_LOAD"]

    # Solver controls
    SOLVER_ENGINE = _solver["SOLVER_ENGINE"]
    SOLVER_TIME_LIMIT = _solver["SOLVER_TIME_LIMIT"]


__all__ = ["HELP"]
