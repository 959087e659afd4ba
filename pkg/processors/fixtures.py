# processors/fixtures.py
"""
Bundled instances.

* ``santiago16``: a 16-station line shaped like Santiago Line 1 with the
  headway, turnaround, capacity and load-factor values used for the basic
  experiments. The origin-destination data behind those runs is not public,
  so demand is a seeded gravity pattern (seed 2023, 2200 passengers per hour
  and direction).
* ``tiny8``: an 8-station line with two services per direction, small enough
  for exhaustive enumeration in tests.
* ``fig5-standard`` / ``fig5-skip``: two trains on a 4-station line with
  lump demand (200, 500 and 200 passengers at stations 1-3, all bound for
  station 4) replayed under an all-stop and a skip-stop timetable.

``rst_document`` builds santiago-style instances from the ``R-S-T`` index
(trains, stations per direction, horizon minutes) and a period of the day.
"""
from __future__ import annotations

from itertools import cycle, islice
from typing import Any, Optional

from errors import ConfigMismatch, UnknownFixture
from network.demand import PEAK_UPLIFT
from processors.instance_loader import InstanceFile, LoadedInstance, build_instance

FIXTURES: tuple[str, ...] = ("santiago16", "tiny8", "fig5-standard", "fig5-skip")
PERIODS: dict[str, int] = {"M": 27000, "MD": 46800, "E": 64800}    # 07:30, 13:00, 18:00

# inter-station distances (m), cycled for longer lines
_SEGMENT_METRES = (1040, 870, 1210, 760, 980, 1130, 890, 1020, 940, 1180, 820, 1060, 910, 1250, 990)
_KINEMATICS = {"v_max": 20.0, "v_acc": 1.0, "v_dec": 1.0}
_DWELL_POLICY = {"thresholds": [300.0, 600.0], "group_dwell": [20.0, 30.0, 40.0]}
_HOURLY_DEMAND = 2200.0         # passengers per hour and direction
_SANTIAGO = {"h_min": 90.0, "h_max": 360.0, "min_turnaround": 135.0, "capacity": 250.0, "max_skips": 4}


def _turnarounds(stations: int) -> list[int]:
    return [1, stations // 4 + 1, stations - stations // 4, stations]


def parse_rst(index: str) -> tuple[int, int, int]:
    """'5-16-30' -> (5 trains, 16 stations per direction, 30 minutes)."""
    try:
        trains, stations, minutes = (int(part) for part in index.split("-"))
    except ValueError as exc:
        raise ConfigMismatch(f"instance index must look like R-S-T, got {index!r}") from exc
    if trains < 1 or stations < 8 or minutes < 1:
        raise ConfigMismatch(f"instance {index}: need R >= 1, S >= 8, T >= 1")
    return trains, stations, minutes


def rst_document(
    trains: int,
    stations: int,
    minutes: int,
    period: str = "M",
    mode: str = "off_peak",
    objective: str = "1",
    seed: int = 2023,
    name: Optional[str] = None,
) -> InstanceFile:
    if period not in PERIODS:
        raise ConfigMismatch(f"period must be one of {tuple(PERIODS)}, got {period!r}")
    if mode not in ("off_peak", "peak"):
        raise ConfigMismatch(f"mode must be off_peak or peak, got {mode!r}")
    peak = mode == "peak"
    start = float(PERIODS[period])
    end = start + minutes * 60.0
    doc: dict[str, Any] = {
        "name": name or f"{trains}-{stations}-{minutes}-{period}",
        "description": f"{trains} trains, {stations} stations per direction, {minutes} min from period {period}",
        "topology": {
            "stations_per_direction": stations,
            "turnarounds": _turnarounds(stations),
            "running": {
                "distances": list(islice(cycle(_SEGMENT_METRES), stations - 1)),
                "kinematics": dict(_KINEMATICS),
            },
            "dwell": dict(_DWELL_POLICY),
            "min_turnaround": _SANTIAGO["min_turnaround"],
        },
        "demand": {
            "kind": "gravity",
            "horizon": [start, end],
            "directional_total": _HOURLY_DEMAND * minutes / 60.0,
            "seed": seed,
            "uplift": PEAK_UPLIFT if peak else 1.0,
        },
        "config": {
            "model": f"{objective}{'b' if peak else 'a'}",
            "k_up": "auto",
            "k_dn": "auto",
            "h_min": _SANTIAGO["h_min"],
            "h_max": _SANTIAGO["h_max"],
            "first_departure": {"up": start, "down": start},
            "last_departure": {"up": end, "down": end},
            "capacity": _SANTIAGO["capacity"],
            "load_factor": 1.0 if peak else 0.8,
            "fleet": trains,
            "max_skips": _SANTIAGO["max_skips"],
            "epsilon": 1.0,
        },
    }
    return InstanceFile.model_validate(doc)


def _tiny8() -> InstanceFile:
    return InstanceFile.model_validate({
        "name": "tiny8",
        "description": "8 stations per direction, two potential services each way",
        "topology": {
            "stations_per_direction": 8,
            "turnarounds": [1, 3, 6, 8],
            "running": {"pure_run_time": 60.0, "accel_penalty": 10.0, "decel_penalty": 10.0},
            "dwell": {"times": 20.0},
            "min_turnaround": 60.0,
        },
        "demand": {
            "kind": "count",
            "horizon": [0.0, 1800.0],
            "pairs": [
                [1, 4, 30.0], [2, 8, 20.0], [3, 6, 45.0], [4, 7, 15.0],
                [9, 12, 25.0], [11, 16, 30.0], [12, 14, 40.0], [13, 15, 15.0],
            ],
        },
        "config": {
            "model": "1a",
            "k_up": 2,
            "k_dn": 2,
            "h_min": 60.0,
            "h_max": 600.0,
            "first_departure": {"up": 0.0, "down": 0.0},
            "last_departure": {"up": 600.0, "down": 600.0},
            "capacity": 100.0,
            "fleet": 4,
            "max_skips": 2,
            "epsilon": 1.0,
        },
    })


# (station, arrival, departure, stops) per service
_FIG5_STANDARD = {
    1: [(1, 1, 2, True), (2, 4, 5, True), (3, 7, 8, True), (4, 10, 10, True)],
    2: [(1, 4, 5, True), (2, 7, 8, True), (3, 10, 11, True), (4, 13, 13, True)],
}
_FIG5_SKIP = {
    1: [(1, 1, 1, False), (2, 3, 4, True), (3, 6, 7, True), (4, 9, 9, True)],
    2: [(1, 4, 5, True), (2, 7, 7, False), (3, 9, 10, True), (4, 12, 12, True)],
}


def _fig5(name: str, runs: dict[int, list[tuple[int, float, float, bool]]]) -> InstanceFile:
    mode = "skip-stop" if runs is _FIG5_SKIP else "all-stop"
    return InstanceFile.model_validate({
        "name": name,
        "description": f"two trains, lump demand, {mode} timetable (time units, not seconds)",
        "topology": {
            "stations_per_direction": 4,
            "turnarounds": [1, 2, 3, 4],
            "running": {"pure_run_time": 2.0},
            "dwell": {"times": 1.0},
            "min_turnaround": 1.0,
        },
        "demand": {
            "kind": "count",
            "horizon": [0.0, 20.0],
            "arrival": "lump",
            "pairs": [[1, 4, 200.0], [2, 4, 500.0], [3, 4, 200.0]],
        },
        "config": {
            "model": "1b",
            "k_up": 2,
            "k_dn": 1,
            "h_min": 1.0,
            "h_max": 10.0,
            "first_departure": {"up": 0.0, "down": 0.0},
            "last_departure": {"up": 10.0, "down": 10.0},
            "capacity": 600.0,
            "fleet": 2,
            "max_skips": 1,
        },
        "timetable": [
            {"service": k, "station": i, "arrival": a, "departure": d, "stops": stops, "zone": "1-4"}
            for k, rows in runs.items()
            for i, a, d, stops in rows
        ],
    })


def generate_fixture(name: str) -> InstanceFile:
    if name == "santiago16":
        doc = rst_document(10, 16, 30, "M", name="santiago16")
        return doc.model_copy(update={
            "description": "Santiago Line 1 shape, 16 stations per direction, synthetic gravity demand (seed 2023)",
        })
    if name == "tiny8":
        return _tiny8()
    if name == "fig5-standard":
        return _fig5(name, _FIG5_STANDARD)
    if name == "fig5-skip":
        return _fig5(name, _FIG5_SKIP)
    raise UnknownFixture(name, FIXTURES)


def load_fixture(name: str, seed: Optional[int] = None) -> LoadedInstance:
    return build_instance(generate_fixture(name), seed)


__all__ = ["FIXTURES", "PERIODS", "parse_rst", "rst_document", "generate_fixture", "load_fixture"]
