# processors/timetable.py
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

import pandas as pd

from errors import ConfigMismatch, IoFailure, ParseError
from formulation.catalog import VariableCatalog as V
from formulation.config import ModelConfig
from network.demand import DIRECTIONS, Direction
from network.topology import LineTopology
from services.solver import MilpSolution

log = logging.getLogger(__name__)

CSV_COLUMNS = ["service", "station", "arrival", "departure", "stops"]
OPTIONAL_COLUMNS = ["direction", "train", "source", "zone"]
TOL = 1e-6


@dataclass(frozen=True)
class ServiceRun:
    service: int
    direction: Direction
    zone: tuple[int, int]                    # (start, end) turnaround stations
    stops: Mapping[int, bool]                # station -> served
    arrival: Mapping[int, float]             # seconds, every station on the route
    departure: Mapping[int, float]
    selected: bool = True
    train: Optional[int] = None
    from_depot: Optional[int] = None
    from_service: Optional[int] = None
    to_depot: Optional[int] = None
    to_service: Optional[int] = None

    @property
    def route(self) -> list[int]:
        return sorted(self.departure)

    @property
    def zone_stations(self) -> range:
        return range(self.zone[0], self.zone[1] + 1)

    @property
    def served(self) -> list[int]:
        return [i for i in self.route if self.stops.get(i, False)]

    @property
    def skipped(self) -> list[int]:
        return [i for i in self.zone_stations if not self.stops.get(i, False)]

    @property
    def source(self) -> str:
        if self.from_depot is not None:
            return f"depot {self.from_depot}"
        if self.from_service is not None:
            return f"service {self.from_service}"
        return ""

    @property
    def first_departure(self) -> float:
        return self.departure[self.zone[0]]

    @property
    def last_arrival(self) -> float:
        return self.arrival[self.zone[1]]


@dataclass(frozen=True)
class Timetable:
    services: tuple[ServiceRun, ...]
    n_per_direction: int
    metadata: Mapping[str, object] = field(default_factory=dict)

    def selected(self, direction: Optional[Direction] = None) -> list[ServiceRun]:
        runs = [s for s in self.services if s.selected and (direction is None or s.direction == direction)]
        return sorted(runs, key=lambda s: (s.departure[min(s.route)], s.service))

    def service(self, k: int) -> ServiceRun:
        for s in self.services:
            if s.service == k:
                return s
        raise KeyError(k)

    def trains(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for s in self.selected():
            if s.train is not None:
                out.setdefault(s.train, []).append(s.service)
        return out


# ---------- extraction from a solved model ----------

def _on(solution: MilpSolution, name: str) -> bool:
    return solution.value(name) > 0.5


def _assign_trains(runs: dict[int, dict]) -> None:
    """Follow turn links from each depot pull-out; one id per physical train."""
    starts = sorted(
        (k for k, r in runs.items() if r["from_depot"] is not None),
        key=lambda k: (min(runs[k]["departure"].values()), k),
    )
    for train, k in enumerate(starts, start=1):
        seen = set()
        while k is not None and k not in seen:
            seen.add(k)
            runs[k]["train"] = train
            k = runs[k]["to_service"]


def timetable_from_solution(solution: MilpSolution, cfg: ModelConfig, topo: LineTopology) -> Timetable:
    if not solution.assignment:
        raise ConfigMismatch("solution carries no assignment to extract a timetable from")
    ups = range(1, cfg.k_up + 1)
    downs = range(cfg.k_up + 1, cfg.k_up + cfg.k_dn + 1)
    service_dirs = [(k, "up") for k in ups] + [(k, "down") for k in downs]
    runs: dict[int, dict] = {}
    for k, direction in service_dirs:
        if not _on(solution, V.tau(k)):
            continue
        zone = next((mn for mn in topo.zones(direction) if _on(solution, V.z(k, *mn))), None)
        if zone is None:
            raise ConfigMismatch(f"service {k} is selected but has no operation zone")
        route = topo.stations_of(direction)
        other = downs if direction == "up" else ups
        other_dir = "down" if direction == "up" else "up"
        record = {
            "service": k,
            "direction": direction,
            "zone": zone,
            "stops": {i: _on(solution, V.x(k, i)) for i in route},
            "arrival": {i: solution.value(V.a(k, i)) for i in route},
            "departure": {i: solution.value(V.d(k, i)) for i in route},
            "from_depot": next((dp for dp in topo.pullout_depots(direction) if _on(solution, V.alpha(dp, k))), None),
            "to_depot": next((dp for dp in topo.pullin_depots(direction) if _on(solution, V.beta(dp, k))), None),
            "from_service": next(
                (l for l in other for m in topo.zone_ends(other_dir) if _on(solution, V.y(l, k, m))),
                None,
            ),
            "to_service": next(
                (l for l in other for m in topo.zone_ends(direction) if _on(solution, V.y(k, l, m))),
                None,
            ),
            "train": None,
        }
        runs[k] = record
    _assign_trains(runs)
    services = tuple(ServiceRun(**r) for r in runs.values())
    log.debug("extracted %d selected services", len(services))
    return Timetable(services, topo.n, {"model_id": cfg.model_id, "objective": solution.objective})


# ---------- CSV ----------

def timetable_frame(tt: Timetable) -> pd.DataFrame:
    records = []
    for s in tt.selected():
        for i in s.route:
            records.append({
                "service": s.service,
                "station": i,
                "arrival": s.arrival[i],
                "departure": s.departure[i],
                "stops": int(bool(s.stops.get(i, False))),
                "direction": s.direction,
                "train": s.train if s.train is not None else "",
                "source": s.source,
                "zone": f"{s.zone[0]}-{s.zone[1]}",
            })
    return pd.DataFrame(records, columns=CSV_COLUMNS + OPTIONAL_COLUMNS)


def write_timetable_csv(tt: Timetable, path: Union[str, Path]) -> Path:
    out = Path(path)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        timetable_frame(tt).to_csv(out, index=False, lineterminator="\n")
    except OSError as exc:
        raise IoFailure(str(out), exc.strerror or str(exc)) from exc
    return out


def _parse_source(text: str) -> tuple[Optional[int], Optional[int]]:
    text = str(text or "").strip()
    if not text or text == "nan":
        return None, None
    kind, _, ident = text.partition(" ")
    if kind == "depot":
        return int(ident), None
    if kind == "service":
        return None, int(ident)
    raise ValueError(f"unknown source {text!r}")


def timetable_from_frame(df: pd.DataFrame, n_per_direction: int) -> Timetable:
    missing = [c for c in CSV_COLUMNS if c not in df.columns]
    if missing:
        raise ParseError(1, f"timetable CSV lacks columns: {', '.join(missing)}")
    runs: list[ServiceRun] = []
    for k, group in df.groupby("service", sort=True):
        group = group.sort_values("station")
        # header is line 1; data rows follow in file order
        line = int(group.index[0]) + 2
        stations = [int(s) for s in group["station"]]
        direction = "up" if stations[0] <= n_per_direction else "down"
        if any(("up" if s <= n_per_direction else "down") != direction for s in stations):
            raise ParseError(line, f"service {k} mixes directions")
        stops = {int(s): bool(int(x)) for s, x in zip(group["station"], group["stops"])}
        served = [s for s in stations if stops[s]]
        zone_text = group["zone"].iloc[0] if "zone" in group and pd.notna(group["zone"].iloc[0]) else ""
        if zone_text:
            m, _, n = str(zone_text).partition("-")
            zone = (int(m), int(n))
        else:
            zone = (served[0], served[-1]) if served else (stations[0], stations[-1])
        try:
            from_depot, from_service = _parse_source(group["source"].iloc[0] if "source" in group else "")
        except ValueError as exc:
            raise ParseError(line, str(exc)) from exc
        train = None
        if "train" in group and pd.notna(group["train"].iloc[0]) and str(group["train"].iloc[0]) != "":
            train = int(float(group["train"].iloc[0]))
        runs.append(ServiceRun(
            service=int(k),
            direction=direction,
            zone=zone,
            stops=stops,
            arrival={int(s): float(a) for s, a in zip(group["station"], group["arrival"])},
            departure={int(s): float(d) for s, d in zip(group["station"], group["departure"])},
            train=train,
            from_depot=from_depot,
            from_service=from_service,
        ))
    return Timetable(tuple(runs), n_per_direction)


def read_timetable_csv(path: Union[str, Path], n_per_direction: int) -> Timetable:
    src = Path(path)
    try:
        df = pd.read_csv(src)
    except OSError as exc:
        raise IoFailure(str(src), exc.strerror or str(exc)) from exc
    return timetable_from_frame(df, n_per_direction)


# ---------- independent row checker ----------

@dataclass(frozen=True)
class TimetableViolation:
    check: str
    service: int
    station: Optional[int]
    detail: str


def _consecutive(runs: list[ServiceRun]) -> Iterable[tuple[ServiceRun, ServiceRun]]:
    return zip(runs, runs[1:])


def check_timetable(tt: Timetable, topo: LineTopology, cfg: ModelConfig) -> list[TimetableViolation]:
    """
    Operating rules re-checked on the realized timetable, without the solver:
    headways, turnaround gaps, coverage, dwell, skip limits, fleet size and
    train linkage.
    """
    found: list[TimetableViolation] = []

    def flag(check: str, service: int, station: Optional[int], detail: str) -> None:
        found.append(TimetableViolation(check, service, station, detail))

    for direction in DIRECTIONS:
        runs = tt.selected(direction)
        for s in runs:
            route = s.route
            for back, i in zip(route, route[1:]):
                if s.arrival[i] < s.departure[back] - TOL:
                    flag("order", s.service, i, "arrives before leaving the previous station")
            for i in route:
                dwell = s.departure[i] - s.arrival[i]
                need = topo.dwell_time[i] if s.stops.get(i) else 0.0
                if dwell < need - TOL or (not cfg.is_peak and abs(dwell - topo.dwell_time[i]) > TOL):
                    flag("dwell", s.service, i, f"dwell {dwell:g}s, expected {need:g}s")
            for start in topo.zone_starts(direction):
                if s.departure[start] > cfg.last_departure(direction) + TOL:
                    flag("last_departure", s.service, start, f"departs at {s.departure[start]:g}")
            if cfg.is_peak and len(s.skipped) > cfg.max_skips:
                flag("skip_limit", s.service, None, f"skips {len(s.skipped)} stations (limit {cfg.max_skips})")
            if not cfg.is_peak and s.skipped:
                flag("skip_limit", s.service, s.skipped[0], "off-peak services serve every zone station")

        for prev, s in _consecutive(runs):
            for i in topo.stations_of(direction):
                if i not in s.departure or i not in prev.departure:
                    continue
                gap = s.departure[i] - prev.departure[i]
                if gap < cfg.h_min - TOL or gap > cfg.h_max + TOL:
                    flag("headway", s.service, i, f"headway {gap:g}s outside [{cfg.h_min:g}, {cfg.h_max:g}]")
                    break
            for i in topo.stations_of(direction):
                if not prev.stops.get(i) and not s.stops.get(i):
                    flag("coverage", s.service, i, f"neither service {prev.service} nor {s.service} stops here")

    by_id = {s.service: s for s in tt.selected()}
    successors: dict[int, int] = {}
    for s in by_id.values():
        if s.from_service is None:
            continue
        prev = by_id.get(s.from_service)
        if prev is None:
            flag("linkage", s.service, None, f"turns from unknown service {s.from_service}")
            continue
        if prev.direction == s.direction:
            flag("linkage", s.service, None, f"turns from same-direction service {prev.service}")
            continue
        if prev.service in successors:
            flag("linkage", s.service, None, f"service {prev.service} feeds two services")
        successors[prev.service] = s.service
        end = prev.zone[1]
        start = topo.turn_target(end)
        if start != s.zone[0]:
            flag("linkage", s.service, start, f"zone starts at {s.zone[0]}, turn arrives at {start}")
            continue
        gap = s.arrival[start] - prev.departure[end]
        delta = topo.min_turnaround.get(end, 0.0)
        if gap < delta - TOL:
            flag("turnaround", s.service, start, f"turnaround gap {gap:g}s below {delta:g}s")

    trains = {s.train for s in by_id.values() if s.train is not None}
    pulled = sum(1 for s in by_id.values() if s.from_depot is not None)
    if max(len(trains), pulled) > cfg.fleet:
        flag("fleet", 0, None, f"{max(len(trains), pulled)} trains used, fleet is {cfg.fleet}")
    return found


__all__ = [
    "ServiceRun",
    "Timetable",
    "TimetableViolation",
    "timetable_from_solution",
    "timetable_frame",
    "timetable_from_frame",
    "write_timetable_csv",
    "read_timetable_csv",
    "check_timetable",
]
