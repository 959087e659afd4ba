# processors/flow_sim.py
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import pandas as pd

from errors import InfeasibleTimetable, IoFailure, TimetableMismatch
from formulation.catalog import VariableCatalog
from formulation.config import INITIAL_ACCUMULATION
from formulation.milp import MilpInstance
from network.demand import ODMatrix
from processors.timetable import ServiceRun, Timetable
from services.solver import MilpSolution

log = logging.getLogger(__name__)

EPS = 1e-9
COMPARE_TOL = 1e-6
FAMILIES = ("w", "wb", "nb", "na", "n", "v")


@dataclass
class _Cohort:
    t0: float           # first platform arrival
    t1: float           # last platform arrival (t0 == t1 for a lump)
    amount: float

    @property
    def is_point(self) -> bool:
        return self.t1 - self.t0 <= EPS


@dataclass(frozen=True)
class PairFlow:
    waiting: float      # w
    eligible: float     # wb for the pair
    boarded: float      # nb for the pair
    leftover: float     # v


@dataclass(frozen=True)
class StationFlow:
    want: float         # wb
    boarded: float      # nb
    alighted: float     # na
    onboard: float      # n, after departing


@dataclass(frozen=True)
class Boarding:
    service: int
    origin: int
    destination: int
    arrived_from: float
    arrived_to: float
    amount: float


@dataclass
class FlowTrace:
    timetable: Timetable
    capacity: float
    pairs: dict[tuple[int, int, int], PairFlow] = field(default_factory=dict)
    stations: dict[tuple[int, int], StationFlow] = field(default_factory=dict)
    boardings: list[Boarding] = field(default_factory=list)
    boarded_waiting: float = 0.0        # passenger-seconds until boarding
    stranded_waiting: float = 0.0       # passenger-seconds until `cutoff` for those never boarded
    cutoff: float = 0.0
    boarded: float = 0.0
    stranded: float = 0.0
    left_behind_events: int = 0

    @property
    def waiting_time(self) -> float:
        return self.boarded_waiting + self.stranded_waiting


# ---------- FIFO boarding ----------

def _before(items: list[tuple[int, _Cohort]], t: float) -> float:
    total = 0.0
    for _, c in items:
        if c.is_point:
            total += c.amount if c.t0 < t - EPS else 0.0
        else:
            total += c.amount * min(1.0, max(0.0, (t - c.t0) / (c.t1 - c.t0)))
    return total


def _at(items: list[tuple[int, _Cohort]], t: float) -> float:
    return sum(c.amount for _, c in items if c.is_point and abs(c.t0 - t) <= EPS)


def _board_shares(items: list[tuple[int, _Cohort]], room: float) -> list[float]:
    """Amount boarded from each cohort, earliest platform arrivals first."""
    total = sum(c.amount for _, c in items)
    if total <= room + EPS:
        return [c.amount for _, c in items]
    if room <= EPS:
        return [0.0] * len(items)

    cut, tie_budget = None, None
    breakpoints = sorted({c.t0 for _, c in items} | {c.t1 for _, c in items})
    prev = None
    for b in breakpoints:
        before = _before(items, b)
        if prev is not None and before >= room - EPS:
            base = _before(items, prev) + _at(items, prev)
            slope = (before - base) / (b - prev)
            cut = prev + (room - base) / slope if slope > EPS else b
            break
        if before + _at(items, b) >= room - EPS:
            cut, tie_budget = b, room - before
            break
        prev = b

    shares = []
    for _, c in items:
        if c.is_point:
            shares.append(c.amount if c.t0 < cut - EPS else 0.0)
        else:
            shares.append(c.amount * min(1.0, max(0.0, (cut - c.t0) / (c.t1 - c.t0))))
    if tie_budget is not None:
        # lumps arriving exactly at the cut board by destination, ascending
        order = sorted(
            (pos for pos, (_, c) in enumerate(items) if c.is_point and abs(c.t0 - cut) <= EPS),
            key=lambda pos: (items[pos][0], pos),
        )
        for pos in order:
            take = min(items[pos][1].amount, max(0.0, tie_budget))
            shares[pos] = take
            tie_budget -= take
    return shares


def _take(c: _Cohort, share: float) -> tuple[float, float, Optional[_Cohort]]:
    """Board `share` from the front of a cohort: (from, to, remainder)."""
    if share >= c.amount - EPS:
        return c.t0, c.t1, None
    if c.is_point:
        return c.t0, c.t1, _Cohort(c.t0, c.t1, c.amount - share)
    cut = c.t0 + (c.t1 - c.t0) * share / c.amount
    return c.t0, cut, _Cohort(cut, c.t1, c.amount - share)


# ---------- simulation ----------

def _validate(tt: Timetable, od: ODMatrix) -> None:
    seen: set[int] = set()
    for s in tt.selected():
        if s.service in seen:
            raise InfeasibleTimetable(s.service, None, "service listed twice")
        seen.add(s.service)
        route = s.route
        if not route:
            raise InfeasibleTimetable(s.service, None, "empty route")
        for i in route:
            if not 1 <= i <= 2 * od.n_per_direction:
                raise InfeasibleTimetable(s.service, i, "station outside the line")
            if od.direction_of(i) != s.direction:
                raise InfeasibleTimetable(s.service, i, f"station is not on the {s.direction} track")
            if s.departure[i] < s.arrival[i] - EPS:
                raise InfeasibleTimetable(s.service, i, "departs before arriving")
        for back, i in zip(route, route[1:]):
            if s.arrival[i] < s.departure[back] - EPS:
                raise InfeasibleTimetable(s.service, i, "arrives before leaving the previous station")


def simulate(
    tt: Timetable,
    od: ODMatrix,
    capacity: float,
    initial_accumulation: float = INITIAL_ACCUMULATION,
) -> FlowTrace:
    """
    Replay passenger flows over a fixed timetable.

    Each (origin, destination) stream is a queue of arrival cohorts. A
    service arriving at a station first collects the arrivals since the
    previous departure there (the first service finds `initial_accumulation`
    seconds of demand), drops passengers bound for the station, then boards
    eligible passengers first-come first-served until the train is full.
    """
    if capacity <= 0:
        raise InfeasibleTimetable(0, None, "capacity must be positive")
    _validate(tt, od)
    trace = FlowTrace(tt, capacity)

    queues: dict[tuple[int, int], list[_Cohort]] = {p: [] for p in od.rate}
    last_departure: dict[tuple[int, int], Optional[float]] = {p: None for p in od.rate}
    onboard: dict[int, dict[int, float]] = {}
    runs: dict[int, ServiceRun] = {s.service: s for s in tt.selected()}

    events = sorted(
        (s.departure[i], s.service, pos, i) for s in runs.values() for pos, i in enumerate(s.route)
    )
    for when, k, _pos, i in events:
        s = runs[k]
        load = onboard.setdefault(k, {})
        stops_here = bool(s.stops.get(i, False))
        streams = [p for p in od.pairs(od.direction_of(i)) if p[0] == i]

        for p in streams:
            rate = od.rate[p]
            if od.arrival == "lump":
                if last_departure[p] is None:
                    queues[p].append(_Cohort(od.horizon[0], od.horizon[0], rate * od.length))
            elif last_departure[p] is None:
                queues[p].append(_Cohort(when - initial_accumulation, when, rate * initial_accumulation))
            elif when > last_departure[p] + EPS:
                queues[p].append(_Cohort(last_departure[p], when, rate * (when - last_departure[p])))
            last_departure[p] = when if last_departure[p] is None else max(when, last_departure[p])

        alighted = load.pop(i, 0.0) if stops_here else 0.0
        riding = sum(load.values())
        room = max(0.0, capacity - riding)

        waiting = {p: sum(c.amount for c in queues[p]) for p in streams}
        eligible = [p for p in streams if stops_here and s.stops.get(p[1], False) and p[1] in s.departure]
        items = [(p[1], c) for p in eligible for c in queues[p]]
        owners = [p for p in eligible for _ in queues[p]]
        shares = _board_shares(items, room)

        boarded = {p: 0.0 for p in streams}
        remaining: dict[tuple[int, int], list[_Cohort]] = {p: [] for p in eligible}
        for p, (_, c), share in zip(owners, items, shares):
            if share <= EPS:
                remaining[p].append(c)
                continue
            t_from, t_to, rest = _take(c, share)
            boarded[p] += share
            trace.boarded_waiting += share * (when - 0.5 * (t_from + t_to))
            trace.boardings.append(Boarding(k, i, p[1], t_from, t_to, share))
            if rest is not None:
                remaining[p].append(rest)
        for p in eligible:
            queues[p] = remaining[p]

        want = sum(waiting[p] for p in eligible)
        got = sum(boarded.values())
        for p in streams:
            load[p[1]] = load.get(p[1], 0.0) + boarded[p]
            trace.pairs[(k, i, p[1])] = PairFlow(
                waiting=waiting[p],
                eligible=waiting[p] if p in eligible else 0.0,
                boarded=boarded[p],
                leftover=waiting[p] - boarded[p],
            )
        load = {dest: amt for dest, amt in load.items() if amt > 0.0}
        onboard[k] = load
        trace.stations[(k, i)] = StationFlow(want, got, alighted, riding + got)
        trace.boarded += got
        if want - got > EPS:
            trace.left_behind_events += 1
            log.debug("service %d full at station %d: %.2f passengers left behind", k, i, want - got)

    # passengers still queued wait until the later of the horizon end and the last departure
    trace.cutoff = max([od.horizon[1], *(when for when, *_ in events)])
    leftover = [c for q in queues.values() for c in q]
    trace.stranded = sum(c.amount for c in leftover)
    trace.stranded_waiting = sum(c.amount * (trace.cutoff - 0.5 * (c.t0 + c.t1)) for c in leftover)
    log.debug("simulated %d services: waiting %.3f, stranded %.3f", len(runs), trace.waiting_time, trace.stranded)
    return trace


# ---------- measures ----------

def total_waiting_time(trace: FlowTrace) -> float:
    return trace.waiting_time


def finish_time(tt: Timetable) -> float:
    runs = tt.selected()
    if not runs:
        raise InfeasibleTimetable(0, None, "timetable has no selected service")
    return max(s.last_arrival for s in runs)


def reduction(base: float, improved: float) -> float:
    """Percentage saved going from `base` to `improved`."""
    if base == 0:
        return 0.0
    return 100.0 * (base - improved) / base


def metrics(trace: FlowTrace) -> dict[str, float]:
    peak = max((f.onboard for f in trace.stations.values()), default=0.0)
    passengers = trace.boarded + trace.stranded
    return {
        "total_waiting_time": trace.waiting_time,
        "stranded_waiting_time": trace.stranded_waiting,
        "average_waiting_time": trace.waiting_time / passengers if passengers > 0 else 0.0,
        "boarded": trace.boarded,
        "stranded": trace.stranded,
        "peak_load_factor": peak / trace.capacity,
        "left_behind_events": float(trace.left_behind_events),
    }


def trace_frame(trace: FlowTrace) -> pd.DataFrame:
    """Long format: one row per (family, service, station[, destination])."""
    records = []
    for (k, i, j), f in sorted(trace.pairs.items()):
        for family, value in (("w", f.waiting), ("wb", f.eligible), ("nb", f.boarded), ("v", f.leftover)):
            records.append({"family": family, "service": k, "station": i, "destination": j, "value": value})
    for (k, i), f in sorted(trace.stations.items()):
        for family, value in (("wb", f.want), ("nb", f.boarded), ("na", f.alighted), ("n", f.onboard)):
            records.append({"family": family, "service": k, "station": i, "destination": pd.NA, "value": value})
    df = pd.DataFrame(records, columns=["family", "service", "station", "destination", "value"])
    df["destination"] = df["destination"].astype("Int64")
    return df


def write_trace_csv(trace: FlowTrace, path: Union[str, Path]) -> Path:
    out = Path(path)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        trace_frame(trace).to_csv(out, index=False, lineterminator="\n")
    except OSError as exc:
        raise IoFailure(str(out), exc.strerror or str(exc)) from exc
    return out


# ---------- MILP bridge ----------

def structure_assignment(tt: Timetable, cat: VariableCatalog) -> dict[str, float]:
    """
    Values pinning the model's service structure and times to `tt`.
    Unselected potential services copy their predecessor's times.
    """
    fixes: dict[str, float] = {}
    runs = {s.service: s for s in tt.selected()}
    for direction in ("up", "down"):
        zones = cat.topo.zones(direction)
        times: Optional[tuple[dict, dict]] = None
        for k in cat.services(direction):
            s = runs.get(k)
            prev = cat.previous(k)
            if s is None and prev is None:
                raise TimetableMismatch(f"first {direction} service {k} must be selected")
            if s is not None and s.direction != direction:
                raise TimetableMismatch(f"service {k} runs {s.direction}, model expects {direction}")
            fixes[cat.tau(k)] = 1.0 if s else 0.0
            for m, n in zones:
                fixes[cat.z(k, m, n)] = 1.0 if s and s.zone == (m, n) else 0.0
            route = cat.topo.stations_of(direction)
            if s is not None:
                missing = [i for i in route if i not in s.departure]
                if missing:
                    raise TimetableMismatch(f"service {k} has no times at stations {missing}")
                arrival, departure = dict(s.arrival), dict(s.departure)
            else:
                arrival, departure = times
            for i in route:
                fixes[cat.x(k, i)] = 1.0 if s and s.stops.get(i, False) else 0.0
                fixes[cat.a(k, i)] = arrival[i]
                fixes[cat.d(k, i)] = departure[i]
            if prev is not None:
                fixes[cat.h(k)] = departure[route[0]] - times[1][route[0]]
            times = (arrival, departure)
    return fixes


def fix_to_timetable(instance: MilpInstance, cat: VariableCatalog, tt: Timetable) -> MilpInstance:
    return instance.fix(structure_assignment(tt, cat))


@dataclass(frozen=True)
class DiscrepancyReport:
    milp_status: str
    max_abs_diff: dict[str, float]          # family -> max |milp - simulated|
    flagged: tuple[str, ...]
    allocation_gap: float                   # passengers the per-destination split over-counts
    note: str = ""

    @property
    def agrees(self) -> bool:
        return not self.flagged


def allocation_gap(trace: FlowTrace, od: ODMatrix) -> float:
    """
    Over-count of the per-destination leftover identity when capacity binds:
    with m destination streams at an origin, summing the identity over them
    restates the origin's shortfall m times instead of once.
    """
    gap = 0.0
    for (k, i), f in trace.stations.items():
        streams = len([p for p in od.pairs(od.direction_of(i)) if p[0] == i])
        gap += max(0, streams - 1) * max(0.0, f.want - f.boarded)
    return gap


def _check_same_timetable(trace: FlowTrace, solution: MilpSolution, cat: VariableCatalog) -> None:
    selected = {s.service: s for s in trace.timetable.selected()}
    for k in cat.all_services():
        on = solution.value(cat.tau(k)) > 0.5
        if on != (k in selected):
            raise TimetableMismatch(f"service {k} selection differs between solution and timetable")
        if not on:
            continue
        s = selected[k]
        for i, dep in s.departure.items():
            if abs(solution.value(cat.d(k, i)) - dep) > COMPARE_TOL:
                raise TimetableMismatch(f"service {k} departs station {i} at {dep:g}, solution says "
                                        f"{solution.value(cat.d(k, i)):g}")
            if (solution.value(cat.x(k, i)) > 0.5) != bool(s.stops.get(i, False)):
                raise TimetableMismatch(f"service {k} stop pattern differs at station {i}")


def compare_with_milp(trace: FlowTrace, solution: MilpSolution, cat: VariableCatalog) -> DiscrepancyReport:
    """Max |difference| per flow family between the simulator and a solved model."""
    gap = allocation_gap(trace, cat.od)
    if not solution.has_incumbent:
        note = (f"model is {solution.status} with the timetable fixed; "
                f"per-destination split over-counts {gap:.6g} passengers")
        log.info(note)
        return DiscrepancyReport(solution.status, {}, ("nb",), gap, note)
    _check_same_timetable(trace, solution, cat)

    diff = {family: 0.0 for family in FAMILIES}

    def record(family: str, name: str, simulated: float) -> None:
        diff[family] = max(diff[family], abs(solution.value(name) - simulated))

    for (k, i, j), f in trace.pairs.items():
        record("w", cat.w(k, i, j), f.waiting)
        record("wb", cat.wbij(k, i, j), f.eligible)
        record("nb", cat.nbij(k, i, j), f.boarded)
        record("v", cat.v(k, i, j), f.leftover)
    for (k, i), f in trace.stations.items():
        record("wb", cat.wb(k, i), f.want)
        record("nb", cat.nb(k, i), f.boarded)
        record("na", cat.na(k, i), f.alighted)
        record("n", cat.n(k, i), f.onboard)
    flagged = tuple(f for f in FAMILIES if diff[f] > COMPARE_TOL)
    note = f"per-destination split over-counts {gap:.6g} passengers" if gap > COMPARE_TOL else ""
    return DiscrepancyReport(solution.status, diff, flagged, gap, note)


__all__ = [
    "FlowTrace",
    "PairFlow",
    "StationFlow",
    "Boarding",
    "DiscrepancyReport",
    "simulate",
    "total_waiting_time",
    "finish_time",
    "reduction",
    "metrics",
    "trace_frame",
    "write_trace_csv",
    "structure_assignment",
    "fix_to_timetable",
    "allocation_gap",
    "compare_with_milp",
]
