# network/topology.py
from __future__ import annotations

import logging
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Collection, Mapping, Optional, Sequence

import numpy as np

from errors import (
    ConfigMismatch,
    DistanceTooShort,
    LineTooShort,
    MissingParameter,
    NonPositiveCapacity,
    UnknownStation,
)
from network.demand import Direction, ODMatrix

log = logging.getLogger(__name__)

MIN_DEPOT_SPAN = 4          # each short-turn segment holds at least four stations
TURNAROUNDS_PER_DIRECTION = 4


@dataclass(frozen=True)
class Station:
    index: int                      # 1-based; upstream 1..N, downstream N+1..2N
    is_turnaround: bool = False
    dwell_group: int = 0


@dataclass(frozen=True)
class KinematicParams:
    v_max: float                    # m/s
    v_acc: float                    # m/s^2
    v_dec: float                    # m/s^2

    def __post_init__(self) -> None:
        for name in ("v_max", "v_acc", "v_dec"):
            if getattr(self, name) <= 0:
                raise ConfigMismatch(f"{name} must be strictly positive")

    @property
    def accel_distance(self) -> float:
        return self.v_max ** 2 / (2.0 * self.v_acc)

    @property
    def decel_distance(self) -> float:
        return self.v_max ** 2 / (2.0 * self.v_dec)

    @property
    def accel_penalty(self) -> float:
        """Extra seconds over cruising the acceleration distance."""
        return self.v_max / (2.0 * self.v_acc)

    @property
    def decel_penalty(self) -> float:
        return self.v_max / (2.0 * self.v_dec)


@dataclass(frozen=True)
class DwellPolicy:
    thresholds: tuple[float, ...]   # ascending crowdedness break-points
    group_dwell: tuple[float, ...]  # seconds, one more entry than thresholds

    def __post_init__(self) -> None:
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        object.__setattr__(self, "group_dwell", tuple(float(g) for g in self.group_dwell))
        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ConfigMismatch("dwell thresholds must be strictly ascending")
        if len(self.group_dwell) != len(self.thresholds) + 1:
            raise ConfigMismatch("need exactly one more dwell group than thresholds")
        if any(g <= 0 for g in self.group_dwell):
            raise ConfigMismatch("group dwell times must be positive")

    def group_of(self, crowdedness: float) -> int:
        # a value equal to a threshold joins the higher group
        return bisect_right(self.thresholds, crowdedness)


@dataclass(frozen=True)
class LineTopology:
    """
    A bidirectional line of N stations per direction.

    Downstream station 2N+1-i is the physical twin of upstream station i.
    Running times are keyed by the *arriving* station j (segment j-1 -> j);
    the first station of each direction has no entry.

    Depots are keyed by id: 1 at the upstream origin, 2 at the downstream
    origin, 3 and 4 at the second turnaround of the upstream and downstream
    direction respectively (where short-turn services start).
    """

    stations: tuple[Station, ...]
    pure_run_time: Mapping[int, float]
    accel_penalty: float
    decel_penalty: float
    dwell_time: Mapping[int, float]
    min_turnaround: Mapping[int, float]
    depots: tuple[tuple[int, int], ...] = field(default=())

    def __post_init__(self) -> None:
        n2 = len(self.stations)
        if n2 < 4 or n2 % 2:
            raise ConfigMismatch("a line needs an even number of stations, at least two per direction")
        if [s.index for s in self.stations] != list(range(1, n2 + 1)):
            raise ConfigMismatch("stations must be numbered 1..2N in order")
        for j in self.stations:
            if j.index not in self.first_stations:
                rt = self.pure_run_time.get(j.index)
                if rt is None:
                    raise MissingParameter(f"pure_run_time[{j.index}]")
                if rt <= 0:
                    raise ConfigMismatch(f"pure running time into station {j.index} must be positive")
            e = self.dwell_time.get(j.index)
            if e is None:
                raise MissingParameter(f"dwell_time[{j.index}]")
            if e < 0:
                raise ConfigMismatch(f"dwell time at station {j.index} must be non-negative")
        if self.accel_penalty < 0 or self.decel_penalty < 0:
            raise ConfigMismatch("acceleration/deceleration penalties must be non-negative")
        for s, delta in self.min_turnaround.items():
            if delta <= 0:
                raise ConfigMismatch(f"minimum turnaround at station {s} must be positive")
        if not self.depots and self.has_full_layout():
            object.__setattr__(self, "depots", self.default_depots())

    # ---------- construction ----------

    @classmethod
    def build(
        cls,
        n: int,
        intermediate: tuple[int, int],
        pure_run_time: Sequence[float] | float,
        accel_penalty: float,
        decel_penalty: float,
        dwell_time: Sequence[float] | float,
        min_turnaround: float,
    ) -> "LineTopology":
        """
        Mirrored line from upstream data. `intermediate` holds the two upstream
        intermediate turnarounds (m, n); the downstream twins are flagged too.
        Sequences are upstream-ordered (running times: N-1 entries, dwell: N).
        """
        m_up, n_up = intermediate
        if not 1 < m_up < n_up < n:
            raise ConfigMismatch(f"intermediate turnarounds {intermediate} must lie strictly inside 1..{n}")
        runs = [float(pure_run_time)] * (n - 1) if np.isscalar(pure_run_time) else [float(r) for r in pure_run_time]
        dwells = [float(dwell_time)] * n if np.isscalar(dwell_time) else [float(e) for e in dwell_time]
        if len(runs) != n - 1:
            raise MissingParameter(f"pure_run_time needs {n - 1} entries")
        if len(dwells) != n:
            raise MissingParameter(f"dwell_time needs {n} entries")

        up_turn = {1, m_up, n_up, n}
        stations = []
        for i in range(1, 2 * n + 1):
            physical = i if i <= n else 2 * n + 1 - i
            stations.append(Station(i, physical in up_turn))
        # downstream runs mirror the upstream segment between the same twins
        rt: dict[int, float] = {}
        for j in range(2, n + 1):
            rt[j] = runs[j - 2]
        for j in range(n + 2, 2 * n + 1):
            # segment (j-1 -> j) downstream covers physical (2n+2-j -> 2n+1-j)
            rt[j] = runs[(2 * n + 1 - j) - 1]
        dwell = {i: dwells[(i if i <= n else 2 * n + 1 - i) - 1] for i in range(1, 2 * n + 1)}
        turns = {s.index: float(min_turnaround) for s in stations if s.is_turnaround}
        return cls(tuple(stations), rt, accel_penalty, decel_penalty, dwell, turns)

    def with_intermediate_turnarounds(self, m: int, n: int) -> "LineTopology":
        """Re-flag the upstream intermediate turnarounds (and their twins), e.g. after depot siting."""
        if not 1 < m < n < self.n:
            raise ConfigMismatch(f"intermediate turnarounds ({m}, {n}) must lie strictly inside 1..{self.n}")
        up_turn = {1, m, n, self.n}
        delta = self.max_turnaround()
        stations = tuple(
            Station(s.index, (s.index if s.index <= self.n else self.mirror(s.index)) in up_turn, s.dwell_group)
            for s in self.stations
        )
        turns = {s.index: self.min_turnaround.get(s.index, delta) for s in stations if s.is_turnaround}
        return LineTopology(
            stations, dict(self.pure_run_time), self.accel_penalty, self.decel_penalty,
            dict(self.dwell_time), turns,
        )

    # ---------- geometry ----------

    @property
    def n(self) -> int:
        return len(self.stations) // 2

    @property
    def first_stations(self) -> tuple[int, int]:
        return (1, self.n + 1)

    def direction_of(self, station: int) -> Direction:
        if not 1 <= station <= 2 * self.n:
            raise UnknownStation(station)
        return "up" if station <= self.n else "down"

    def stations_of(self, direction: Direction) -> range:
        return range(1, self.n + 1) if direction == "up" else range(self.n + 1, 2 * self.n + 1)

    def mirror(self, station: int) -> int:
        self.direction_of(station)
        return 2 * self.n + 1 - station

    def turnarounds(self, direction: Direction) -> tuple[int, ...]:
        return tuple(s for s in self.stations_of(direction) if self.stations[s - 1].is_turnaround)

    def has_full_layout(self) -> bool:
        try:
            self.require_layout()
        except ConfigMismatch:
            return False
        return True

    def require_layout(self) -> None:
        """Four turnarounds per direction, both terminals included, mirrored."""
        for direction in ("up", "down"):
            turns = self.turnarounds(direction)
            run = self.stations_of(direction)
            if len(turns) != TURNAROUNDS_PER_DIRECTION:
                raise ConfigMismatch(
                    f"{direction} direction has {len(turns)} turnaround stations; need {TURNAROUNDS_PER_DIRECTION}"
                )
            if turns[0] != run[0] or turns[-1] != run[-1]:
                raise ConfigMismatch(f"{direction} terminals must be turnaround stations")
        if {self.mirror(s) for s in self.turnarounds("up")} != set(self.turnarounds("down")):
            raise ConfigMismatch("downstream turnarounds must mirror the upstream ones")

    def zones(self, direction: Direction) -> tuple[tuple[int, int], ...]:
        """Operation zones (start, end): full, short end, short start, both short."""
        t1, t2, t3, t4 = self.turnarounds(direction)
        return ((t1, t4), (t1, t3), (t2, t4), (t2, t3))

    def zone_starts(self, direction: Direction) -> tuple[int, int]:
        t = self.turnarounds(direction)
        return (t[0], t[1])

    def zone_ends(self, direction: Direction) -> tuple[int, int]:
        t = self.turnarounds(direction)
        return (t[2], t[3])

    def turn_target(self, end_station: int) -> int:
        """Start station of the opposite direction reached by reversing at `end_station`."""
        return self.mirror(end_station)

    # ---------- depots ----------

    def default_depots(self) -> tuple[tuple[int, int], ...]:
        up_start = self.zone_starts("up")
        dn_start = self.zone_starts("down")
        return ((1, up_start[0]), (2, dn_start[0]), (3, up_start[1]), (4, dn_start[1]))

    def depot_at(self, station: int) -> int:
        for dp, host in self.depots:
            if host == station:
                return dp
        raise UnknownStation(station)

    def pullout_depots(self, direction: Direction) -> tuple[int, int]:
        """Depots whose trains can start a service of `direction` (full start, short start)."""
        return tuple(self.depot_at(s) for s in self.zone_starts(direction))

    def pullin_depots(self, direction: Direction) -> tuple[int, int]:
        """Depots receiving trains that end a `direction` service (short end, full end)."""
        return tuple(self.depot_at(self.mirror(e)) for e in self.zone_ends(direction))

    # ---------- times ----------

    def full_run_time(self, j: int) -> float:
        """Pure running time into station j plus both penalties."""
        return self.pure_run_time[j] + self.accel_penalty + self.decel_penalty

    def traversal_time(self, direction: Direction) -> float:
        run = self.stations_of(direction)
        return sum(self.full_run_time(j) for j in run[1:]) + sum(self.dwell_time[i] for i in run)

    def max_turnaround(self) -> float:
        return max(self.min_turnaround.values(), default=0.0)


# ---------- parameter calculators ----------

def compute_running_time(distance: float, k: KinematicParams) -> float:
    """Time to accelerate to v_max, cruise, and brake to a stop over `distance` metres."""
    envelope = k.accel_distance + k.decel_distance
    if distance < envelope:
        raise DistanceTooShort(distance, envelope)
    t_acc = k.v_max / k.v_acc
    t_dec = k.v_max / k.v_dec
    t_pure = (distance - envelope) / k.v_max
    return t_acc + t_dec + t_pure


def running_times_from_distances(distances: Sequence[float], k: KinematicParams) -> list[float]:
    return [compute_running_time(d, k) for d in distances]


def service_travel_time(
    topo: LineTopology,
    route: Sequence[int],
    stops: Collection[int],
    mode: str = "off_peak",
) -> float:
    """
    First departure to last arrival along `route` with the given served stations.

    Off-peak every segment costs the full running time and every intermediate
    station its dwell. Peak segments pay acceleration only when leaving a
    served station and braking only when reaching one; skipped stations cost
    no dwell.
    """
    route = list(route)
    if len(route) < 2:
        return 0.0
    served = set(stops)
    total = 0.0
    for back, j in zip(route, route[1:]):
        if j - back != 1:
            raise ConfigMismatch(f"route must list consecutive stations, got {back} -> {j}")
        if mode == "peak":
            total += topo.pure_run_time[j]
            total += topo.accel_penalty * (back in served) + topo.decel_penalty * (j in served)
        else:
            total += topo.full_run_time(j)
    for i in route[1:-1]:
        if mode == "peak":
            total += topo.dwell_time[i] * (i in served)
        else:
            total += topo.dwell_time[i]
    return total


def compute_crowdedness(od: ODMatrix, s: int) -> float:
    """Passengers boarding at plus alighting at station `s` over the horizon."""
    od.direction_of(s)  # raises UnknownStation
    inbound = sum(r for (i, j), r in od.rate.items() if j == s)
    outbound = sum(r for (i, j), r in od.rate.items() if i == s)
    return (inbound + outbound) * od.length


def assign_dwell_times(od: ODMatrix, policy: DwellPolicy) -> dict[int, float]:
    return {s: policy.group_dwell[policy.group_of(compute_crowdedness(od, s))] for s in od.stations}


def dwell_groups(od: ODMatrix, policy: DwellPolicy) -> dict[int, int]:
    return {s: policy.group_of(compute_crowdedness(od, s)) for s in od.stations}


def required_services(total_demand: float, capacity: float, load_factor: float) -> int:
    """ceil(demand / (capacity * load factor))."""
    if capacity <= 0:
        raise NonPositiveCapacity(f"train capacity must be positive, got {capacity}")
    if not 0 < load_factor <= 1:
        raise ConfigMismatch(f"load factor must lie in (0, 1], got {load_factor}")
    if total_demand <= 0:
        return 0
    per_train = capacity * load_factor
    # guard float noise such as 1400.0000000001 / 200
    return int(math.ceil(round(total_demand / per_train, 9)))


def site_intermediate_depots(
    od: ODMatrix,
    min_span: int = MIN_DEPOT_SPAN,
    direction: Direction = "up",
) -> tuple[int, int]:
    """
    Contiguous segment [m, n] of at least `min_span` stations with the largest
    internal OD flow. Among equal-flow windows the narrowest wins, then the
    leftmost; with no internal flow at all the whole direction is returned.
    """
    if min_span < MIN_DEPOT_SPAN:
        raise ConfigMismatch(f"min_span must be at least {MIN_DEPOT_SPAN}")
    run = list(od.stations_of(direction))
    size = len(run)
    if size < min_span:
        raise LineTooShort(f"{direction} direction has {size} stations; need at least {min_span}")

    flows = np.zeros((size, size))
    for (i, j), r in od.rate.items():
        if i in run and j in run:
            flows[i - run[0], j - run[0]] = r * od.length
    # prefix[a, b] = sum of flows[:a, :b]
    prefix = np.zeros((size + 1, size + 1))
    prefix[1:, 1:] = flows.cumsum(axis=0).cumsum(axis=1)

    best: Optional[tuple[float, int, int]] = None
    best_window = (run[0], run[-1])
    for lo in range(size):
        for hi in range(lo + min_span - 1, size):
            a, b = lo, hi + 1
            internal = prefix[b, b] - prefix[a, b] - prefix[b, a] + prefix[a, a]
            key = (round(float(internal), 9), lo - hi, -lo)
            if best is None or key > best:
                best = key
                best_window = (run[lo], run[hi])
    if best is None or best[0] <= 0:
        best_window = (run[0], run[-1])
    log.debug("depot siting (%s): window %s with internal flow %.3f", direction, best_window, best[0] if best else 0.0)
    return best_window


__all__ = [
    "MIN_DEPOT_SPAN",
    "Station",
    "KinematicParams",
    "DwellPolicy",
    "LineTopology",
    "compute_running_time",
    "running_times_from_distances",
    "service_travel_time",
    "compute_crowdedness",
    "assign_dwell_times",
    "dwell_groups",
    "required_services",
    "site_intermediate_depots",
]
