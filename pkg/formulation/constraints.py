# formulation/constraints.py
from __future__ import annotations

import logging
from typing import Optional

from errors import MissingParameter, ModeMismatch
from formulation.catalog import VariableCatalog
from formulation.config import ModelConfig
from formulation.milp import Row, make_row
from network.demand import DIRECTIONS, Direction
from network.topology import LineTopology

log = logging.getLogger(__name__)


def _other(direction: Direction) -> Direction:
    return "down" if direction == "up" else "up"


def big_m(cfg: ModelConfig, cat: VariableCatalog, natural: Optional[float] = None) -> float:
    """Configured big-M, tightened to the row's natural range when one is known."""
    m = cfg.big_m if cfg.big_m is not None else cat.default_big_m()
    return m if natural is None else min(m, natural)


def _zones_from(topo: LineTopology, direction: Direction, start: int) -> list[tuple[int, int]]:
    return [(m, n) for m, n in topo.zones(direction) if m == start]


def _zones_to(topo: LineTopology, direction: Direction, end: int) -> list[tuple[int, int]]:
    return [(m, n) for m, n in topo.zones(direction) if n == end]


def _log_rows(family: str, rows: list[Row]) -> list[Row]:
    log.debug("%s: %d rows", family, len(rows))
    return rows


# ---------- zones and served stations ----------

def build_zone_constraints(cfg: ModelConfig, topo: LineTopology, cat: VariableCatalog) -> list[Row]:
    topo.require_layout()
    rows: list[Row] = []
    for direction in DIRECTIONS:
        run = topo.stations_of(direction)
        zones = topo.zones(direction)
        short_start = topo.zone_starts(direction)[1]
        short_end = topo.zone_ends(direction)[0]
        before = [i for i in run if i < short_start]
        after = [i for i in run if i > short_end]

        for k in cat.services(direction):
            tau = cat.tau(k)
            rows.append(make_row(
                f"one_zone[{k}]", [(cat.z(k, m, n), 1.0) for m, n in zones] + [(tau, -1.0)], "=", 0.0, "zone",
            ))
            if cat.previous(k) is None:
                # the first service anchors the direction's departures
                rows.append(make_row(f"first_selected[{k}]", {tau: 1.0}, "=", 1.0, "zone"))
            for i in run:
                rows.append(make_row(f"serve_if_selected[{k}][{i}]", {cat.x(k, i): 1.0, tau: -1.0}, "<=", 0.0, "zone"))

            m_before = float(len(before))
            rows.append(make_row(
                f"before_start[{k}][{short_start}]",
                [(cat.x(k, i), 1.0) for i in before]
                + [(cat.z(k, m, n), m_before) for m, n in _zones_from(topo, direction, short_start)],
                "<=", m_before, "zone",
            ))
            m_after = float(len(after))
            rows.append(make_row(
                f"after_end[{k}][{short_end}]",
                [(cat.x(k, i), 1.0) for i in after]
                + [(cat.z(k, m, n), m_after) for m, n in _zones_to(topo, direction, short_end)],
                "<=", m_after, "zone",
            ))

            if not cfg.is_peak:
                for m, n in zones:
                    for i in range(m, n + 1):
                        rows.append(make_row(
                            f"serve_zone[{k}][{m}][{n}][{i}]",
                            {cat.x(k, i): 1.0, cat.z(k, m, n): -1.0}, ">=", 0.0, "zone",
                        ))

            prev = cat.previous(k)
            if prev is not None:
                # coverage is demanded only when the later service runs
                for i in run:
                    rows.append(make_row(
                        f"coverage[{k}][{i}]",
                        {cat.x(prev, i): 1.0, cat.x(k, i): 1.0, tau: -1.0}, ">=", 0.0, "zone",
                    ))
    return _log_rows("zone", rows)


# ---------- arrival / departure ----------

def build_timetable_constraints(cfg: ModelConfig, topo: LineTopology, cat: VariableCatalog) -> list[Row]:
    rows: list[Row] = []
    for direction in DIRECTIONS:
        run = topo.stations_of(direction)
        for k in cat.services(direction):
            for pos, i in enumerate(run):
                dwell = topo.dwell_time.get(i)
                if dwell is None:
                    raise MissingParameter(f"dwell_time[{i}]")
                if pos > 0:
                    back = run[pos - 1]
                    rt = topo.pure_run_time.get(i)
                    if rt is None:
                        raise MissingParameter(f"pure_run_time[{i}]")
                    if cfg.is_peak:
                        coefs = {
                            cat.a(k, i): 1.0,
                            cat.d(k, back): -1.0,
                            cat.x(k, back): -topo.accel_penalty,
                            cat.x(k, i): -topo.decel_penalty,
                        }
                        rows.append(make_row(f"run[{k}][{i}]", coefs, "=", rt, "timetable"))
                    else:
                        rows.append(make_row(
                            f"run[{k}][{i}]", {cat.a(k, i): 1.0, cat.d(k, back): -1.0},
                            "=", topo.full_run_time(i), "timetable",
                        ))
                if cfg.is_peak:
                    rows.append(make_row(
                        f"dwell[{k}][{i}]",
                        {cat.d(k, i): 1.0, cat.a(k, i): -1.0, cat.x(k, i): -dwell}, ">=", 0.0, "timetable",
                    ))
                else:
                    rows.append(make_row(
                        f"dwell[{k}][{i}]", {cat.d(k, i): 1.0, cat.a(k, i): -1.0}, "=", dwell, "timetable",
                    ))
            if cat.previous(k) is None:
                rows.append(make_row(
                    f"first_dep[{k}]", {cat.d(k, run[0]): 1.0}, "=", cfg.first_departure(direction), "timetable",
                ))
            for s in topo.zone_starts(direction):
                rows.append(make_row(
                    f"last_dep[{k}][{s}]", {cat.d(k, s): 1.0}, "<=", cfg.last_departure(direction), "timetable",
                ))
    return _log_rows("timetable", rows)


# ---------- headways ----------

def build_headway_constraints(cfg: ModelConfig, cat: VariableCatalog) -> list[Row]:
    rows: list[Row] = []
    for k in cat.all_services():
        prev = cat.previous(k)
        if prev is None:
            continue
        h, tau = cat.h(k), cat.tau(k)
        rows.append(make_row(f"headway_lo[{k}]", {h: 1.0, tau: -cfg.h_min}, ">=", 0.0, "headway"))
        rows.append(make_row(f"headway_hi[{k}]", {h: 1.0, tau: -cfg.h_max}, "<=", 0.0, "headway"))
        for i in cat.stations_of_service(k):
            rows.append(make_row(
                f"chain[{k}][{i}]", {cat.d(k, i): 1.0, cat.d(prev, i): -1.0, h: -1.0}, "=", 0.0, "headway",
            ))
    return _log_rows("headway", rows)


# ---------- turnarounds ----------

def build_turnaround_constraints(cfg: ModelConfig, topo: LineTopology, cat: VariableCatalog) -> list[Row]:
    rows: list[Row] = []
    for k in cat.all_services():
        direction = cat.direction_of_service(k)
        other = _other(direction)
        for l, m in cat.turn_links(k):
            target = topo.turn_target(m)
            delta = topo.min_turnaround.get(m)
            if delta is None:
                raise MissingParameter(f"min_turnaround[{m}]")
            y = cat.y(k, l, m)
            gate = [(y, 2.0)]
            gate += [(cat.z(k, zm, zn), -1.0) for zm, zn in _zones_to(topo, direction, m)]
            gate += [(cat.z(l, zm, zn), -1.0) for zm, zn in _zones_from(topo, other, target)]
            rows.append(make_row(f"turn_pair[{k}][{l}][{m}]", gate, "<=", 0.0, "turnaround"))

            arrive, leave = cat.a(l, target), cat.d(k, m)
            natural = delta + cat.variable(leave).upper - cat.variable(arrive).lower
            bm = big_m(cfg, cat, natural)
            rows.append(make_row(
                f"turn_time[{k}][{l}][{m}]", {arrive: 1.0, leave: -1.0, y: -bm}, ">=", delta - bm, "turnaround",
            ))
    return _log_rows("turnaround", rows)


# ---------- rolling stock ----------

def build_rollingstock_constraints(cfg: ModelConfig, topo: LineTopology, cat: VariableCatalog) -> list[Row]:
    rows: list[Row] = []
    hosts = dict(topo.depots)
    pulled_out: dict[int, list[str]] = {dp: [] for dp in hosts}
    for direction in DIRECTIONS:
        for k in cat.services(direction):
            tau = cat.tau(k)
            source = [(cat.y(l, k, m), 1.0) for l, m in cat.turn_ins(k)]
            source += [(cat.alpha(dp, k), 1.0) for dp in topo.pullout_depots(direction)]
            rows.append(make_row(f"source[{k}]", source + [(tau, -1.0)], "=", 0.0, "rolling_stock"))

            sink = [(cat.y(k, l, m), 1.0) for l, m in cat.turn_links(k)]
            sink += [(cat.beta(dp, k), 1.0) for dp in topo.pullin_depots(direction)]
            rows.append(make_row(f"sink[{k}]", sink + [(tau, -1.0)], "=", 0.0, "rolling_stock"))

            # no empty runs between a depot and the service's end stations
            for dp in topo.pullout_depots(direction):
                pulled_out[dp].append(cat.alpha(dp, k))
                gate = [(cat.alpha(dp, k), 1.0)]
                gate += [(cat.z(k, m, n), -1.0) for m, n in _zones_from(topo, direction, hosts[dp])]
                rows.append(make_row(f"pullout_gate[{dp}][{k}]", gate, "<=", 0.0, "rolling_stock"))
            for dp in topo.pullin_depots(direction):
                gate = [(cat.beta(dp, k), 1.0)]
                gate += [(cat.z(k, m, n), -1.0) for m, n in _zones_to(topo, direction, topo.mirror(hosts[dp]))]
                rows.append(make_row(f"pullin_gate[{dp}][{k}]", gate, "<=", 0.0, "rolling_stock"))

    rows.append(make_row("fleet", [(cat.rs(dp), 1.0) for dp in hosts], "<=", float(cfg.fleet), "rolling_stock"))
    for dp, alphas in pulled_out.items():
        rows.append(make_row(
            f"depot_cap[{dp}]", [(cat.rs(dp), 1.0)] + [(a, -1.0) for a in alphas], ">=", 0.0, "rolling_stock",
        ))
    return _log_rows("rolling_stock", rows)


# ---------- skip-stop ----------

def build_skipstop_constraints(cfg: ModelConfig, cat: VariableCatalog) -> list[Row]:
    if not cfg.is_peak:
        raise ModeMismatch("skip-stop limits apply to peak-hour models only")
    rows: list[Row] = []
    for k in cat.all_services():
        direction = cat.direction_of_service(k)
        coefs = [(cat.x(k, i), 1.0) for i in cat.stations_of_service(k)]
        coefs += [(cat.z(k, m, n), -float(n - m + 1)) for m, n in cat.topo.zones(direction)]
        rows.append(make_row(f"skip_limit[{k}]", coefs, ">=", -float(cfg.max_skips), "skip_stop"))
    return _log_rows("skip_stop", rows)


__all__ = [
    "big_m",
    "build_zone_constraints",
    "build_timetable_constraints",
    "build_headway_constraints",
    "build_turnaround_constraints",
    "build_rollingstock_constraints",
    "build_skipstop_constraints",
]
