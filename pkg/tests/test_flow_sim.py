from __future__ import annotations

import random
from dataclasses import replace

import pandas as pd
import pytest

from errors import InfeasibleTimetable, TimetableMismatch
from formulation.assemble import build_model
from formulation.catalog import parse_name
from formulation.milp import make_objective
from network.demand import ODMatrix, from_counts
from processors.fixtures import load_fixture
from processors.flow_sim import (
    allocation_gap,
    compare_with_milp,
    finish_time,
    fix_to_timetable,
    metrics,
    reduction,
    simulate,
    structure_assignment,
    total_waiting_time,
    trace_frame,
    write_trace_csv,
)
from processors.timetable import ServiceRun, Timetable, timetable_from_solution
from services.solver import SolverOptions, solve


def _line4(*starts: float, stops=None) -> Timetable:
    """Up services on a 4-station line, 10 s between departures, no dwell."""
    runs = []
    for k, start in enumerate(starts, start=1):
        dep = {i: start + 10.0 * (i - 1) for i in range(1, 5)}
        served = stops or {1, 2, 3, 4}
        runs.append(ServiceRun(k, "up", (1, 4), {i: i in served for i in dep}, dict(dep), dep))
    return Timetable(tuple(runs), 4)


def _lump(counts: dict[tuple[int, int], float]) -> ODMatrix:
    return from_counts(4, counts, (0.0, 20.0), arrival="lump")


# ---------- worked examples ----------

def test_all_stop_versus_skip_stop(fig5_standard, fig5_skip) -> None:
    std = simulate(fig5_standard.timetable, fig5_standard.od, fig5_standard.cfg.capacity)
    skip = simulate(fig5_skip.timetable, fig5_skip.od, fig5_skip.cfg.capacity)
    assert total_waiting_time(std) == pytest.approx(5400.0)
    assert total_waiting_time(skip) == pytest.approx(4700.0)
    assert finish_time(fig5_standard.timetable) == 13.0
    assert finish_time(fig5_skip.timetable) == 12.0
    assert reduction(5400.0, 4700.0) == pytest.approx(12.96, abs=0.01)
    assert reduction(13.0, 12.0) == pytest.approx(7.69, abs=0.01)
    assert std.stranded == 0.0 and skip.stranded == 0.0


def test_first_train_leaves_passengers_behind(fig5_standard) -> None:
    trace = simulate(fig5_standard.timetable, fig5_standard.od, fig5_standard.cfg.capacity)
    at2 = trace.stations[(1, 2)]
    assert at2.want == 500.0 and at2.boarded == 400.0
    assert trace.pairs[(2, 2, 4)].waiting == 100.0
    assert trace.left_behind_events == 2
    assert metrics(trace)["peak_load_factor"] == 1.0


def test_single_cohort() -> None:
    trace = simulate(_line4(10.0), from_counts(4, {(1, 4): 100.0}, (0.0, 50.0), "lump"), 500.0)
    assert total_waiting_time(trace) == pytest.approx(1000.0)


def test_uniform_arrivals_wait_half_the_gap() -> None:
    od = ODMatrix(4, {(1, 4): 1.0}, (0.0, 3600.0))
    trace = simulate(_line4(500.0), od, 1000.0, initial_accumulation=120.0)
    assert trace.boarded == pytest.approx(120.0)
    assert total_waiting_time(trace) == pytest.approx(7200.0)
    assert metrics(trace)["average_waiting_time"] == pytest.approx(60.0)


def test_zero_demand() -> None:
    trace = simulate(_line4(0.0, 60.0), ODMatrix(4, {}, (0.0, 100.0)), 100.0)
    assert total_waiting_time(trace) == 0.0
    assert trace.boarded == 0.0 and trace.stranded == 0.0
    assert all(f.onboard == 0.0 for f in trace.stations.values())


def test_finish_time_shifts_with_the_headway() -> None:
    assert finish_time(_line4(0.0)) == 30.0
    assert finish_time(_line4(0.0, 45.0)) == 75.0
    with pytest.raises(InfeasibleTimetable):
        finish_time(Timetable((), 4))


def test_reduction_from_zero() -> None:
    assert reduction(0.0, 0.0) == 0.0


# ---------- boarding rules ----------

def test_fifo_within_a_stream() -> None:
    od = ODMatrix(4, {(1, 4): 1.0}, (0.0, 3600.0))
    trace = simulate(_line4(500.0, 560.0), od, 50.0, initial_accumulation=120.0)
    first, second = [b for b in trace.boardings if b.origin == 1]
    assert (first.arrived_from, first.arrived_to) == pytest.approx((380.0, 430.0))
    assert (second.arrived_from, second.arrived_to) == pytest.approx((430.0, 480.0))
    assert first.arrived_to <= second.arrived_from
    assert trace.stranded == pytest.approx(180.0 - 100.0)


def test_simultaneous_lumps_board_by_destination() -> None:
    trace = simulate(_line4(5.0), _lump({(1, 3): 300.0, (1, 4): 300.0}), 400.0)
    assert trace.pairs[(1, 1, 3)].boarded == pytest.approx(300.0)
    assert trace.pairs[(1, 1, 4)].boarded == pytest.approx(100.0)
    assert trace.pairs[(1, 1, 4)].leftover == pytest.approx(200.0)


def test_passengers_only_board_for_served_destinations() -> None:
    tt = _line4(0.0, stops={1, 2, 4})
    trace = simulate(tt, _lump({(1, 3): 50.0, (1, 4): 70.0}), 500.0)
    assert trace.pairs[(1, 1, 3)].eligible == 0.0
    assert trace.stations[(1, 1)].boarded == pytest.approx(70.0)
    assert trace.stranded == pytest.approx(50.0)


@pytest.mark.parametrize("capacity", [100.0, 250.0, 450.0, 600.0])
def test_load_stays_within_capacity(fig5_standard, capacity) -> None:
    trace = simulate(fig5_standard.timetable, fig5_standard.od, capacity)
    assert all(f.onboard <= capacity + 1e-9 for f in trace.stations.values())


def test_every_boarded_passenger_alights(fig5_skip) -> None:
    trace = simulate(fig5_skip.timetable, fig5_skip.od, 350.0)
    for s in fig5_skip.timetable.selected():
        boarded = sum(trace.stations[(s.service, i)].boarded for i in s.route)
        alighted = sum(trace.stations[(s.service, i)].alighted for i in s.route)
        assert boarded == pytest.approx(alighted)
        assert trace.stations[(s.service, s.route[-1])].onboard == 0.0
    assert trace.boarded + trace.stranded == pytest.approx(900.0)


def test_more_room_never_means_longer_waits(fig5_standard) -> None:
    waits, stranded = [], []
    for capacity in (100.0, 300.0, 450.0, 500.0, 600.0, 900.0):
        trace = simulate(fig5_standard.timetable, fig5_standard.od, capacity)
        waits.append(total_waiting_time(trace))
        stranded.append(trace.stranded)
    # 700 and 300 passengers never board at the two smallest sizes; they wait until t=20
    assert stranded[:3] == [700.0, 300.0, 0.0]
    assert waits == pytest.approx([14700.0, 9300.0, 5850.0, 5700.0, 5400.0, 4500.0])


def test_stranded_passengers_wait_until_the_cutoff(fig5_standard) -> None:
    trace = simulate(fig5_standard.timetable, fig5_standard.od, 100.0)
    assert trace.cutoff == 20.0
    assert trace.boarded_waiting == pytest.approx(700.0)
    assert trace.stranded_waiting == pytest.approx(700.0 * 20.0)
    assert metrics(trace)["average_waiting_time"] == pytest.approx(14700.0 / 900.0)


def _random_terminal_line(rng: random.Random) -> tuple[Timetable, ODMatrix]:
    """All-stop trains sharing one running profile; every passenger rides to the last station."""
    n = rng.randint(4, 6)
    run = {i: rng.uniform(30.0, 90.0) for i in range(2, n + 1)}
    dwell = {i: rng.uniform(0.0, 20.0) for i in range(1, n)} | {n: 0.0}
    starts = sorted(rng.uniform(0.0, 900.0) for _ in range(rng.randint(2, 4)))
    runs = []
    for k, start in enumerate(starts, start=1):
        arrival, departure = {1: start}, {1: start + dwell[1]}
        for i in range(2, n + 1):
            arrival[i] = departure[i - 1] + run[i]
            departure[i] = arrival[i] + dwell[i]
        runs.append(ServiceRun(k, "up", (1, n), {i: True for i in arrival}, arrival, departure))
    counts = {(i, n): rng.uniform(20.0, 400.0) for i in range(1, n)}
    arrival_mode = rng.choice(["fluid", "lump"])
    return Timetable(tuple(runs), n), from_counts(n, counts, (0.0, 1800.0), arrival=arrival_mode)


@pytest.mark.parametrize("seed", range(40))
def test_waiting_time_falls_as_capacity_grows(seed: int) -> None:
    rng = random.Random(seed)
    tt, od = _random_terminal_line(rng)
    capacities = sorted(rng.uniform(10.0, 600.0) for _ in range(5))
    waits = [total_waiting_time(simulate(tt, od, c)) for c in capacities]
    assert all(later <= earlier + 1e-6 for earlier, later in zip(waits, waits[1:])), (capacities, waits)


# ---------- validation ----------

def test_bad_timetables() -> None:
    od = ODMatrix(4, {}, (0.0, 10.0))
    with pytest.raises(InfeasibleTimetable):
        simulate(_line4(0.0), od, 0.0)
    back = ServiceRun(1, "up", (1, 4), {i: True for i in range(1, 5)},
                      {1: 0.0, 2: 5.0, 3: 20.0, 4: 30.0}, {1: 10.0, 2: 6.0, 3: 20.0, 4: 30.0})
    with pytest.raises(InfeasibleTimetable) as err:
        simulate(Timetable((back,), 4), od, 10.0)
    assert err.value.station == 2
    wrong_track = ServiceRun(1, "down", (1, 4), {1: True}, {1: 0.0}, {1: 0.0})
    with pytest.raises(InfeasibleTimetable):
        simulate(Timetable((wrong_track,), 4), od, 10.0)


def test_allocation_gap_counts_extra_streams() -> None:
    od = _lump({(1, 3): 300.0, (1, 4): 300.0})
    assert allocation_gap(simulate(_line4(5.0), od, 400.0), od) == pytest.approx(200.0)
    assert allocation_gap(simulate(_line4(5.0), od, 1000.0), od) == 0.0


def test_trace_frame(tmp_path, fig5_standard) -> None:
    trace = simulate(fig5_standard.timetable, fig5_standard.od, fig5_standard.cfg.capacity)
    df = trace_frame(trace)
    assert list(df.columns) == ["family", "service", "station", "destination", "value"]
    assert set(df["family"]) == {"w", "wb", "nb", "v", "na", "n"}
    totals = df[df["destination"].isna()]
    assert totals[totals["family"] == "nb"]["value"].sum() == pytest.approx(900.0)
    path = write_trace_csv(trace, tmp_path / "trace.csv")
    assert len(pd.read_csv(path)) == len(df)


# ---------- model bridge ----------

@pytest.fixture(scope="module")
def solved_tiny8():
    loaded = load_fixture("tiny8")
    cat, inst = build_model(loaded.cfg, loaded.topo, loaded.od)
    sol = solve(inst, SolverOptions(time_limit=120.0))
    tt = timetable_from_solution(sol, loaded.cfg, loaded.topo)
    return loaded, cat, inst, sol, tt


def test_model_flows_match_the_simulator(solved_tiny8) -> None:
    loaded, cat, inst, sol, tt = solved_tiny8
    trace = simulate(tt, loaded.od, loaded.cfg.capacity, loaded.cfg.initial_accumulation)
    report = compare_with_milp(trace, sol, cat)
    assert report.agrees, report.max_abs_diff
    assert report.allocation_gap == 0.0


def test_fixed_timetable_reproduces_the_flows(solved_tiny8) -> None:
    loaded, cat, inst, sol, tt = solved_tiny8
    fixed = fix_to_timetable(inst, cat, tt)
    again = solve(fixed, SolverOptions(time_limit=60.0))
    assert again.status == "optimal"
    trace = simulate(tt, loaded.od, loaded.cfg.capacity, loaded.cfg.initial_accumulation)
    assert compare_with_milp(trace, again, cat).agrees


def test_structure_needs_the_first_service(solved_tiny8) -> None:
    loaded, cat, inst, sol, tt = solved_tiny8
    without_first = Timetable(tuple(s for s in tt.services if s.service != 1), tt.n_per_direction)
    with pytest.raises(TimetableMismatch):
        structure_assignment(without_first, cat)


def test_compare_rejects_another_timetable(solved_tiny8) -> None:
    loaded, cat, inst, sol, tt = solved_tiny8
    trace = simulate(tt, loaded.od, loaded.cfg.capacity, loaded.cfg.initial_accumulation)
    shifted = dict(sol.assignment)
    shifted[cat.d(1, 2)] += 5.0
    with pytest.raises(TimetableMismatch):
        compare_with_milp(trace, replace(sol, assignment=shifted), cat)


# ---------- model against replay over many timetables ----------

HIGHS = SolverOptions(time_limit=120.0, engine="highs")
STRUCTURE = ("tau", "z", "x", "y", "alpha", "beta")


def _timetables(loaded, od: ODMatrix, count: int, seed: int) -> list[Timetable]:
    """
    Feasible timetables for the line: solve once with every service running and
    room to spare, keep that structure, then pin one headway at random and let a
    random objective place the others.
    """
    rng = random.Random(seed)
    cfg = replace(loaded.cfg, capacity=1e4)
    cat, inst = build_model(cfg, loaded.topo, od)
    base = solve(inst.fix({cat.tau(k): 1.0 for k in cat.all_services()}), HIGHS)
    assert base.status == "optimal"
    pinned = inst.fix({n: base.value(n) for n in inst.binaries() if parse_name(n)[0] in STRUCTURE})

    headways = [cat.h(k) for k in cat.all_services() if cat.previous(k) is not None]

    out: list[Timetable] = []
    for _ in range(10 * count):
        if len(out) == count:
            break
        trial = pinned.fix({rng.choice(headways): rng.uniform(cfg.h_min, cfg.h_max)})
        shape = make_objective("shape", "min", {h: rng.uniform(-1.0, 1.0) for h in headways})
        sol = solve(replace(trial, objective=shape), HIGHS)
        if sol.status == "optimal":
            out.append(timetable_from_solution(sol, cfg, loaded.topo))
    assert len(out) == count
    return out


def _replay_against_model(loaded, od: ODMatrix, capacity: float, tt: Timetable):
    cfg = replace(loaded.cfg, capacity=capacity)
    cat, inst = build_model(cfg, loaded.topo, od)
    trace = simulate(tt, od, capacity, cfg.initial_accumulation)
    fixed = solve(fix_to_timetable(inst, cat, tt), HIGHS)
    return trace, compare_with_milp(trace, fixed, cat)


def test_model_agrees_with_replay_on_random_timetables(tiny8) -> None:
    for tt in _timetables(tiny8, tiny8.od, count=100, seed=5):
        trace, report = _replay_against_model(tiny8, tiny8.od, 1e4, tt)
        assert trace.left_behind_events == 0
        assert report.agrees, report.max_abs_diff
        assert report.allocation_gap == 0.0


def _to_the_terminals(count: float) -> ODMatrix:
    pairs = {(i, 8): count for i in range(1, 8)} | {(i, 16): count for i in range(9, 16)}
    return from_counts(8, pairs, (0.0, 1800.0))


def test_model_agrees_with_replay_when_one_destination_fills_the_train(tiny8) -> None:
    od = _to_the_terminals(240.0)
    binding = 0
    for tt in _timetables(tiny8, od, count=20, seed=9):
        trace, report = _replay_against_model(tiny8, od, 30.0, tt)
        binding += trace.left_behind_events > 0
        assert report.allocation_gap == 0.0
        assert report.agrees, report.max_abs_diff
    assert binding == 20


def test_split_destinations_report_the_over_count(tiny8) -> None:
    od = from_counts(
        8,
        {(1, 4): 300.0, (1, 8): 300.0, (2, 6): 200.0, (2, 8): 200.0, (9, 12): 300.0, (9, 16): 300.0},
        (0.0, 1800.0),
    )
    (tt,) = _timetables(tiny8, od, count=1, seed=2)
    trace, report = _replay_against_model(tiny8, od, 20.0, tt)
    assert trace.left_behind_events > 0
    assert report.allocation_gap == pytest.approx(allocation_gap(trace, od))
    assert report.allocation_gap > 0.0
    assert "over-counts" in report.note
