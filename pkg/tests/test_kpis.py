from __future__ import annotations

import pytest

from processors.flow_sim import simulate
from processors.timetable import ServiceRun, Timetable
from services.pareto import ParetoPoint
from services.solver import MilpSolution
from ui.charts import chart_load_profile, chart_pareto_frontier, chart_timetable_diagram
from ui.helptext import HELP
from ui.kpis import compute_kpis, short_turn_count, trains_per_depot


def _run(k, direction, zone, start, **links) -> ServiceRun:
    first = 1 if direction == "up" else 9
    route = range(first, first + 8)
    departure = {i: start + 100.0 * (i - first) for i in route}
    stops = {i: zone[0] <= i <= zone[1] for i in route}
    return ServiceRun(k, direction, zone, stops, {i: t - 20.0 for i, t in departure.items()}, departure, **links)


@pytest.fixture
def mixed() -> Timetable:
    return Timetable(
        (
            _run(1, "up", (1, 6), 0.0, from_depot=1, train=1, to_service=3),
            _run(2, "up", (1, 8), 120.0, from_depot=1, train=2),
            _run(3, "down", (11, 16), 400.0, from_service=1, train=1),
            _run(4, "down", (9, 16), 150.0, from_depot=2, train=3),
        ),
        8,
    )


def test_counts(mixed) -> None:
    assert short_turn_count(mixed) == 2
    assert trains_per_depot(mixed) == {1: 2, 2: 1, 3: 0, 4: 0}


def test_kpis_without_a_trace(mixed) -> None:
    kpis = compute_kpis(mixed)
    assert (kpis["Services up"], kpis["Services down"]) == (2, 2)
    assert kpis["Turnarounds"] == 1
    assert kpis["Trains from depot 1"] == 2
    assert kpis["Total waiting time"] is None
    assert kpis["Status"] == "—"


def test_kpis_with_a_replay(fig5_skip) -> None:
    trace = simulate(fig5_skip.timetable, fig5_skip.od, fig5_skip.cfg.capacity)
    kpis = compute_kpis(fig5_skip.timetable, trace, MilpSolution("optimal", 0.0, {}))
    assert kpis["Total waiting time"] == pytest.approx(4700.0)
    assert 0.0 < kpis["Peak load factor"] <= 1.0
    assert kpis["Status"] == "optimal"
    assert kpis["Short-turn services"] == 0


def test_diagram_draws_each_service(mixed) -> None:
    fig = chart_timetable_diagram(mixed)
    assert len(fig.data) == 4
    dashes = {trace.name: trace.line.dash for trace in fig.data}
    assert dashes["up #1 (train 1)"] == "dot"
    assert dashes["up #2 (train 2)"] == "solid"
    assert len(chart_timetable_diagram(Timetable((), 8)).data) == 0


def test_pareto_chart() -> None:
    points = [ParetoPoint(2, 900.0), ParetoPoint(1, 1000.0)]
    fig = chart_pareto_frontier(points, dominated=[ParetoPoint(2, 1100.0)])
    assert [t.name for t in fig.data] == ["Dominated", "Non-dominated"]
    assert list(fig.data[1].x) == [1, 2]


def test_load_profile(fig5_standard) -> None:
    trace = simulate(fig5_standard.timetable, fig5_standard.od, fig5_standard.cfg.capacity)
    fig = chart_load_profile(trace)
    assert len(fig.data) == 2
    assert len(chart_load_profile(trace, direction="down").data) == 0


def test_help_copy_is_filled() -> None:
    assert HELP.KPI_WAITING
    assert set(HELP.TIMETABLE_COLUMNS) >= {"service", "station", "arrival", "departure", "stops"}
    assert "nb" in HELP.TRACE_COLUMNS["family"]
