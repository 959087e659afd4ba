# ui/charts.py
from __future__ import annotations

from typing import Optional, Sequence

import pandas as pd
import plotly.graph_objects as go

from processors.flow_sim import FlowTrace
from processors.timetable import Timetable
from services.pareto import ParetoPoint

_LEGEND = dict(orientation="h", yanchor="bottom", y=1.06, xanchor="left", x=0.0, bgcolor="rgba(0,0,0,0)")
_MARGIN = dict(l=10, r=10, t=70, b=30)


def _position(station: int, n: int) -> int:
    """Physical position along the line (1..N) for either direction's station id."""
    return station if station <= n else 2 * n + 1 - station


def chart_timetable_diagram(tt: Timetable, title: str = "Space-time diagram") -> go.Figure:
    """
    One polyline per selected service: time on x, physical station on y.
    Skipped stations are drawn as open markers.
    """
    runs = tt.selected()
    if not runs:
        return go.Figure()

    n = tt.n_per_direction
    fig = go.Figure()
    for s in runs:
        xs, ys, symbols = [], [], []
        for i in s.route:
            pos = _position(i, n)
            xs += [s.arrival[i], s.departure[i]]
            ys += [pos, pos]
            symbols += ["circle" if s.stops.get(i) else "circle-open"] * 2
        label = f"{s.direction} #{s.service}" + (f" (train {s.train})" if s.train is not None else "")
        fig.add_trace(go.Scatter(
            x=xs, y=ys, mode="lines+markers", name=label,
            marker=dict(symbol=symbols, size=6),
            line=dict(dash="solid" if s.zone_stations == range(s.route[0], s.route[-1] + 1) else "dot"),
            hovertemplate="t=%{x:.0f}s<br>station %{y}<extra>" + label + "</extra>",
        ))

    fig.update_xaxes(title_text="Time (s)")
    fig.update_yaxes(title_text="Station", dtick=1, autorange="reversed")
    fig.update_layout(title=title, margin=_MARGIN, legend=_LEGEND, hovermode="closest")
    return fig


def chart_pareto_frontier(
    points: Sequence[ParetoPoint],
    dominated: Optional[Sequence[ParetoPoint]] = None,
    title: str = "Pareto frontier",
) -> go.Figure:
    if not points:
        return go.Figure()

    fig = go.Figure()
    if dominated:
        fig.add_trace(go.Scatter(
            x=[p.obj1 for p in dominated], y=[p.obj2 for p in dominated],
            mode="markers", name="Dominated", marker=dict(symbol="x", size=8, color="#9aa3ad"),
            hovertemplate="%{x} turnarounds<br>%{y:,.0f}s<extra>Dominated</extra>",
        ))
    ordered = sorted(points, key=lambda p: p.obj1)
    fig.add_trace(go.Scatter(
        x=[p.obj1 for p in ordered], y=[p.obj2 for p in ordered],
        mode="lines+markers", name="Non-dominated", line=dict(shape="hv"),
        hovertemplate="%{x} turnarounds<br>%{y:,.0f}s<extra>Non-dominated</extra>",
    ))
    fig.update_xaxes(title_text="Turnarounds (objective 1)", dtick=1)
    fig.update_yaxes(title_text="Travel time + headways, s (objective 2)", rangemode="tozero")
    fig.update_layout(title=title, margin=_MARGIN, legend=_LEGEND, hovermode="closest")
    return fig


def chart_load_profile(trace: FlowTrace, direction: str = "up", title: str = "Onboard load") -> go.Figure:
    """Onboard passengers leaving each station, one line per service, capacity as a dotted line."""
    records = [
        {"service": k, "station": i, "onboard": f.onboard}
        for (k, i), f in trace.stations.items()
        if trace.timetable.service(k).direction == direction
    ]
    if not records:
        return go.Figure()

    df = pd.DataFrame(records).sort_values(["service", "station"])
    fig = go.Figure()
    for k, group in df.groupby("service", sort=True):
        fig.add_trace(go.Scatter(
            x=group["station"], y=group["onboard"], mode="lines+markers", name=f"#{k}",
            hovertemplate="%{y:,.1f}<extra>service " + str(k) + "</extra>",
        ))
    fig.add_hline(y=trace.capacity, line_dash="dot", annotation_text="capacity", annotation_position="top left")
    fig.update_xaxes(title_text="Station", dtick=1)
    fig.update_yaxes(title_text="Passengers", rangemode="tozero")
    fig.update_layout(title=title, margin=_MARGIN, legend=_LEGEND, hovermode="x unified")
    return fig


__all__ = ["chart_timetable_diagram", "chart_pareto_frontier", "chart_load_profile"]
