# ui/kpis.py
from __future__ import annotations

from collections import Counter
from typing import Dict, Optional

from processors.flow_sim import FlowTrace, metrics
from processors.timetable import Timetable
from services.solver import MilpSolution

DEPOTS = (1, 2, 3, 4)


def _full_zone(direction: str, n: int) -> tuple[int, int]:
    return (1, n) if direction == "up" else (n + 1, 2 * n)


def short_turn_count(tt: Timetable) -> int:
    """Selected services whose zone stops short of either terminal."""
    n = tt.n_per_direction
    return sum(1 for s in tt.selected() if tuple(s.zone) != _full_zone(s.direction, n))


def trains_per_depot(tt: Timetable) -> dict[int, int]:
    counts = Counter(s.from_depot for s in tt.selected() if s.from_depot is not None)
    return {dp: int(counts.get(dp, 0)) for dp in DEPOTS}


def compute_kpis(
    tt: Timetable,
    trace: Optional[FlowTrace] = None,
    solution: Optional[MilpSolution] = None,
) -> Dict[str, Optional[float | int | str]]:
    """
    Returns a dict with:
      - "Services up" / "Services down" (int)
      - "Short-turn services" (int)
      - "Turnarounds" (int), services fed by a train coming back from the other direction
      - "Trains from depot 1".."Trains from depot 4" (int)
      - "Total waiting time" (passenger-seconds) and "Peak load factor" (fraction), None without a trace
      - "Status" (str), "—" without a solver run
    """
    # ---------- services ----------
    out: Dict[str, Optional[float | int | str]] = {
        "Services up": len(tt.selected("up")),
        "Services down": len(tt.selected("down")),
        "Short-turn services": short_turn_count(tt),
        "Turnarounds": sum(1 for s in tt.selected() if s.from_service is not None),
    }

    # ---------- rolling stock ----------
    for dp, count in trains_per_depot(tt).items():
        out[f"Trains from depot {dp}"] = count

    # ---------- passengers ----------
    if trace is not None:
        m = metrics(trace)
        out["Total waiting time"] = m["total_waiting_time"]
        out["Peak load factor"] = m["peak_load_factor"]
    else:
        out["Total waiting time"] = None
        out["Peak load factor"] = None

    out["Status"] = solution.status if solution is not None else "—"
    return out


__all__ = ["DEPOTS", "short_turn_count", "trains_per_depot", "compute_kpis"]
