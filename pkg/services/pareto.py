# services/pareto.py
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Literal, Optional, Sequence

import pandas as pd

from errors import ConfigMismatch, EmptyFrontier
from formulation.assemble import build_model
from formulation.catalog import VariableCatalog
from formulation.config import ModelConfig
from formulation.milp import MilpInstance, Row, make_row
from formulation.objectives import COST, QUALITY, evaluate_cost, evaluate_quality
from network.demand import ODMatrix
from network.topology import LineTopology
from services.solver import MilpSolution, SolverOptions, solve

log = logging.getLogger(__name__)

SweepDirection = Literal["quality_primary", "cost_primary"]
SWEEP_DIRECTIONS: tuple[str, ...] = ("quality_primary", "cost_primary")
CUT_TAG = "epsilon_cut"
DOMINANCE_TOL = 1e-6


@dataclass(frozen=True)
class ParetoPoint:
    obj1: int                               # turnarounds
    obj2: float                             # travel time plus headways, s
    solution: Optional[MilpSolution] = field(default=None, compare=False)
    cut: Optional[Row] = field(default=None, compare=False)
    services_up: int = 0
    services_down: int = 0
    trains: dict[int, int] = field(default_factory=dict, compare=False)   # depot -> trains
    wall_time: float = field(default=0.0, compare=False)


# ---------------- Internal helpers ----------------

def _dominates(p: ParetoPoint, q: ParetoPoint, tol: float) -> bool:
    no_worse = p.obj1 >= q.obj1 and p.obj2 <= q.obj2 + tol
    better = p.obj1 > q.obj1 or p.obj2 < q.obj2 - tol
    return no_worse and better


def _point(cat: VariableCatalog, solution: MilpSolution, cut: Optional[Row]) -> ParetoPoint:
    values = solution.assignment
    selected = {k for k in cat.all_services() if values.get(cat.tau(k), 0.0) > 0.5}
    return ParetoPoint(
        obj1=int(round(evaluate_cost(cat, values))),
        obj2=evaluate_quality(cat, values),
        solution=solution,
        cut=cut,
        services_up=len(selected & set(cat.services("up"))),
        services_down=len(selected & set(cat.services("down"))),
        trains={dp: int(round(values.get(cat.rs(dp), 0.0))) for dp in range(1, 5)},
        wall_time=solution.wall_time,
    )


def _cut(instance: MilpInstance, objective: str, sense: str, rhs: float, step: int) -> Row:
    obj = instance.objectives[objective]
    return make_row(f"eps_cut[{step}]", obj.coefs, sense, rhs - obj.constant, CUT_TAG)


# ---------------- Public API ----------------

def filter_nondominated(points: Iterable[ParetoPoint], tol: float = DOMINANCE_TOL) -> list[ParetoPoint]:
    """Points no other point weakly dominates, one per (obj1, obj2), by obj1 ascending."""
    pool = list(points)
    kept: list[ParetoPoint] = []
    for p in pool:
        if any(_dominates(q, p, tol) for q in pool):
            continue
        if any(q.obj1 == p.obj1 and abs(q.obj2 - p.obj2) <= tol for q in kept):
            continue
        kept.append(p)
    return sorted(kept, key=lambda p: (p.obj1, p.obj2))


def sweep(
    cfg: ModelConfig,
    topo: LineTopology,
    od: ODMatrix,
    epsilon: float = 1.0,
    opts: Optional[SolverOptions] = None,
    direction: SweepDirection = "quality_primary",
    keep_dominated: bool = False,
) -> list[ParetoPoint]:
    """
    Epsilon-constraint sweep over the turnaround / travel-time trade-off.

    quality_primary minimizes travel time subject to turnarounds >= level,
    raising the level past each optimum by `epsilon`; cost_primary maximizes
    turnarounds subject to travel time <= previous optimum - `epsilon`.
    Both stop at the first infeasible level.
    """
    if epsilon <= 0:
        raise ConfigMismatch("epsilon must be positive")
    if cfg.objective != "bi_objective":
        raise ConfigMismatch(f"model {cfg.model_id} is not bi-objective")
    if direction not in SWEEP_DIRECTIONS:
        raise ConfigMismatch(f"direction must be one of {SWEEP_DIRECTIONS}")

    opts = opts or SolverOptions()
    budget = opts.time_limit / (cfg.fleet + 1)
    step_opts = replace(opts, time_limit=budget)
    cat, base = build_model(cfg, topo, od)
    primary = QUALITY if direction == "quality_primary" else COST
    problem = base.with_objective(primary)

    started = time.monotonic()
    raw: list[ParetoPoint] = []
    cut: Optional[Row] = None
    step = 0
    while True:
        instance = problem if cut is None else problem.with_cut(cut)
        solution = solve(instance, step_opts)
        log.info("sweep step %d (%s): %s objective=%s", step, direction, solution.status, solution.objective)
        if not solution.has_incumbent:
            if solution.status == "time_limit":
                log.warning("sweep step %d ran out of time without an incumbent; stopping", step)
            break
        point = _point(cat, solution, cut)
        raw.append(point)
        step += 1
        if direction == "quality_primary":
            cut = _cut(base, COST, ">=", point.obj1 + epsilon, step)
        else:
            cut = _cut(base, QUALITY, "<=", point.obj2 - epsilon, step)

    if not raw:
        raise EmptyFrontier(f"model {cfg.model_id} has no feasible timetable")
    points = raw if keep_dominated else filter_nondominated(raw)
    log.info(
        "sweep finished: %d solves, %d frontier points, %.1fs",
        len(raw) + 1, len(points), time.monotonic() - started,
    )
    return points


def frontier_frame(points: Sequence[ParetoPoint], instance_label: str) -> pd.DataFrame:
    columns = ["instance", "obj1", "obj2", "services_up", "services_down",
               "depot_1", "depot_2", "depot_3", "depot_4", "wall_time"]
    records = [
        {
            "instance": instance_label,
            "obj1": p.obj1,
            "obj2": round(p.obj2, 6),
            "services_up": p.services_up,
            "services_down": p.services_down,
            **{f"depot_{dp}": p.trains.get(dp, 0) for dp in range(1, 5)},
            "wall_time": round(p.wall_time, 3),
        }
        for p in points
    ]
    return pd.DataFrame(records, columns=columns)


__all__ = ["ParetoPoint", "SWEEP_DIRECTIONS", "sweep", "filter_nondominated", "frontier_frame"]
