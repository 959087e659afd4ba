# formulation/objectives.py
from __future__ import annotations

import math
from typing import Mapping

from errors import ConfigMismatch, UnboundedTime
from formulation.catalog import VariableCatalog
from formulation.config import ModelConfig
from formulation.constraints import big_m
from formulation.milp import Objective, Row, make_objective, make_row

COST = "cost"
QUALITY = "quality"


def build_objective_cost(cat: VariableCatalog) -> Objective:
    """Maximize turnarounds, i.e. trains reused instead of pulled from a depot."""
    return make_objective(COST, "max", [(name, 1.0) for name in cat.names("y")])


def build_objective_quality(cat: VariableCatalog, cfg: ModelConfig) -> tuple[Objective, list[Row]]:
    """
    Minimize zone travel time plus headways.

    Each product (d[k][n] - d[k-1][m]) * z[k][m][n] is carried by q[k][m][n]
    under McCormick rows; the difference is never negative because
    departures are chained by non-negative headways.
    """
    if not cat.include_quality:
        raise ConfigMismatch("catalog was built without quality auxiliaries")
    for name in cat.names("d"):
        if not math.isfinite(cat.variable(name).upper):
            raise UnboundedTime(name)

    coefs: list[tuple[str, float]] = []
    rows: list[Row] = []
    tag = "objective_link"
    for k in cat.all_services():
        prev = cat.previous(k)
        if prev is None:
            continue
        direction = cat.direction_of_service(k)
        for m, n in cat.topo.zones(direction):
            q, z = cat.q(k, m, n), cat.z(k, m, n)
            late, early = cat.d(k, n), cat.d(prev, m)
            upper = big_m(cfg, cat, cat.variable(late).upper - cat.variable(early).lower)
            rows.append(make_row(
                f"travel_lo[{k}][{m}][{n}]", {q: 1.0, late: -1.0, early: 1.0, z: -upper}, ">=", -upper, tag,
            ))
            rows.append(make_row(f"travel_on[{k}][{m}][{n}]", {q: 1.0, z: -upper}, "<=", 0.0, tag))
            rows.append(make_row(f"travel_hi[{k}][{m}][{n}]", {q: 1.0, late: -1.0, early: 1.0}, "<=", 0.0, tag))
            coefs.append((q, 1.0))
        for i in cat.stations_of_service(k):
            coefs.append((cat.d(k, i), 1.0))
            coefs.append((cat.d(prev, i), -1.0))
    return make_objective(QUALITY, "min", coefs), rows


def evaluate_quality(cat: VariableCatalog, values: Mapping[str, float]) -> float:
    """The quality objective evaluated on the products directly (no auxiliaries)."""
    total = 0.0
    for k in cat.all_services():
        prev = cat.previous(k)
        if prev is None:
            continue
        direction = cat.direction_of_service(k)
        for m, n in cat.topo.zones(direction):
            gap = values.get(cat.d(k, n), 0.0) - values.get(cat.d(prev, m), 0.0)
            total += gap * values.get(cat.z(k, m, n), 0.0)
        for i in cat.stations_of_service(k):
            total += values.get(cat.d(k, i), 0.0) - values.get(cat.d(prev, i), 0.0)
    return total


def evaluate_cost(cat: VariableCatalog, values: Mapping[str, float]) -> float:
    return sum(values.get(name, 0.0) for name in cat.names("y"))


__all__ = ["COST", "QUALITY", "build_objective_cost", "build_objective_quality", "evaluate_quality", "evaluate_cost"]
