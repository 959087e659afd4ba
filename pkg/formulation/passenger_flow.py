# formulation/passenger_flow.py
from __future__ import annotations

import logging

from formulation.catalog import VariableCatalog
from formulation.config import ModelConfig
from formulation.milp import Row, make_row
from network.demand import DIRECTIONS, ODMatrix

log = logging.getLogger(__name__)


def _eligibility_rows(cat: VariableCatalog, k: int, i: int, j: int) -> list[Row]:
    """wbij = w * x_i * x_j for w in [0, W] and binary x."""
    wbar = cat.wait_bound(i, j)
    wbij, w = cat.wbij(k, i, j), cat.w(k, i, j)
    xi, xj = cat.x(k, i), cat.x(k, j)
    tag = "linearization"
    return [
        make_row(f"eligible_w[{k}][{i}][{j}]", {wbij: 1.0, w: -1.0}, "<=", 0.0, tag),
        make_row(f"eligible_origin[{k}][{i}][{j}]", {wbij: 1.0, xi: -wbar}, "<=", 0.0, tag),
        make_row(f"eligible_dest[{k}][{i}][{j}]", {wbij: 1.0, xj: -wbar}, "<=", 0.0, tag),
        make_row(
            f"eligible_both[{k}][{i}][{j}]",
            {wbij: 1.0, w: -1.0, xi: -wbar, xj: -wbar}, ">=", -2.0 * wbar, tag,
        ),
    ]


def _boarding_rows(cfg: ModelConfig, cat: VariableCatalog, k: int, i: int, back: int | None) -> list[Row]:
    """nb = min(C - n_prev + na, wb) with one indicator binary."""
    cap = cfg.capacity
    nb, wb, na, sigma = cat.nb(k, i), cat.wb(k, i), cat.na(k, i), cat.sigma(k, i)
    room = {nb: 1.0, na: -1.0}
    if back is not None:
        room[cat.n(k, back)] = 1.0
    # |room - wb| never exceeds this
    bm = max(cap, cat.variable(wb).upper)
    tag = "linearization"
    return [
        make_row(f"board_room[{k}][{i}]", room, "<=", cap, tag),
        make_row(f"board_want[{k}][{i}]", {nb: 1.0, wb: -1.0}, "<=", 0.0, tag),
        make_row(f"board_min_room[{k}][{i}]", {**room, sigma: -bm}, ">=", cap - bm, tag),
        make_row(f"board_min_want[{k}][{i}]", {nb: 1.0, wb: -1.0, sigma: bm}, ">=", 0.0, tag),
    ]


def build_demand_constraints(cfg: ModelConfig, od: ODMatrix, cat: VariableCatalog) -> list[Row]:
    """
    Passenger accumulation, boarding, alighting and leftovers for every
    service and positive-rate pair. Unselected services inherit their
    predecessor's departures (zero headway), so waiting passengers roll over.
    """
    rows: list[Row] = []
    for direction in DIRECTIONS:
        run = cat.topo.stations_of(direction)
        pairs = cat.pairs(direction)
        for k in cat.services(direction):
            prev = cat.previous(k)
            for i, j in pairs:
                p = od.rate_of(i, j)
                w = cat.w(k, i, j)
                if prev is None:
                    rows.append(make_row(
                        f"accumulate_first[{k}][{i}][{j}]", {w: 1.0}, "=", p * cfg.initial_accumulation, "demand",
                    ))
                else:
                    rows.append(make_row(
                        f"accumulate[{k}][{i}][{j}]",
                        {w: 1.0, cat.v(prev, i, j): -1.0, cat.d(k, i): -p, cat.d(prev, i): p},
                        "=", 0.0, "demand",
                    ))
                rows.extend(_eligibility_rows(cat, k, i, j))
                rows.append(make_row(
                    f"leftover_split[{k}][{i}][{j}]",
                    {cat.nb(k, i): 1.0, cat.nbij(k, i, j): -1.0, cat.wb(k, i): -1.0, cat.wbij(k, i, j): 1.0},
                    "=", 0.0, "demand",
                ))
                rows.append(make_row(
                    f"leftover[{k}][{i}][{j}]",
                    {cat.v(k, i, j): 1.0, w: -1.0, cat.nbij(k, i, j): 1.0}, "=", 0.0, "demand",
                ))

            for pos, i in enumerate(run):
                back = run[pos - 1] if pos > 0 else None
                rows.append(make_row(
                    f"want_board[{k}][{i}]",
                    [(cat.wb(k, i), 1.0)] + [(cat.wbij(k, o, dst), -1.0) for o, dst in cat.origin_pairs(i)],
                    "=", 0.0, "demand",
                ))
                rows.append(make_row(
                    f"alight[{k}][{i}]",
                    [(cat.na(k, i), 1.0)] + [(cat.nbij(k, o, dst), -1.0) for o, dst in cat.destination_pairs(i)],
                    "=", 0.0, "demand",
                ))
                balance = {cat.n(k, i): 1.0, cat.na(k, i): 1.0, cat.nb(k, i): -1.0}
                if back is not None:
                    balance[cat.n(k, back)] = -1.0
                rows.append(make_row(f"onboard[{k}][{i}]", balance, "=", 0.0, "demand"))
                rows.extend(_boarding_rows(cfg, cat, k, i, back))
    log.debug("demand: %d rows over %d positive pairs", len(rows), len(od.rate))
    return rows


__all__ = ["build_demand_constraints"]
