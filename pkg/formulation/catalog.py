# formulation/catalog.py
"""
Decision-variable catalog and naming grammar.

Every variable name is a symbol followed by bracketed indices, for example
``tau[3]``, ``z[3][1][16]``, ``d[7][20]`` or ``wbij[2][4][9]``, so exported
MPS files can be read without the model code at hand. Services are numbered
upstream first (1..K_up) and downstream after (K_up+1..K_up+K_dn); stations
use the line's 1..2N numbering.
"""
from __future__ import annotations

import math
import re
from dataclasses import replace
from typing import Iterator, Optional

from errors import ConfigMismatch
from formulation.config import ModelConfig
from formulation.milp import Variable
from network.demand import DIRECTIONS, Direction, ODMatrix
from network.topology import LineTopology

_NAME = re.compile(r"^(?P<sym>[a-z]+)((\[-?\d+\])+)$")

SYMBOLS = {
    "tau": "binary",
    "z": "binary",
    "x": "binary",
    "y": "binary",
    "alpha": "binary",
    "beta": "binary",
    "sigma": "binary",
    "h": "continuous",
    "a": "continuous",
    "d": "continuous",
    "rs": "continuous",
    "w": "continuous",
    "wb": "continuous",
    "wbij": "continuous",
    "nb": "continuous",
    "nbij": "continuous",
    "na": "continuous",
    "n": "continuous",
    "v": "continuous",
    "q": "continuous",
}


def var_name(symbol: str, *indices: int) -> str:
    return symbol + "".join(f"[{int(i)}]" for i in indices)


def parse_name(name: str) -> tuple[str, tuple[int, ...]]:
    """Inverse of var_name: 'z[3][1][16]' -> ('z', (3, 1, 16))."""
    m = _NAME.match(name)
    if not m:
        raise ConfigMismatch(f"{name!r} does not follow the variable naming grammar")
    return m.group("sym"), tuple(int(i) for i in re.findall(r"-?\d+", name[len(m.group("sym")):]))


class VariableCatalog:
    """All decision variables of one scenario, with their bounds."""

    def __init__(
        self,
        cfg: ModelConfig,
        topo: LineTopology,
        od: ODMatrix,
        include_quality: Optional[bool] = None,
    ) -> None:
        topo.require_layout()
        if od.n_per_direction != topo.n:
            raise ConfigMismatch(
                f"demand covers {od.n_per_direction} stations per direction, line has {topo.n}"
            )
        self.cfg = cfg
        self.topo = topo
        self.od = od
        self.include_quality = cfg.objective != "cost" if include_quality is None else include_quality
        self._vars: dict[str, Variable] = {}
        self._declare()

    # ---------- services ----------

    def services(self, direction: Direction) -> range:
        if direction == "up":
            return range(1, self.cfg.k_up + 1)
        return range(self.cfg.k_up + 1, self.cfg.k_up + self.cfg.k_dn + 1)

    def all_services(self) -> range:
        return range(1, self.cfg.k_up + self.cfg.k_dn + 1)

    def direction_of_service(self, k: int) -> Direction:
        if 1 <= k <= self.cfg.k_up:
            return "up"
        if self.cfg.k_up < k <= self.cfg.k_up + self.cfg.k_dn:
            return "down"
        raise ConfigMismatch(f"service {k} is outside 1..{self.cfg.k_up + self.cfg.k_dn}")

    def first_service(self, direction: Direction) -> int:
        return self.services(direction)[0]

    def previous(self, k: int) -> Optional[int]:
        return None if k == self.first_service(self.direction_of_service(k)) else k - 1

    def stations_of_service(self, k: int) -> range:
        return self.topo.stations_of(self.direction_of_service(k))

    # ---------- horizon ----------

    def horizon_end(self, direction: Direction) -> float:
        """Latest instant any time variable of the direction can take."""
        return self.cfg.last_departure(direction) + self.topo.traversal_time(direction)

    def time_span(self, direction: Direction) -> float:
        return self.horizon_end(direction) - self.cfg.first_departure(direction)

    def earliest_time(self) -> float:
        """Lowest bound of any time variable: an arrival one dwell before the first departure."""
        return min(
            self.cfg.first_departure(d) - self.topo.dwell_time[self.topo.stations_of(d)[0]] for d in DIRECTIONS
        )

    def default_big_m(self) -> float:
        """Widest gap between any two time variables, plus the longest reversal."""
        return max(self.horizon_end(d) for d in DIRECTIONS) - self.earliest_time() + self.topo.max_turnaround()

    # ---------- demand ----------

    def pairs(self, direction: Direction) -> list[tuple[int, int]]:
        return self.od.pairs(direction)

    def wait_bound(self, i: int, j: int) -> float:
        """Most passengers of (i, j) that can ever wait for one service."""
        direction = self.topo.direction_of(i)
        return self.od.rate_of(i, j) * (self.cfg.initial_accumulation + self.time_span(direction))

    def direction_wait_bound(self, direction: Direction) -> float:
        return sum(self.wait_bound(i, j) for i, j in self.pairs(direction))

    def capacity_can_bind(self, direction: Direction) -> bool:
        return self.direction_wait_bound(direction) > self.cfg.capacity

    def origin_pairs(self, i: int) -> list[tuple[int, int]]:
        return [p for p in self.pairs(self.topo.direction_of(i)) if p[0] == i]

    def destination_pairs(self, j: int) -> list[tuple[int, int]]:
        return [p for p in self.pairs(self.topo.direction_of(j)) if p[1] == j]

    # ---------- names ----------

    @staticmethod
    def tau(k: int) -> str:
        return var_name("tau", k)

    @staticmethod
    def z(k: int, m: int, n: int) -> str:
        return var_name("z", k, m, n)

    @staticmethod
    def x(k: int, i: int) -> str:
        return var_name("x", k, i)

    @staticmethod
    def y(k: int, l: int, m: int) -> str:
        return var_name("y", k, l, m)

    @staticmethod
    def alpha(dp: int, k: int) -> str:
        return var_name("alpha", dp, k)

    @staticmethod
    def beta(dp: int, k: int) -> str:
        return var_name("beta", dp, k)

    @staticmethod
    def h(k: int) -> str:
        return var_name("h", k)

    @staticmethod
    def a(k: int, i: int) -> str:
        return var_name("a", k, i)

    @staticmethod
    def d(k: int, i: int) -> str:
        return var_name("d", k, i)

    @staticmethod
    def rs(dp: int) -> str:
        return var_name("rs", dp)

    @staticmethod
    def w(k: int, i: int, j: int) -> str:
        return var_name("w", k, i, j)

    @staticmethod
    def wb(k: int, i: int) -> str:
        return var_name("wb", k, i)

    @staticmethod
    def wbij(k: int, i: int, j: int) -> str:
        return var_name("wbij", k, i, j)

    @staticmethod
    def nb(k: int, i: int) -> str:
        return var_name("nb", k, i)

    @staticmethod
    def nbij(k: int, i: int, j: int) -> str:
        return var_name("nbij", k, i, j)

    @staticmethod
    def na(k: int, i: int) -> str:
        return var_name("na", k, i)

    @staticmethod
    def n(k: int, i: int) -> str:
        return var_name("n", k, i)

    @staticmethod
    def v(k: int, i: int, j: int) -> str:
        return var_name("v", k, i, j)

    @staticmethod
    def sigma(k: int, i: int) -> str:
        return var_name("sigma", k, i)

    @staticmethod
    def q(k: int, m: int, n: int) -> str:
        return var_name("q", k, m, n)

    # ---------- turnaround structure ----------

    def turn_links(self, k: int) -> Iterator[tuple[int, int]]:
        """(l, m) for every y[k][l][m]: k ends at m, l starts at its twin."""
        direction = self.direction_of_service(k)
        other = "down" if direction == "up" else "up"
        for m in self.topo.zone_ends(direction):
            for l in self.services(other):
                yield l, m

    def turn_ins(self, l: int) -> Iterator[tuple[int, int]]:
        """(k, m) for every y[k][l][m] that feeds service l."""
        direction = self.direction_of_service(l)
        other = "down" if direction == "up" else "up"
        for k in self.services(other):
            for m in self.topo.zone_ends(other):
                yield k, m

    # ---------- declarations ----------

    def variable(self, name: str) -> Variable:
        return self._vars[name]

    @property
    def variables(self) -> tuple[Variable, ...]:
        return tuple(self._vars.values())

    def names(self, symbol: str) -> list[str]:
        prefix = symbol + "["
        return [n for n in self._vars if n.startswith(prefix)]

    def rebound(self, name: str, lower: float, upper: float) -> None:
        self._vars[name] = replace(self._vars[name], lower=lower, upper=upper)

    def _add(self, name: str, lower: float = 0.0, upper: float = math.inf) -> None:
        sym, _ = parse_name(name)
        self._vars[name] = Variable(name, SYMBOLS[sym], float(lower), float(upper))

    def _declare(self) -> None:
        cfg, topo = self.cfg, self.topo
        for direction in DIRECTIONS:
            ks = self.services(direction)
            run = topo.stations_of(direction)
            ft = cfg.first_departure(direction)
            end = self.horizon_end(direction)
            span = self.time_span(direction)
            first_dwell = topo.dwell_time[run[0]]
            for k in ks:
                self._add(self.tau(k), 0, 1)
                for m, n in topo.zones(direction):
                    self._add(self.z(k, m, n), 0, 1)
                for i in run:
                    self._add(self.x(k, i), 0, 1)
                for l, m in self.turn_links(k):
                    self._add(self.y(k, l, m), 0, 1)
                for dp in topo.pullout_depots(direction):
                    self._add(self.alpha(dp, k), 0, 1)
                for dp in topo.pullin_depots(direction):
                    self._add(self.beta(dp, k), 0, 1)
                if self.previous(k) is not None:
                    self._add(self.h(k), 0, cfg.h_max)
                for i in run:
                    self._add(self.a(k, i), ft - first_dwell, end)
                    self._add(self.d(k, i), ft, end)
                self._declare_flow(k, direction)
                if self.include_quality and self.previous(k) is not None:
                    for m, n in topo.zones(direction):
                        self._add(self.q(k, m, n), 0, span)
        for dp, _host in topo.depots:
            self._add(self.rs(dp), 0, cfg.fleet)

    def _declare_flow(self, k: int, direction: Direction) -> None:
        cap = self.cfg.capacity
        bind = self.capacity_can_bind(direction)
        for i, j in self.pairs(direction):
            wbar = self.wait_bound(i, j)
            for name in (self.w(k, i, j), self.wbij(k, i, j), self.nbij(k, i, j), self.v(k, i, j)):
                self._add(name, 0, wbar)
        for i in self.topo.stations_of(direction):
            out = sum(self.wait_bound(*p) for p in self.origin_pairs(i))
            self._add(self.wb(k, i), 0, out)
            self._add(self.nb(k, i), 0, min(out, cap))
            self._add(self.na(k, i), 0, cap)
            self._add(self.n(k, i), 0, cap)
            # capacity cannot bind when the whole direction fits in one train
            self._add(self.sigma(k, i), 0, 1 if bind else 0)


__all__ = ["VariableCatalog", "SYMBOLS", "var_name", "parse_name"]
