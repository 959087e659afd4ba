# network/demand.py
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Literal, Mapping, Optional

import numpy as np
import pandas as pd

from errors import ConfigMismatch, NonPositiveFactor, UnknownStation

Direction = Literal["up", "down"]
DIRECTIONS: tuple[Direction, Direction] = ("up", "down")

PEAK_UPLIFT = 1.75          # peak-hour demand relative to off-peak
ARRIVAL_KINDS = ("fluid", "lump")


@dataclass(frozen=True)
class ODMatrix:
    """
    Per-second passenger arrival rates for every ordered in-direction pair.

    Stations are numbered 1..2N: upstream 1..N, downstream N+1..2N, so a pair
    (i, j) with i < j lies in one direction when both ends share a half.
    `arrival` is "fluid" (passengers trickle in at the rate) or "lump"
    (the whole horizon's count is on the platform at t_start).
    """

    n_per_direction: int
    rate: Mapping[tuple[int, int], float] = field(default_factory=dict)
    horizon: tuple[float, float] = (0.0, 3600.0)
    arrival: str = "fluid"

    def __post_init__(self) -> None:
        if self.n_per_direction < 2:
            raise ConfigMismatch("a direction needs at least two stations")
        t0, t1 = self.horizon
        if not t0 < t1:
            raise ConfigMismatch(f"horizon start {t0} must precede end {t1}")
        if self.arrival not in ARRIVAL_KINDS:
            raise ConfigMismatch(f"arrival must be one of {ARRIVAL_KINDS}, got {self.arrival!r}")
        clean: dict[tuple[int, int], float] = {}
        for (i, j), r in self.rate.items():
            i, j = int(i), int(j)
            for s in (i, j):
                if not 1 <= s <= 2 * self.n_per_direction:
                    raise UnknownStation(s)
            if r < 0:
                raise ConfigMismatch(f"negative arrival rate for pair ({i}, {j})")
            if r == 0:
                continue
            if i >= j or self.direction_of(i) != self.direction_of(j):
                raise ConfigMismatch(f"pair ({i}, {j}) does not run forward within one direction")
            clean[(i, j)] = float(r)
        object.__setattr__(self, "rate", dict(sorted(clean.items())))

    # ---------- lookups ----------

    @property
    def length(self) -> float:
        return self.horizon[1] - self.horizon[0]

    @property
    def stations(self) -> range:
        return range(1, 2 * self.n_per_direction + 1)

    def direction_of(self, station: int) -> Direction:
        if not 1 <= station <= 2 * self.n_per_direction:
            raise UnknownStation(station)
        return "up" if station <= self.n_per_direction else "down"

    def stations_of(self, direction: Direction) -> range:
        n = self.n_per_direction
        return range(1, n + 1) if direction == "up" else range(n + 1, 2 * n + 1)

    def rate_of(self, i: int, j: int) -> float:
        return self.rate.get((i, j), 0.0)

    def pairs(self, direction: Optional[Direction] = None) -> list[tuple[int, int]]:
        """Pairs with a positive rate, in (origin, destination) order."""
        if direction is None:
            return list(self.rate)
        return [p for p in self.rate if self.direction_of(p[0]) == direction]

    def passengers(self, i: int, j: int) -> float:
        return self.rate_of(i, j) * self.length


# ---------- constructors ----------

def from_counts(
    n_per_direction: int,
    counts: Mapping[tuple[int, int], float],
    horizon: tuple[float, float],
    arrival: str = "fluid",
) -> ODMatrix:
    """Convert per-horizon passenger counts to per-second rates."""
    length = horizon[1] - horizon[0]
    if length <= 0:
        raise ConfigMismatch(f"horizon start {horizon[0]} must precede end {horizon[1]}")
    return ODMatrix(
        n_per_direction,
        {pair: c / length for pair, c in counts.items()},
        horizon,
        arrival,
    )


def gravity(
    n_per_direction: int,
    directional_total: float,
    horizon: tuple[float, float],
    seed: int = 2023,
    jitter: float = 0.2,
) -> ODMatrix:
    """
    Synthetic demand: rate proportional to 1/(1+|i-j|) with seeded jitter,
    scaled so each direction carries `directional_total` passengers over the
    horizon. Both directions use the same physical pattern, mirrored.
    """
    if directional_total < 0:
        raise ConfigMismatch("directional_total must be non-negative")
    rng = np.random.default_rng(seed)
    n = n_per_direction
    length = horizon[1] - horizon[0]
    rates: dict[tuple[int, int], float] = {}
    for offset in (0, n):
        idx = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
        weights = np.array([1.0 / (1.0 + (j - i)) for i, j in idx])
        weights *= rng.uniform(1.0 - jitter, 1.0 + jitter, size=len(idx))
        if directional_total > 0:
            weights *= directional_total / (weights.sum() * length)
            for (i, j), r in zip(idx, weights):
                rates[(i + offset, j + offset)] = float(r)
    return ODMatrix(n, rates, horizon)


# ---------- operations ----------

def scale(od: ODMatrix, factor: float) -> ODMatrix:
    if factor <= 0:
        raise NonPositiveFactor(f"scale factor must be positive, got {factor}")
    return replace(od, rate={p: r * factor for p, r in od.rate.items()})


def peak_uplift(od: ODMatrix) -> ODMatrix:
    return scale(od, PEAK_UPLIFT)


def directional_total(od: ODMatrix, direction: Direction) -> float:
    """Passengers over the horizon for one direction."""
    if direction not in DIRECTIONS:
        raise ConfigMismatch(f"direction must be 'up' or 'down', got {direction!r}")
    return sum(od.rate[p] for p in od.pairs(direction)) * od.length


def restrict(od: ODMatrix, pairs: Iterable[tuple[int, int]]) -> ODMatrix:
    keep = set(pairs)
    return replace(od, rate={p: r for p, r in od.rate.items() if p in keep})


def to_frame(od: ODMatrix) -> pd.DataFrame:
    rows = [
        {
            "direction": od.direction_of(i),
            "origin": i,
            "destination": j,
            "rate": r,
            "passengers": r * od.length,
        }
        for (i, j), r in od.rate.items()
    ]
    return pd.DataFrame(rows, columns=["direction", "origin", "destination", "rate", "passengers"])


__all__ = [
    "Direction",
    "DIRECTIONS",
    "PEAK_UPLIFT",
    "ODMatrix",
    "from_counts",
    "gravity",
    "scale",
    "peak_uplift",
    "directional_total",
    "restrict",
    "to_frame",
]
