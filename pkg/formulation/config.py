# formulation/config.py
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

from errors import ConfigMismatch

Mode = Literal["off_peak", "peak"]
ObjectiveKind = Literal["cost", "quality", "bi_objective"]

MODES: tuple[str, ...] = ("off_peak", "peak")
OBJECTIVES: tuple[str, ...] = ("cost", "quality", "bi_objective")
INITIAL_ACCUMULATION = 120.0    # seconds of demand on the platform before the first train

_MODEL_OBJECTIVE = {"1": "cost", "2": "quality", "3": "bi_objective"}
_MODEL_MODE = {"a": "off_peak", "b": "peak"}


@dataclass(frozen=True)
class ModelConfig:
    mode: Mode
    objective: ObjectiveKind
    k_up: int                           # potential upstream services
    k_dn: int                           # potential downstream services
    h_min: float                        # s
    h_max: float                        # s
    first_departure_up: float           # seconds-of-day
    first_departure_dn: float
    last_departure_up: float
    last_departure_dn: float
    capacity: float                     # passengers per train
    fleet: int                          # trains available
    max_skips: int = 0                  # skipped stations per service, peak only
    big_m: Optional[float] = None       # None -> derived from the horizon
    initial_accumulation: float = INITIAL_ACCUMULATION
    load_factor: float = 1.0            # used when service counts are derived

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigMismatch(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.objective not in OBJECTIVES:
            raise ConfigMismatch(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.k_up < 1 or self.k_dn < 1:
            raise ConfigMismatch("each direction needs at least one potential service")
        if not 0 < self.h_min <= self.h_max:
            raise ConfigMismatch(f"need 0 < h_min <= h_max, got {self.h_min}, {self.h_max}")
        if not self.first_departure_up < self.last_departure_up:
            raise ConfigMismatch("upstream first departure must precede the last-departure bound")
        if not self.first_departure_dn < self.last_departure_dn:
            raise ConfigMismatch("downstream first departure must precede the last-departure bound")
        if self.capacity <= 0:
            raise ConfigMismatch("train capacity must be positive")
        if self.fleet < 1:
            raise ConfigMismatch("fleet size must be at least 1")
        if self.max_skips < 0:
            raise ConfigMismatch("max_skips must be non-negative")
        if self.initial_accumulation < 0:
            raise ConfigMismatch("initial_accumulation must be non-negative")
        if not 0 < self.load_factor <= 1:
            raise ConfigMismatch("load_factor must lie in (0, 1]")

    @property
    def model_id(self) -> str:
        number = {v: k for k, v in _MODEL_OBJECTIVE.items()}[self.objective]
        letter = {v: k for k, v in _MODEL_MODE.items()}[self.mode]
        return f"{number}{letter}"

    @property
    def is_peak(self) -> bool:
        return self.mode == "peak"

    def first_departure(self, direction: str) -> float:
        return self.first_departure_up if direction == "up" else self.first_departure_dn

    def last_departure(self, direction: str) -> float:
        return self.last_departure_up if direction == "up" else self.last_departure_dn

    def services(self, direction: str) -> int:
        return self.k_up if direction == "up" else self.k_dn

    @classmethod
    def from_model_id(cls, model_id: str, **fields) -> "ModelConfig":
        """`ModelConfig.from_model_id("2b", k_up=6, ...)`."""
        key = model_id.strip().lower()
        if len(key) != 2 or key[0] not in _MODEL_OBJECTIVE or key[1] not in _MODEL_MODE:
            raise ConfigMismatch(f"unknown model {model_id!r}; expected one of 1a, 1b, 2a, 2b, 3a, 3b")
        return cls(mode=_MODEL_MODE[key[1]], objective=_MODEL_OBJECTIVE[key[0]], **fields)


MODEL_IDS: tuple[str, ...] = ("1a", "1b", "2a", "2b", "3a", "3b")

__all__ = ["ModelConfig", "MODEL_IDS", "MODES", "OBJECTIVES", "INITIAL_ACCUMULATION"]
