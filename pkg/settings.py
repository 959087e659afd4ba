"""Runtime defaults for the solver, the sweep driver and logging.

Values are read from ``settings.ini`` next to this file so operators can change
solver budgets without touching Python. Every key has a built-in default below;
the INI only needs the keys it overrides. A handful of environment variables win
over both, which is how batch jobs shorten the four-hour solver budget:

* ``METRO_TT_TIME_LIMIT``  seconds per solve
* ``METRO_TT_LOG_LEVEL``   DEBUG, INFO, WARNING or ERROR
* ``METRO_TT_ENGINE``      ``branch_and_bound`` or ``highs``
"""

from __future__ import annotations

import os
from configparser import ConfigParser
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Optional

from errors import ConfigMismatch

_SETTINGS_FILE = Path(__file__).with_name("settings.ini")

_DEFAULT_SOLVER = {
    "time_limit": "14400",
    "absolute_gap": "0",
    "branching": "most_fractional",
    "node_limit": "",
    "workers": "1",
    "node_batch": "4",
    "engine": "branch_and_bound",
}

_DEFAULT_RUN = {
    "log_level": "INFO",
    "seed": "2023",
    "epsilon": "1",
}

_ENV_OVERRIDES = {
    "METRO_TT_TIME_LIMIT": "time_limit",
    "METRO_TT_LOG_LEVEL": "log_level",
    "METRO_TT_ENGINE": "engine",
}
ENV_VARS: tuple[str, ...] = tuple(_ENV_OVERRIDES)


@dataclass(frozen=True)
class Settings:
    time_limit: float
    absolute_gap: float
    branching: str
    node_limit: Optional[int]
    workers: int
    node_batch: int
    engine: str
    log_level: str
    seed: int
    epsilon: float


def _read_config(path: Path) -> ConfigParser:
    parser = ConfigParser(interpolation=None, strict=False)
    if path.exists():
        with path.open("r", encoding="utf-8") as handle:
            parser.read_file(handle)
    return parser


def _merge_section(parser: ConfigParser, section: str, defaults: Mapping[str, str]) -> dict[str, str]:
    values = dict(defaults)
    if parser.has_section(section):
        for key, value in parser.items(section):
            values[key] = value.strip()
    return values


def _number(raw: Mapping[str, str], key: str, kind=float):
    try:
        return kind(raw[key])
    except ValueError as exc:
        raise ConfigMismatch(f"setting {key!r} is not a valid {kind.__name__}: {raw[key]!r}") from exc


def load_settings(env: Optional[Mapping[str, str]] = None, path: Path = _SETTINGS_FILE) -> Settings:
    env = os.environ if env is None else env
    parser = _read_config(path)
    raw = _merge_section(parser, "solver", _DEFAULT_SOLVER)
    raw.update(_merge_section(parser, "run", _DEFAULT_RUN))
    for var, key in _ENV_OVERRIDES.items():
        if env.get(var):
            raw[key] = env[var].strip()

    node_limit = raw["node_limit"].strip()
    return Settings(
        time_limit=_number(raw, "time_limit"),
        absolute_gap=_number(raw, "absolute_gap"),
        branching=raw["branching"],
        node_limit=int(node_limit) if node_limit else None,
        workers=_number(raw, "workers", int),
        node_batch=_number(raw, "node_batch", int),
        engine=raw["engine"],
        log_level=raw["log_level"].upper(),
        seed=_number(raw, "seed", int),
        epsilon=_number(raw, "epsilon"),
    )


def with_overrides(settings: Settings, **changes) -> Settings:
    """Apply non-None command-line overrides."""
    return replace(settings, **{k: v for k, v in changes.items() if v is not None})


__all__ = ["ENV_VARS", "Settings", "load_settings", "with_overrides"]
