# processors/instance_loader.py
"""
Instance files: one JSON document describing the line, its demand, the model
configuration and, optionally, a fixed timetable to replay.

The document is validated with pydantic; the first failure is reported as a
SchemaError carrying a JSON pointer into the document (``/config/h_min``).
See docs/instance_schema.md for the field reference.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Literal, Optional, Union

import pandas as pd
from pydantic import AliasChoices, BaseModel, ConfigDict, Field, ValidationError, model_validator

from errors import ConfigMismatch, IoFailure, SchemaError
from formulation.config import INITIAL_ACCUMULATION, ModelConfig
from network.demand import ODMatrix, directional_total, from_counts, gravity, scale
from network.topology import (
    DwellPolicy,
    KinematicParams,
    LineTopology,
    Station,
    assign_dwell_times,
    dwell_groups,
    required_services,
    running_times_from_distances,
)
from processors.timetable import Timetable, timetable_from_frame

log = logging.getLogger(__name__)

PathLike = Union[str, Path]


# ---------- document model ----------

class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Kinematics(_Block):
    v_max: float = Field(gt=0)
    v_acc: float = Field(gt=0)
    v_dec: float = Field(gt=0)


class Running(_Block):
    """Either distances with kinematics, or explicit running-time components."""
    distances: Optional[list[float]] = None
    kinematics: Optional[Kinematics] = None
    pure_run_time: Optional[Union[float, list[float]]] = None
    accel_penalty: float = Field(default=0.0, ge=0)
    decel_penalty: float = Field(default=0.0, ge=0)

    @model_validator(mode="after")
    def _one_source(self) -> "Running":
        by_distance = self.distances is not None or self.kinematics is not None
        if by_distance and self.pure_run_time is not None:
            raise ValueError("give distances with kinematics, or pure_run_time, not both")
        if by_distance and (self.distances is None or self.kinematics is None):
            raise ValueError("distances and kinematics go together")
        if not by_distance and self.pure_run_time is None:
            raise ValueError("running times need distances with kinematics, or pure_run_time")
        return self


class Dwell(_Block):
    """Either explicit dwell times, or a crowdedness policy applied to the demand."""
    times: Optional[Union[float, list[float]]] = None
    thresholds: Optional[list[float]] = None
    group_dwell: Optional[list[float]] = None

    @model_validator(mode="after")
    def _one_source(self) -> "Dwell":
        policy = self.thresholds is not None or self.group_dwell is not None
        if policy == (self.times is not None):
            raise ValueError("give either times or thresholds with group_dwell")
        if policy and (self.thresholds is None or self.group_dwell is None):
            raise ValueError("thresholds and group_dwell go together")
        return self


class TopologyBlock(_Block):
    stations_per_direction: int = Field(ge=4)
    turnarounds: list[int] = Field(min_length=4, max_length=4)   # upstream, terminals included
    running: Running
    dwell: Dwell
    min_turnaround: float = Field(gt=0)


class DemandBlock(_Block):
    kind: Literal["rate", "count", "gravity"] = Field(validation_alias=AliasChoices("kind", "demand_kind"))
    horizon: tuple[float, float]
    pairs: list[tuple[int, int, float]] = Field(default_factory=list)
    arrival: Literal["fluid", "lump"] = "fluid"
    directional_total: Optional[float] = Field(default=None, ge=0)   # gravity only
    seed: int = 2023
    uplift: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def _source(self) -> "DemandBlock":
        if self.kind == "gravity" and self.directional_total is None:
            raise ValueError("gravity demand needs directional_total")
        if self.kind != "gravity" and self.directional_total is not None:
            raise ValueError("directional_total only applies to gravity demand")
        return self


class PerDirection(_Block):
    up: float
    down: float


class ConfigBlock(_Block):
    model: Literal["1a", "1b", "2a", "2b", "3a", "3b"] = "1a"
    k_up: Union[int, Literal["auto"]] = "auto"
    k_dn: Union[int, Literal["auto"]] = "auto"
    h_min: float = Field(gt=0)
    h_max: float = Field(gt=0)
    first_departure: PerDirection
    last_departure: PerDirection
    capacity: float = Field(gt=0)
    load_factor: float = Field(default=1.0, gt=0, le=1)
    fleet: int = Field(ge=1)
    max_skips: int = Field(default=0, ge=0)
    epsilon: float = Field(default=1.0, gt=0)
    big_m: Optional[float] = Field(default=None, gt=0)
    initial_accumulation: float = Field(default=INITIAL_ACCUMULATION, ge=0)


class TimetableEntry(_Block):
    service: int = Field(ge=1)
    station: int = Field(ge=1)
    arrival: float
    departure: float
    stops: bool = True
    zone: Optional[str] = Field(default=None, pattern=r"^\d+-\d+$")    # "m-n"


class InstanceFile(_Block):
    name: str
    description: str = ""
    topology: TopologyBlock
    demand: DemandBlock
    config: ConfigBlock
    timetable: Optional[list[TimetableEntry]] = None

    @model_validator(mode="before")
    @classmethod
    def _lift_demand_kind(cls, data: Any) -> Any:
        # a top-level "demand_kind" flag sets demand.kind
        if isinstance(data, dict) and "demand_kind" in data:
            data = dict(data)
            flag = data.pop("demand_kind")
            if isinstance(data.get("demand"), dict):
                data["demand"] = {**{k: v for k, v in data["demand"].items() if k != "demand_kind"}, "kind": flag}
        return data


def instance_schema() -> dict[str, Any]:
    """The JSON Schema published in docs/instance_schema.md."""
    return InstanceFile.model_json_schema()


# ---------- loaded form ----------

@dataclass(frozen=True)
class LoadedInstance:
    name: str
    topo: LineTopology
    od: ODMatrix
    cfg: ModelConfig
    epsilon: float
    timetable: Optional[Timetable]
    digest: str                         # sha256 of the canonical document
    document: InstanceFile

    def with_model(self, model_id: str) -> "LoadedInstance":
        """Same line, demand and parameters under another of the six models."""
        cfg = ModelConfig.from_model_id(model_id, **_config_fields(self.cfg))
        return replace(self, cfg=cfg)


def _config_fields(cfg: ModelConfig) -> dict[str, Any]:
    fields = asdict(cfg)
    fields.pop("mode")
    fields.pop("objective")
    return fields


def _pointer(loc: tuple[Any, ...]) -> str:
    return "/" + "/".join(str(part) for part in loc)


def parse_document(data: Any) -> InstanceFile:
    try:
        return InstanceFile.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise SchemaError(_pointer(first["loc"]), first["msg"]) from exc


def _build_od(block: DemandBlock, n: int, seed: Optional[int]) -> ODMatrix:
    horizon = (float(block.horizon[0]), float(block.horizon[1]))
    if block.kind == "gravity":
        od = gravity(n, block.directional_total or 0.0, horizon, seed if seed is not None else block.seed)
        od = replace(od, arrival=block.arrival)
    elif block.kind == "count":
        od = from_counts(n, {(i, j): v for i, j, v in block.pairs}, horizon, block.arrival)
    else:
        od = ODMatrix(n, {(i, j): v for i, j, v in block.pairs}, horizon, block.arrival)
    return scale(od, block.uplift) if block.uplift != 1.0 else od


def _build_topology(block: TopologyBlock, od: ODMatrix) -> LineTopology:
    n = block.stations_per_direction
    turns = sorted(block.turnarounds)
    if turns[0] != 1 or turns[-1] != n or len(set(turns)) != 4:
        raise SchemaError("/topology/turnarounds", f"need four distinct stations including 1 and {n}")

    running = block.running
    if running.distances is not None:
        if len(running.distances) != n - 1:
            raise SchemaError("/topology/running/distances", f"need {n - 1} entries")
        k = KinematicParams(running.kinematics.v_max, running.kinematics.v_acc, running.kinematics.v_dec)
        accel, decel = k.accel_penalty, k.decel_penalty
        pure: Union[float, list[float]] = [
            r - accel - decel for r in running_times_from_distances(running.distances, k)
        ]
    else:
        accel, decel = running.accel_penalty, running.decel_penalty
        pure = running.pure_run_time
        if isinstance(pure, list) and len(pure) != n - 1:
            raise SchemaError("/topology/running/pure_run_time", f"need {n - 1} entries")

    dwell = block.dwell
    if dwell.times is not None:
        if isinstance(dwell.times, list) and len(dwell.times) != n:
            raise SchemaError("/topology/dwell/times", f"need {n} entries")
        return LineTopology.build(n, (turns[1], turns[2]), pure, accel, decel, dwell.times, block.min_turnaround)

    policy = DwellPolicy(tuple(dwell.thresholds), tuple(dwell.group_dwell))
    topo = LineTopology.build(n, (turns[1], turns[2]), pure, accel, decel, 0.0, block.min_turnaround)
    groups = dwell_groups(od, policy)
    stations = tuple(Station(s.index, s.is_turnaround, groups[s.index]) for s in topo.stations)
    return replace(topo, stations=stations, dwell_time=assign_dwell_times(od, policy))


def _service_count(value: Union[int, str], od: ODMatrix, direction: str, block: ConfigBlock) -> int:
    if value != "auto":
        return int(value)
    needed = required_services(directional_total(od, direction), block.capacity, block.load_factor)
    log.debug("auto service count (%s): %d", direction, needed)
    return max(1, needed)


def _build_config(block: ConfigBlock, od: ODMatrix) -> ModelConfig:
    return ModelConfig.from_model_id(
        block.model,
        k_up=_service_count(block.k_up, od, "up", block),
        k_dn=_service_count(block.k_dn, od, "down", block),
        h_min=block.h_min,
        h_max=block.h_max,
        first_departure_up=block.first_departure.up,
        first_departure_dn=block.first_departure.down,
        last_departure_up=block.last_departure.up,
        last_departure_dn=block.last_departure.down,
        capacity=block.capacity,
        fleet=block.fleet,
        max_skips=block.max_skips,
        big_m=block.big_m,
        initial_accumulation=block.initial_accumulation,
        load_factor=block.load_factor,
    )


def _build_timetable(entries: list[TimetableEntry], n: int) -> Timetable:
    df = pd.DataFrame([e.model_dump() for e in entries])
    return timetable_from_frame(df, n)


def canonical_text(doc: InstanceFile) -> str:
    return json.dumps(doc.model_dump(mode="json", exclude_none=True), indent=2, sort_keys=True) + "\n"


def build_instance(doc: InstanceFile, seed: Optional[int] = None) -> LoadedInstance:
    """Turn a validated document into model inputs. `seed` overrides a gravity demand seed."""
    n = doc.topology.stations_per_direction
    try:
        od = _build_od(doc.demand, n, seed)
        topo = _build_topology(doc.topology, od)
        cfg = _build_config(doc.config, od)
    except ConfigMismatch as exc:
        raise SchemaError("/", str(exc)) from exc
    timetable = _build_timetable(doc.timetable, n) if doc.timetable else None
    digest = hashlib.sha256(canonical_text(doc).encode("utf-8")).hexdigest()
    log.info("loaded instance %s: N=%d, K=%d/%d, model %s", doc.name, n, cfg.k_up, cfg.k_dn, cfg.model_id)
    return LoadedInstance(doc.name, topo, od, cfg, doc.config.epsilon, timetable, digest, doc)


def load_instance(path: PathLike, seed: Optional[int] = None) -> LoadedInstance:
    src = Path(path)
    try:
        text = src.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(src), exc.strerror or str(exc)) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("/", f"not valid JSON (line {exc.lineno}): {exc.msg}") from exc
    return build_instance(parse_document(data), seed)


def write_instance(doc: InstanceFile, path: PathLike) -> Path:
    out = Path(path)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(canonical_text(doc), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(out), exc.strerror or str(exc)) from exc
    return out


__all__ = [
    "InstanceFile",
    "LoadedInstance",
    "instance_schema",
    "parse_document",
    "build_instance",
    "load_instance",
    "write_instance",
    "canonical_text",
]
