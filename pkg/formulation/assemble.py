# formulation/assemble.py
from __future__ import annotations

import logging
from typing import Optional

import pandas as pd

from errors import ConfigMismatch
from formulation.catalog import VariableCatalog
from formulation.config import ModelConfig
from formulation.constraints import (
    build_headway_constraints,
    build_rollingstock_constraints,
    build_skipstop_constraints,
    build_timetable_constraints,
    build_turnaround_constraints,
    build_zone_constraints,
)
from formulation.milp import FAMILY_TAGS, InstanceBuilder, MilpInstance
from formulation.objectives import COST, QUALITY, build_objective_cost, build_objective_quality
from formulation.passenger_flow import build_demand_constraints
from network.demand import ODMatrix
from network.topology import LineTopology

log = logging.getLogger(__name__)


def _check_big_m(cfg: ModelConfig, cat: VariableCatalog) -> None:
    if cfg.big_m is None:
        return
    # the turnaround rows reach one minimum turnaround past the timetable span
    needed = cat.default_big_m()
    if cfg.big_m < needed:
        raise ConfigMismatch(
            f"big_M {cfg.big_m:g} is below the timetable span plus the longest minimum turnaround ({needed:g})"
        )


def build_model(
    cfg: ModelConfig,
    topo: LineTopology,
    od: ODMatrix,
    name: Optional[str] = None,
) -> tuple[VariableCatalog, MilpInstance]:
    """Catalog and instance together; the catalog maps solutions back to timetables."""
    cat = VariableCatalog(cfg, topo, od)
    _check_big_m(cfg, cat)

    builder = InstanceBuilder(name or f"model-{cfg.model_id}")
    for v in cat.variables:
        builder.add_variable(v.name, v.kind, v.lower, v.upper)

    builder.extend(build_zone_constraints(cfg, topo, cat))
    builder.extend(build_timetable_constraints(cfg, topo, cat))
    builder.extend(build_headway_constraints(cfg, cat))
    builder.extend(build_turnaround_constraints(cfg, topo, cat))
    builder.extend(build_rollingstock_constraints(cfg, topo, cat))
    builder.extend(build_demand_constraints(cfg, od, cat))
    if cfg.is_peak:
        builder.extend(build_skipstop_constraints(cfg, cat))

    cost = build_objective_cost(cat)
    objectives = {COST: cost}
    if cat.include_quality:
        quality, link_rows = build_objective_quality(cat, cfg)
        builder.extend(link_rows)
        objectives[QUALITY] = quality
    active = objectives[QUALITY] if cfg.objective == "quality" else cost

    metadata = {
        "model_id": cfg.model_id,
        "mode": cfg.mode,
        "objective_kind": cfg.objective,
        "stations_per_direction": topo.n,
        "k_up": cfg.k_up,
        "k_dn": cfg.k_dn,
        "capacity": cfg.capacity,
        "fleet": cfg.fleet,
    }
    instance = builder.build(active, objectives, metadata)
    log.info(
        "assembled %s: %d variables (%d binary), %d rows",
        instance.name, len(instance.variables), len(instance.binaries()), len(instance.rows),
    )
    return cat, instance


def assemble(cfg: ModelConfig, topo: LineTopology, od: ODMatrix, name: Optional[str] = None) -> MilpInstance:
    return build_model(cfg, topo, od, name)[1]


def describe(instance: MilpInstance) -> pd.DataFrame:
    """Row counts per constraint family and variable counts per kind."""
    counts = instance.tag_counts()
    records = [{"section": "rows", "name": tag, "count": counts.get(tag, 0)} for tag in FAMILY_TAGS]
    records += [
        {"section": "rows", "name": tag, "count": n} for tag, n in sorted(counts.items()) if tag not in FAMILY_TAGS
    ]
    binaries = len(instance.binaries())
    records.append({"section": "variables", "name": "binary", "count": binaries})
    records.append({"section": "variables", "name": "continuous", "count": len(instance.variables) - binaries})
    records.append({"section": "objective", "name": f"{instance.objective.sense} {instance.objective.name}",
                    "count": len(instance.objective.coefs)})
    return pd.DataFrame(records, columns=["section", "name", "count"])


__all__ = ["assemble", "build_model", "describe"]
