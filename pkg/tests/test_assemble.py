from __future__ import annotations

from dataclasses import replace

import pytest

from errors import ConfigMismatch
from formulation.assemble import assemble, build_model, describe
from formulation.milp import FAMILY_TAGS


def test_cost_model_shape(tiny8) -> None:
    cat, inst = build_model(tiny8.cfg, tiny8.topo, tiny8.od, "tiny8-1a")
    assert inst.name == "tiny8-1a"
    assert len(inst.binaries()) == 116
    assert inst.objective.name == "cost" and inst.objective.sense == "max"
    assert set(inst.objectives) == {"cost"}
    counts = inst.tag_counts()
    assert counts["objective_link"] == 0
    assert counts["skip_stop"] == 0
    assert counts["zone"] > 0 and counts["demand"] > 0
    assert inst.metadata["model_id"] == "1a"
    assert len(inst.variables) == len(cat.variables)


def test_peak_models_add_skip_limits(tiny8) -> None:
    off = assemble(tiny8.with_model("2a").cfg, tiny8.topo, tiny8.od)
    peak = assemble(tiny8.with_model("2b").cfg, tiny8.topo, tiny8.od)
    assert off.tag_counts()["skip_stop"] == 0
    assert peak.tag_counts()["skip_stop"] == 4
    # served-zone rows only tie stops to zones off-peak
    assert any(r.name.startswith("serve_zone") for r in off.rows)
    assert not any(r.name.startswith("serve_zone") for r in peak.rows)


def test_quality_model_links_products(tiny8) -> None:
    inst = assemble(tiny8.with_model("2a").cfg, tiny8.topo, tiny8.od)
    assert inst.objective.name == "quality" and inst.objective.sense == "min"
    # three rows per zone for each service with a predecessor
    assert inst.tag_counts()["objective_link"] == 3 * 4 * 2


def test_bi_objective_carries_both(tiny8) -> None:
    two = assemble(tiny8.with_model("2a").cfg, tiny8.topo, tiny8.od)
    three = assemble(tiny8.with_model("3a").cfg, tiny8.topo, tiny8.od)
    assert set(three.objectives) == {"cost", "quality"}
    assert three.objective.name == "cost"
    assert [r.name for r in three.rows] == [r.name for r in two.rows]
    assert three.with_objective("quality").objective == two.objective


def test_describe(tiny8) -> None:
    inst = assemble(tiny8.cfg, tiny8.topo, tiny8.od)
    df = describe(inst)
    assert list(df.columns) == ["section", "name", "count"]
    rows = df[df["section"] == "rows"]
    assert list(rows["name"])[: len(FAMILY_TAGS)] == list(FAMILY_TAGS)
    assert rows["count"].sum() == len(inst.rows)
    variables = df[df["section"] == "variables"].set_index("name")["count"]
    assert variables["binary"] == 116
    assert variables.sum() == len(inst.variables)
    assert df.iloc[-1]["name"] == "max cost"


def test_small_big_m_is_rejected(tiny8) -> None:
    cfg = replace(tiny8.cfg, big_m=500.0)
    with pytest.raises(ConfigMismatch, match="big_M"):
        build_model(cfg, tiny8.topo, tiny8.od)


def test_wide_enough_big_m_is_accepted(tiny8) -> None:
    cfg = replace(tiny8.cfg, big_m=5000.0)
    inst = assemble(cfg, tiny8.topo, tiny8.od)
    assert len(inst.rows) == len(assemble(tiny8.cfg, tiny8.topo, tiny8.od).rows)


def test_big_m_must_cover_the_turnaround(tiny8) -> None:
    # span 1320 + 20 alone leaves the reversal rows binding when y = 0
    with pytest.raises(ConfigMismatch, match="turnaround"):
        build_model(replace(tiny8.cfg, big_m=1340.0), tiny8.topo, tiny8.od)
    cat, _ = build_model(replace(tiny8.cfg, big_m=1400.0), tiny8.topo, tiny8.od)
    assert cat.default_big_m() == pytest.approx(1400.0)


def test_accepted_big_m_keeps_turnaround_rows_slack(tiny8) -> None:
    cat, inst = build_model(replace(tiny8.cfg, big_m=1400.0), tiny8.topo, tiny8.od)
    rows = [r for r in inst.rows if r.name.startswith("turn_time")]
    assert rows
    for row in rows:
        # with y = 0 the row holds even at the most adverse time bounds
        values = {}
        for name, coef in row.coefs:
            var = cat.variable(name)
            if var.is_binary:
                values[name] = 0.0
            else:
                values[name] = var.lower if coef > 0 else var.upper
        assert row.violation(values) <= 1e-6, row.name
