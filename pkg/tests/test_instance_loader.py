from __future__ import annotations

import copy
import json

import pytest

from errors import IoFailure, SchemaError
from processors.fixtures import generate_fixture
from processors.instance_loader import (
    build_instance,
    canonical_text,
    instance_schema,
    load_instance,
    parse_document,
    write_instance,
)


@pytest.fixture
def tiny8_doc() -> dict:
    return generate_fixture("tiny8").model_dump(mode="json", exclude_none=True)


def _broken(doc: dict, path: list, value) -> dict:
    out = copy.deepcopy(doc)
    node = out
    for key in path[:-1]:
        node = node[key]
    node[path[-1]] = value
    return out


@pytest.mark.parametrize(
    ("path", "value", "pointer"),
    [
        (["config", "h_min"], -5.0, "/config/h_min"),
        (["config", "model"], "4c", "/config/model"),
        (["topology", "stations_per_direction"], 3, "/topology/stations_per_direction"),
        (["demand", "kind"], "survey", "/demand/kind"),
        (["config", "colour"], "red", "/config/colour"),
    ],
)
def test_first_failure_carries_a_pointer(tiny8_doc, path, value, pointer) -> None:
    with pytest.raises(SchemaError) as err:
        parse_document(_broken(tiny8_doc, path, value))
    assert err.value.pointer == pointer


def test_running_needs_exactly_one_source(tiny8_doc) -> None:
    doc = _broken(tiny8_doc, ["topology", "running", "distances"], [1000.0] * 7)
    with pytest.raises(SchemaError) as err:
        parse_document(doc)
    assert err.value.pointer == "/topology/running"


def test_dwell_needs_exactly_one_source(tiny8_doc) -> None:
    doc = _broken(tiny8_doc, ["topology", "dwell", "thresholds"], [100.0])
    with pytest.raises(SchemaError) as err:
        parse_document(doc)
    assert err.value.pointer == "/topology/dwell"


def test_gravity_needs_a_total(tiny8_doc) -> None:
    doc = _broken(tiny8_doc, ["demand", "kind"], "gravity")
    with pytest.raises(SchemaError, match="directional_total"):
        parse_document(doc)



def test_demand_kind_flag(tiny8_doc) -> None:
    nested = copy.deepcopy(tiny8_doc)
    nested["demand"]["demand_kind"] = nested["demand"].pop("kind")
    top = copy.deepcopy(tiny8_doc)
    top["demand_kind"] = top["demand"].pop("kind")
    expected = build_instance(parse_document(tiny8_doc)).digest
    for doc in (nested, top):
        parsed = parse_document(doc)
        assert parsed.demand.kind == tiny8_doc["demand"]["kind"]
        assert '"demand_kind"' not in canonical_text(parsed)
        assert build_instance(parsed).digest == expected


def test_demand_kind_flag_is_validated(tiny8_doc) -> None:
    doc = copy.deepcopy(tiny8_doc)
    doc["demand_kind"] = "survey"
    with pytest.raises(SchemaError) as err:
        parse_document(doc)
    assert err.value.pointer == "/demand/kind"


@pytest.mark.parametrize(
    ("path", "value", "pointer"),
    [
        (["topology", "turnarounds"], [1, 3, 3, 8], "/topology/turnarounds"),
        (["topology", "turnarounds"], [2, 3, 6, 8], "/topology/turnarounds"),
        (["topology", "running", "pure_run_time"], [60.0, 60.0], "/topology/running/pure_run_time"),
        (["topology", "dwell", "times"], [20.0] * 3, "/topology/dwell/times"),
    ],
)
def test_line_shape_checks(tiny8_doc, path, value, pointer) -> None:
    with pytest.raises(SchemaError) as err:
        build_instance(parse_document(_broken(tiny8_doc, path, value)))
    assert err.value.pointer == pointer


def test_inconsistent_config_is_a_schema_error(tiny8_doc) -> None:
    doc = _broken(tiny8_doc, ["config", "h_max"], 30.0)
    with pytest.raises(SchemaError) as err:
        build_instance(parse_document(doc))
    assert err.value.pointer == "/"


def test_tiny8_line(tiny8_doc) -> None:
    loaded = build_instance(parse_document(tiny8_doc))
    assert loaded.topo.n == 8
    assert loaded.topo.turnarounds("down") == (9, 11, 14, 16)
    assert loaded.topo.full_run_time(2) == 80.0
    assert loaded.cfg.model_id == "1a"
    assert loaded.od.passengers(3, 6) == pytest.approx(45.0)
    assert loaded.timetable is None


def test_auto_service_counts() -> None:
    loaded = build_instance(generate_fixture("santiago16"))
    # 1100 passengers per direction, 250 seats at 80 %
    assert (loaded.cfg.k_up, loaded.cfg.k_dn) == (6, 6)


def test_dwell_policy_follows_demand() -> None:
    loaded = build_instance(generate_fixture("santiago16"))
    assert set(loaded.topo.dwell_time.values()) <= {20.0, 30.0, 40.0}
    assert all(s.dwell_group in (0, 1, 2) for s in loaded.topo.stations)


def test_with_model_keeps_the_parameters(tiny8_doc) -> None:
    loaded = build_instance(parse_document(tiny8_doc))
    peak = loaded.with_model("3b")
    assert peak.cfg.model_id == "3b" and peak.cfg.is_peak
    assert peak.cfg.fleet == loaded.cfg.fleet and peak.cfg.max_skips == loaded.cfg.max_skips
    assert peak.digest == loaded.digest


def test_file_round_trip(tmp_path, tiny8_doc) -> None:
    doc = parse_document(tiny8_doc)
    path = write_instance(doc, tmp_path / "inst" / "tiny8.json")
    assert path.read_text(encoding="utf-8") == canonical_text(doc)
    again = load_instance(path)
    assert again.digest == build_instance(doc).digest
    assert canonical_text(again.document) == canonical_text(doc)


def test_embedded_timetable() -> None:
    loaded = build_instance(generate_fixture("fig5-skip"))
    tt = loaded.timetable
    assert [s.service for s in tt.selected()] == [1, 2]
    assert tt.service(1).skipped == [1]
    assert tt.service(2).zone == (1, 4)


def test_bad_files(tmp_path) -> None:
    with pytest.raises(IoFailure):
        load_instance(tmp_path / "absent.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{ not json", encoding="utf-8")
    with pytest.raises(SchemaError) as err:
        load_instance(broken)
    assert err.value.pointer == "/"


def test_published_schema() -> None:
    schema = instance_schema()
    assert set(schema["required"]) == {"name", "topology", "demand", "config"}
    json.dumps(schema)
