import dataclasses
import json

import numpy as np
import pytest

from lidartrack.config import (PipelineConfig, dump_kv, load_scenario, parse_kv, pipeline_config,
                               scenario_from_kv)
from lidartrack.errors import InvalidSpec
from lidartrack.io import read_jsonl, read_scans, scan_from_record, scan_to_record, write_scans
from lidartrack.sim import simulate, single_vehicle_scenario
from lidartrack.tracking import ModelKind


def test_parse_kv_basics():
    kv = parse_kv("# header\n tlinkage.tau = 0.2  # inline\n\ntrack.models=cv\n")
    assert kv == {"tlinkage.tau": "0.2", "track.models": "cv"}


@pytest.mark.parametrize("text, key", [
    ("tlinkage.tau 0.2", "line1"),
    ("a.b = 1\na.b = 2", "a.b"),
])
def test_parse_errors_name_the_line_or_key(text, key):
    with pytest.raises(InvalidSpec) as err:
        parse_kv(text)
    assert err.value.key == key


@pytest.mark.parametrize("kv, key", [
    ({"tlinkage.tau": "wide"}, "tlinkage.tau"),
    ({"tlinkage.bogus": "1"}, "tlinkage.bogus"),
    ({"nosuch.thing": "1"}, "nosuch.thing"),
    ({"track.models": "cv,kalman"}, "track.models"),
    ({"track.q_per_second": "maybe"}, "track.q_per_second"),
    ({"tau": "0.1"}, "tau"),
])
def test_pipeline_errors_name_the_key(kv, key):
    with pytest.raises(InvalidSpec) as err:
        pipeline_config(kv)
    assert err.value.key == key
    assert key in str(err.value) or key.startswith("line")


def test_pipeline_overrides_apply():
    cfg = pipeline_config({"tlinkage.tau": "0.2", "track.models": "cv", "segmentation.min_points": "7"})
    assert cfg.tlinkage.tau == 0.2
    assert cfg.track.model_kinds == (ModelKind.CV,)
    assert cfg.segmentation.min_points == 7


def test_config_round_trip():
    cfg = pipeline_config({"tlinkage.tau": "0.125", "assoc.eps": "5.5", "track.p_floor": "0.01"})
    assert pipeline_config(parse_kv(dump_kv(cfg))) == cfg
    assert pipeline_config(parse_kv(dump_kv(PipelineConfig()))) == PipelineConfig()


def test_scenario_from_keys():
    spec, seed = scenario_from_kv({
        "scenario.duration": "2.0", "scenario.seed": "4", "sensor.sigma": "0.0",
        "vehicle.0.motion": "cv", "vehicle.0.x": "-5", "vehicle.0.y": "8", "vehicle.0.vx": "2",
        "vehicle.1.x": "9", "vehicle.1.y": "-7",
    })
    assert seed == 4 and spec.duration == 2.0 and spec.sensor.sigma == 0.0
    assert [v.motion for v in spec.vehicles] == [ModelKind.CV, ModelKind.STATIONARY]
    assert spec.vehicles[0].vx == 2.0


def test_scenario_from_corpus(tmp_path):
    path = tmp_path / "s.cfg"
    path.write_text("scenario.corpus = single\nscenario.seed = 2\n")
    spec, seed = load_scenario(path)
    assert seed == 2 and spec == single_vehicle_scenario(2)


@pytest.mark.parametrize("kv, key", [
    ({"vehicle.0.bogus": "1"}, "vehicle.0.bogus"),
    ({"vehicle.0.motion": "hover"}, "vehicle.0.motion"),
    ({"vehicle.1.x": "1"}, "vehicle"),
    ({"scenario.corpus": "nowhere"}, "scenario.corpus"),
    ({"sensor.outlier_rate": "1.5"}, "sensor.outlier_rate"),
    ({"weather.rain": "1"}, "weather.rain"),
])
def test_scenario_errors_name_the_key(kv, key):
    with pytest.raises(InvalidSpec) as err:
        scenario_from_kv(kv)
    assert err.value.key == key


def test_scan_record_round_trip(tmp_path):
    scans, _ = simulate(dataclasses.replace(single_vehicle_scenario(0), duration=0.4), 0)
    path = tmp_path / "scans.jsonl"
    write_scans(path, scans)
    back = read_scans(path)
    assert len(back) == len(scans) == 5
    for a, b in zip(scans, back):
        assert a.frame_id == b.frame_id and a.timestamp == b.timestamp
        assert np.array_equal(a.xy, b.xy) and np.array_equal(a.labels, b.labels)
        assert np.array_equal(a.range, b.range) and np.array_equal(a.layer, b.layer)
    rec = json.loads(path.read_text().splitlines()[0])
    assert list(rec) == ["frame_id", "timestamp", "points", "labels"]
    assert list(rec["points"][0]) == ["x", "y", "layer", "range", "bearing"]


def test_empty_scan_record():
    scan = scan_from_record({"frame_id": 0, "timestamp": 0.0, "points": [], "labels": []})
    assert len(scan.xy) == 0
    assert scan_to_record(scan)["points"] == []


@pytest.mark.parametrize("rec", [
    {"frame_id": 0, "timestamp": 0.0},
    {"frame_id": 0, "timestamp": 0.0, "points": [{"x": 1.0}]},
    {"frame_id": 0, "timestamp": 0.0, "points": [{"x": 1, "y": 2, "layer": 0, "range": 2.2, "bearing": 1.1}],
     "labels": [0, 1]},
])
def test_malformed_scan_records(rec):
    with pytest.raises(ValueError):
        scan_from_record(rec)


def test_bad_json_line_reports_the_line(tmp_path):
    path = tmp_path / "x.jsonl"
    path.write_text('{"a": 1}\n{oops\n')
    with pytest.raises(ValueError, match="x.jsonl:2"):
        read_jsonl(path)
