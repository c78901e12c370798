import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lidartrack.errors import AlignmentError
from lidartrack.evaluation import (TABLE2_HEADER, TABLE3_HEADER, TABLE4_HEADER, evaluate,
                                   heading_error_distribution, heading_error_stats, id_consistency,
                                   id_coverage, trajectory_error_stats, wrap_heading_error_deg)
from lidartrack.sim import footprint


def make_gt(n_frames=20, vehicles=((0, 10.0, 5.0, 0.3, "stationary"), (1, -8.0, -6.0, -0.2, "cv"))):
    frames = []
    for f in range(n_frames):
        vs = []
        for vid, x, y, theta, motion in vehicles:
            x_t = x + (0.25 * f if motion != "stationary" else 0.0)
            c = footprint(x_t, y, theta, 4.5, 1.8)
            vs.append({"id": vid, "x": x_t, "y": y, "theta": theta, "motion": motion,
                       "corners": c.tolist(),
                       "nearest_corner": c[np.argmin((c ** 2).sum(1))].tolist(),
                       "observed": True})
        frames.append({"frame_id": f, "timestamp": f * 0.08, "vehicles": vs})
    return frames


def make_results(gt, heading_offset_deg=0.0, corner_offset=(0.0, 0.0), track_id=lambda f, v: v):
    results = []
    for frame in gt:
        dets, assigns, tracks = [], [], []
        for k, v in enumerate(frame["vehicles"]):
            h = v["theta"] + math.radians(heading_offset_deg)
            dets.append({"index": k, "n_points": 40, "heading": h, "gt_object": v["id"],
                         "candidates": {m: {"heading": h} for m in ("area", "closeness", "variance", "tlinkage")}})
            tid = track_id(frame["frame_id"], v["id"])
            assigns.append({"track_id": tid, "detection": k})
            tracks.append({"id": tid, "lifecycle": "confirmed", "detection": k,
                           "corner": (np.asarray(v["nearest_corner"]) + corner_offset).tolist()})
        results.append({"frame_id": frame["frame_id"], "detections": dets, "assignments": assigns,
                        "tracks": tracks})
    return results


def test_wrap_examples():
    assert wrap_heading_error_deg(0.0) == 0.0
    assert wrap_heading_error_deg(45.0) == 45.0
    assert wrap_heading_error_deg(-45.0) == 45.0
    assert wrap_heading_error_deg(89.0) == pytest.approx(-1.0)
    assert wrap_heading_error_deg(-91.0) == pytest.approx(-1.0)
    assert wrap_heading_error_deg(180.0) == pytest.approx(0.0)


@settings(max_examples=300, deadline=None)
@given(st.floats(-1e4, 1e4))
def test_wrap_laws(e):
    w = float(wrap_heading_error_deg(e))
    assert -45.0 < w <= 45.0
    assert float(wrap_heading_error_deg(w)) == pytest.approx(w, abs=1e-9)
    # quarter-turn periodic; rounding at the +-45 seam may land on the other end
    d = abs(float(wrap_heading_error_deg(e + 90.0)) - w)
    assert min(d, abs(d - 90.0)) < 1e-6


def test_perfect_estimates_give_zero_tables():
    gt = make_gt()
    res = make_results(gt)
    stats = heading_error_stats(res, gt)
    for s in stats.values():
        assert s["signed_mean"] == pytest.approx(0.0, abs=1e-6)
        assert s["abs_std"] == pytest.approx(0.0, abs=1e-6)
        assert s["n"] == 40
    for t in trajectory_error_stats(res, gt).values():
        assert t["x_mean"] == t["y_mean"] == t["x_std"] == t["y_std"] == 0.0


def test_sign_cancellation():
    gt = make_gt(n_frames=2, vehicles=((0, 10.0, 5.0, 0.0, "stationary"),))
    res = make_results(gt)
    res[0]["detections"][0]["heading"] = math.radians(1.0)
    res[1]["detections"][0]["heading"] = math.radians(-1.0)
    best = heading_error_stats(res, gt)["best"]
    assert best["signed_mean"] == pytest.approx(0.0, abs=1e-9)
    assert best["abs_mean"] == pytest.approx(1.0)
    assert best["abs_std"] == pytest.approx(0.0, abs=1e-9)


def test_heading_offset_is_reported():
    gt = make_gt()
    best = heading_error_stats(make_results(gt, heading_offset_deg=2.5), gt)["best"]
    assert best["signed_mean"] == pytest.approx(2.5, abs=1e-6)


def test_distribution_examples():
    assert heading_error_distribution([0.0, 0.0]) == {t: 1.0 for t in range(6)}
    d = heading_error_distribution([0.5, 1.5, 2.5, 6.0])
    assert (d[0], d[1], d[2], d[3], d[4], d[5]) == (0.0, 0.25, 0.5, 0.75, 0.75, 0.75)
    with pytest.raises(ValueError):
        heading_error_distribution([])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 20), min_size=1, max_size=50), st.randoms(use_true_random=False))
def test_distribution_monotone_and_order_free(errors, rnd):
    d = heading_error_distribution(errors)
    values = [d[t] for t in sorted(d)]
    assert values == sorted(values)
    shuffled = list(errors)
    rnd.shuffle(shuffled)
    assert heading_error_distribution(shuffled) == d


def test_constant_corner_offset():
    gt = make_gt()
    stats = trajectory_error_stats(make_results(gt, corner_offset=(0.1, 0.2)), gt)
    for state in ("stationary", "moving"):
        assert stats[state]["x_mean"] == pytest.approx(0.1)
        assert stats[state]["y_mean"] == pytest.approx(0.2)
        assert stats[state]["x_std"] == pytest.approx(0.0, abs=1e-12)
        assert stats[state]["n"] == 20


def test_single_clean_track_is_consistent():
    gt = make_gt()
    assert id_consistency(make_results(gt), gt) == 1.0


def test_id_switch_at_midpoint():
    gt = make_gt(vehicles=((0, 10.0, 5.0, 0.3, "stationary"),))
    res = make_results(gt, track_id=lambda f, v: 0 if f < 10 else 7)
    assert id_coverage(res, gt) == {0: 0.5}
    assert id_consistency(res, gt) == 0.0


def test_unknown_vehicle_raises():
    gt = make_gt()
    res = make_results(gt)
    res[3]["detections"][0]["gt_object"] = 99
    with pytest.raises(AlignmentError):
        heading_error_stats(res, gt)


def test_frame_without_truth_raises():
    gt = make_gt()
    res = make_results(gt)
    res[0]["frame_id"] = 500
    with pytest.raises(AlignmentError):
        trajectory_error_stats(res, gt)


def test_evaluate_writes_tables(tmp_path):
    gt = make_gt()
    out = evaluate({"mma": make_results(gt), "cv": make_results(gt, corner_offset=(0.1, 0.0))}, gt, tmp_path)
    with open(tmp_path / "table2.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == TABLE2_HEADER and len(rows) == 6
    with open(tmp_path / "table3.csv") as fh:
        assert next(csv.reader(fh)) == TABLE3_HEADER
    with open(tmp_path / "table4.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == TABLE4_HEADER and [r[0] for r in rows[1:]] == ["mma", "mma", "cv", "cv"]
    assert out["trajectory"]["cv"]["moving"]["x_mean"] == pytest.approx(0.1)
    lines = (tmp_path / "plot_data.jsonl").read_text().splitlines()
    assert {json.loads(line)["series"] for line in lines} == {"heading", "trajectory"}
