"""
Evaluation of pipeline results against simulator ground truth.

Everything here works on the JSON records written by the pipeline and the
simulator (see ``lidartrack.io``), so files and in-memory runs are scored the
same way. Statistics are population statistics (divide by n).
"""

from __future__ import annotations

import csv
import math
from collections import Counter, defaultdict
from pathlib import Path

import numpy as np

from .errors import AlignmentError
from .io import write_jsonl

HEADING_METHODS = ("area", "closeness", "variance", "tlinkage", "best")
THRESHOLDS_DEG = (0, 1, 2, 3, 4, 5)
ZERO_TOL_DEG = 1e-9
ID_COVERAGE = 0.9

TABLE2_HEADER = ["method", "signed_mean_deg", "signed_std_deg", "abs_mean_deg", "abs_std_deg", "n"]
TABLE3_HEADER = ["method", "eq0_pct", "le1_pct", "le2_pct", "le3_pct", "le4_pct", "le5_pct", "n"]
TABLE4_HEADER = ["method", "state", "x_mean_m", "x_std_m", "y_mean_m", "y_std_m", "n"]
ID_HEADER = ["method", "vehicles", "consistent", "fraction"]


def wrap_heading_error_deg(err):
    """
    Representative of a heading difference in (-45, 45] degrees.

    Box headings are only defined up to quarter turns, so +89 and -91 (and -1)
    land on the same value.
    """
    err = np.asarray(err, dtype=float)
    return err - 90.0 * np.ceil((err - 45.0) / 90.0)


def _truth_index(gt) -> dict[int, dict[int, dict]]:
    return {int(f["frame_id"]): {int(v["id"]): v for v in f["vehicles"]} for f in gt}


def _stats(values) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        return math.nan, math.nan
    return float(values.mean()), float(values.std())


# ---------------------------------------------------------------------------
# heading

def heading_errors(results, gt) -> tuple[dict[str, np.ndarray], list[dict]]:
    """
    Signed wrapped heading errors (degrees) per method, plus a per-frame series.

    Each labelled ground-truth vehicle contributes at most one detection per
    frame: the one with the most points. Detections without a label (clutter)
    are ignored.
    """
    truth = _truth_index(gt)
    errors: dict[str, list[float]] = {m: [] for m in HEADING_METHODS}
    series = []
    for frame in results:
        fid = int(frame["frame_id"])
        chosen: dict[int, dict] = {}
        for det in frame["detections"]:
            obj = det.get("gt_object")
            if obj is None:
                continue
            if fid not in truth or obj not in truth[fid]:
                raise AlignmentError(f"detection in frame {fid} refers to vehicle {obj} absent from ground truth")
            if obj not in chosen or det["n_points"] > chosen[obj]["n_points"]:
                chosen[obj] = det
        for obj in sorted(chosen):
            det = chosen[obj]
            theta_g = math.degrees(truth[fid][obj]["theta"])
            for method in HEADING_METHODS:
                est = det["heading"] if method == "best" else det["candidates"][method]["heading"]
                e = float(wrap_heading_error_deg(math.degrees(est) - theta_g))
                errors[method].append(e)
                series.append({"series": "heading", "method": method, "frame_id": fid,
                               "object": obj, "signed_error_deg": e})
    return {m: np.asarray(v) for m, v in errors.items()}, series


def summarize_heading(errors: dict[str, np.ndarray]) -> dict[str, dict[str, float]]:
    out = {}
    for method, e in errors.items():
        s_mean, s_std = _stats(e)
        a_mean, a_std = _stats(np.abs(e))
        out[method] = {"signed_mean": s_mean, "signed_std": s_std,
                       "abs_mean": a_mean, "abs_std": a_std, "n": int(len(e))}
    return out


def heading_error_stats(results, gt) -> dict[str, dict[str, float]]:
    return summarize_heading(heading_errors(results, gt)[0])


def heading_error_distribution(abs_errors, thresholds=THRESHOLDS_DEG) -> dict[float, float]:
    """Fraction of absolute errors (degrees) at or below each threshold."""
    a = np.abs(np.asarray(abs_errors, dtype=float))
    if len(a) == 0:
        raise ValueError("need at least one error")
    out = {}
    for t in thresholds:
        limit = ZERO_TOL_DEG if t == 0 else t
        out[t] = float(np.mean(a <= limit))
    return out


# ---------------------------------------------------------------------------
# trajectories and identities

def track_to_vehicle(results) -> dict[int, int]:
    """Map each track id to the ground-truth vehicle most of its detections came from."""
    votes: dict[int, Counter] = defaultdict(Counter)
    for frame in results:
        labels = {d["index"]: d.get("gt_object") for d in frame["detections"]}
        for a in frame["assignments"]:
            obj = labels.get(a["detection"])
            if obj is not None:
                votes[a["track_id"]][obj] += 1
    # ties broken toward the smaller vehicle id
    return {tid: min(c.items(), key=lambda kv: (-kv[1], kv[0]))[0] for tid, c in votes.items()}


def _is_moving(vehicle: dict) -> bool:
    return vehicle["motion"] != "stationary"


def trajectory_errors(results, gt, method: str = "mma",
                      matched_only: bool = True) -> tuple[dict[str, np.ndarray], list[dict]]:
    """
    Absolute per-axis corner errors of confirmed tracks, keyed by vehicle state.

    With ``matched_only`` a track is scored only in frames where it was
    corrected by a detection; coasted predictions are left out.

    The reference is the ground-truth footprint corner closest to the track's
    corner estimate. Returns ``{"stationary": (k, 2), "moving": (k, 2)}``.
    """
    truth = _truth_index(gt)
    owner = track_to_vehicle(results)
    errs: dict[str, list] = {"stationary": [], "moving": []}
    series = []
    for frame in results:
        fid = int(frame["frame_id"])
        if fid not in truth:
            raise AlignmentError(f"frame {fid} has no ground truth")
        for tr in frame["tracks"]:
            obj = owner.get(tr["id"])
            if obj is None or tr["lifecycle"] != "confirmed" or obj not in truth[fid]:
                continue
            if matched_only and tr["detection"] is None:
                continue
            vehicle = truth[fid][obj]
            corners = np.asarray(vehicle["corners"])
            est = np.asarray(tr["corner"])
            ref = corners[int(np.argmin(np.linalg.norm(corners - est, axis=1)))]
            err = np.abs(est - ref)
            state = "moving" if _is_moving(vehicle) else "stationary"
            errs[state].append(err)
            series.append({"series": "trajectory", "method": method, "frame_id": fid,
                           "track_id": tr["id"], "object": obj, "state": state,
                           "abs_x": float(err[0]), "abs_y": float(err[1])})
    return {k: np.asarray(v, dtype=float).reshape(-1, 2) for k, v in errs.items()}, series


def trajectory_error_stats(results, gt, method: str = "mma") -> dict[str, dict[str, float]]:
    errs, _ = trajectory_errors(results, gt, method)
    out = {}
    for state, e in errs.items():
        x_mean, x_std = _stats(e[:, 0])
        y_mean, y_std = _stats(e[:, 1])
        out[state] = {"x_mean": x_mean, "x_std": x_std, "y_mean": y_mean, "y_std": y_std,
                      "n": int(len(e))}
    return out


def id_coverage(results, gt) -> dict[int, float]:
    """Best single-track coverage of each observed vehicle's observed frames."""
    observed: dict[int, set[int]] = defaultdict(set)
    for f in gt:
        for v in f["vehicles"]:
            if v["observed"]:
                observed[int(v["id"])].add(int(f["frame_id"]))
    covered: dict[int, dict[int, set[int]]] = defaultdict(lambda: defaultdict(set))
    for frame in results:
        fid = int(frame["frame_id"])
        labels = {d["index"]: d.get("gt_object") for d in frame["detections"]}
        for a in frame["assignments"]:
            obj = labels.get(a["detection"])
            if obj is not None and fid in observed.get(obj, ()):
                covered[obj][a["track_id"]].add(fid)
    out = {}
    for obj, frames in sorted(observed.items()):
        best = max((len(fr) for fr in covered[obj].values()), default=0)
        out[obj] = best / len(frames)
    return out


def id_consistency(results, gt, threshold: float = ID_COVERAGE) -> float:
    cov = id_coverage(results, gt)
    if not cov:
        return math.nan
    return float(np.mean([c >= threshold for c in cov.values()]))


# ---------------------------------------------------------------------------
# table writers

def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return "nan" if math.isnan(v) else f"{v:.6f}"


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def evaluate(results_by_method: dict[str, list[dict]], gt, out_dir) -> dict:
    """
    Write table2.csv, table3.csv, table4.csv, id_consistency.csv and plot_data.jsonl.

    Heading tables come from the first result set (detections do not depend on
    the tracker); trajectory and identity tables cover every result set.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    methods = list(results_by_method)
    if not methods:
        raise ValueError("no results to evaluate")

    errors, series = heading_errors(results_by_method[methods[0]], gt)
    stats = summarize_heading(errors)
    _write_csv(out / "table2.csv", TABLE2_HEADER,
               [[m, s["signed_mean"], s["signed_std"], s["abs_mean"], s["abs_std"], s["n"]]
                for m, s in stats.items()])
    rows3 = []
    dists = {}
    for m, e in errors.items():
        if len(e) == 0:
            rows3.append([m] + [math.nan] * len(THRESHOLDS_DEG) + [0])
            continue
        dists[m] = heading_error_distribution(np.abs(e))
        rows3.append([m] + [100.0 * dists[m][t] for t in THRESHOLDS_DEG] + [len(e)])
    _write_csv(out / "table3.csv", TABLE3_HEADER, rows3)

    rows4, rows_id, traj = [], [], {}
    ids = {}
    for m in methods:
        errs, s = trajectory_errors(results_by_method[m], gt, m)
        series += s
        traj[m] = trajectory_error_stats(results_by_method[m], gt, m)
        for state, t in traj[m].items():
            rows4.append([m, state, t["x_mean"], t["x_std"], t["y_mean"], t["y_std"], t["n"]])
        cov = id_coverage(results_by_method[m], gt)
        consistent = sum(c >= ID_COVERAGE for c in cov.values())
        ids[m] = consistent / len(cov) if cov else math.nan
        rows_id.append([m, len(cov), consistent, ids[m]])
    _write_csv(out / "table4.csv", TABLE4_HEADER, rows4)
    _write_csv(out / "id_consistency.csv", ID_HEADER, rows_id)
    write_jsonl(out / "plot_data.jsonl", series)
    return {"heading": stats, "distribution": dists, "trajectory": traj, "id_consistency": ids}
