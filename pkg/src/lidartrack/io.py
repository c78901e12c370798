"""
JSONL readers and writers for scans, ground truth and pipeline results.

One JSON object per line per frame. Writers are deterministic: keys keep a
fixed order and floats use Python's shortest round-trip repr.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .segmentation import Scan
from .sim import GroundTruth


def scan_to_record(scan: Scan) -> dict:
    points = [
        {"x": float(x), "y": float(y), "layer": int(l), "range": float(r), "bearing": float(b)}
        for (x, y), l, r, b in zip(scan.xy, scan.layer, scan.range, scan.bearing)
    ]
    labels = [] if scan.labels is None else [int(v) for v in scan.labels]
    return {"frame_id": int(scan.frame_id), "timestamp": float(scan.timestamp),
            "points": points, "labels": labels}


def scan_from_record(rec: dict) -> Scan:
    try:
        pts = rec["points"]
        xy = np.array([[p["x"], p["y"]] for p in pts], dtype=float).reshape(-1, 2)
        layer = np.array([p["layer"] for p in pts], dtype=int)
        rng = np.array([p["range"] for p in pts], dtype=float)
        bearing = np.array([p["bearing"] for p in pts], dtype=float)
        labels = rec.get("labels") or None
        if labels is not None and len(labels) != len(pts):
            raise ValueError("labels and points differ in length")
        return Scan.from_unsorted(int(rec["frame_id"]), float(rec["timestamp"]),
                                  xy, layer, rng, bearing, labels)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed scan record: {exc!r}") from None


def truth_to_records(gt: GroundTruth) -> list[dict]:
    out = []
    for frame in gt.frames:
        out.append({
            "frame_id": frame.frame_id,
            "timestamp": frame.timestamp,
            "vehicles": [{
                "id": v.id,
                "x": float(v.x), "y": float(v.y), "theta": float(v.theta),
                "motion": v.motion.value,
                "corners": v.corners.tolist(),
                "nearest_corner": v.nearest_corner.tolist(),
                "n_points": v.n_points,
                "edge_counts": list(v.edge_counts),
                "view": v.view,
                "observed": v.observed,
            } for v in frame.vehicles],
        })
    return out


def write_jsonl(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":")))
            fh.write("\n")


def read_jsonl(path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{Path(path).name}:{lineno}: invalid JSON ({exc.msg})") from None
    return out


def write_scans(path, scans) -> None:
    write_jsonl(path, (scan_to_record(s) for s in scans))


def read_scans(path) -> list[Scan]:
    return [scan_from_record(rec) for rec in read_jsonl(path)]


def write_truth(path, gt: GroundTruth) -> None:
    write_jsonl(path, truth_to_records(gt))


def write_results(path, outputs) -> None:
    write_jsonl(path, (o.to_dict() for o in outputs))
