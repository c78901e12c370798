"""
Per-frame detection and tracking chain.

    scan -> segments -> T-linkage clusters -> candidate boxes -> best box
         -> gated Hungarian association -> multiple-model Kalman update

``Tracker`` keeps the track table between frames; frames must arrive in
timestamp order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .association import Prediction, build_score_matrix, solve_assignment
from .config import PipelineConfig
from .errors import DegenerateInput, LidarTrackError, NoCluster
from .geometry import OrientedRect
from .rectfit import FitResult, fit_candidates, select_best
from .segmentation import LABEL_NONE, Scan, segment_scan
from .tlinkage import cluster_segment, dominant_heading
from .tracking import (Lifecycle, Track, corner_switch_compensate, lifecycle_step,
                       mma_update, new_track, observation, predict_track, record)

log = logging.getLogger(__name__)


@dataclass(eq=False)
class Detection:
    index: int
    point_indices: np.ndarray
    rect: OrientedRect
    criterion: str
    cost: float
    candidates: list[FitResult]
    dominant_heading: float
    gt_object: int | None = None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "n_points": int(len(self.point_indices)),
            "corners": np.round(self.rect.corners, 6).tolist(),
            "nearest_corner": np.round(self.rect.nearest_corner, 6).tolist(),
            "heading": round(float(self.rect.heading), 9),
            "criterion": self.criterion,
            "cost": float(self.cost),
            "degenerate": bool(self.rect.degenerate),
            "candidates": {c.criterion.value: {"heading": round(float(c.rect.heading), 9),
                                               "cost": float(c.selection_cost)}
                           for c in self.candidates},
            "gt_object": self.gt_object,
        }


@dataclass
class FramePipelineOutput:
    frame_id: int
    timestamp: float
    detections: list[Detection] = field(default_factory=list)
    assignments: list[tuple[int, int]] = field(default_factory=list)  # (track id, detection index)
    tracks: list[dict] = field(default_factory=list)
    skipped: bool = False

    def to_dict(self) -> dict:
        return {
            "frame_id": self.frame_id,
            "timestamp": self.timestamp,
            "skipped": self.skipped,
            "detections": [d.to_dict() for d in self.detections],
            "assignments": [{"track_id": t, "detection": d} for t, d in self.assignments],
            "tracks": self.tracks,
        }


def majority_label(labels: np.ndarray | None) -> int | None:
    if labels is None:
        return None
    labels = labels[labels != LABEL_NONE]
    if len(labels) == 0:
        return None
    values, counts = np.unique(labels, return_counts=True)
    return int(values[int(np.argmax(counts))])


def segment_seed(base: int, frame_id: int, segment: int) -> int:
    return int(np.random.SeedSequence([int(base), int(frame_id), int(segment)]).generate_state(1)[0])


def detect(scan: Scan, cfg: PipelineConfig) -> list[Detection]:
    """Segment a scan and fit one box per segment; segments that cannot be fit are dropped."""
    detections = []
    for k, seg in enumerate(segment_scan(scan, cfg.segmentation)):
        pts = scan.xy[seg.point_indices]
        try:
            clusters = cluster_segment(pts, cfg.tlinkage, segment_seed(cfg.tlinkage.seed, scan.frame_id, k))
            heading = dominant_heading(clusters, pts)
            dominant = pts[clusters.dominant.indices]
            inliers = pts[clusters.inlier_indices]
            candidates = fit_candidates(pts, dominant, cfg.rectfit, inliers, heading)
        except (DegenerateInput, NoCluster) as exc:
            log.debug("frame %s segment %d dropped: %s", scan.frame_id, k, exc)
            continue
        best = select_best(candidates)
        labels = None if scan.labels is None else scan.labels[seg.point_indices]
        detections.append(Detection(
            index=len(detections), point_indices=seg.point_indices, rect=best.rect,
            criterion=best.criterion.value, cost=best.selection_cost, candidates=candidates,
            dominant_heading=float(heading), gt_object=majority_label(labels),
        ))
    return detections


def track_state(track: Track, detection: int | None) -> dict:
    best = track.best_slot
    return {
        "id": track.id,
        "lifecycle": track.lifecycle.value,
        "hits": track.hits,
        "misses": track.misses,
        "detection": detection,
        "corner": [float(v) for v in best.position],
        "heading": float(track.heading),
        "model": best.model.value,
        "probabilities": {s.model.value: float(s.probability) for s in track.slots},
        "mixture_corner": [float(v) for v in track.mixture_position],
    }


class Tracker:
    """Stateful multi-vehicle tracker over a time-ordered scan stream."""

    def __init__(self, cfg: PipelineConfig | None = None):
        self.cfg = cfg or PipelineConfig()
        self.tracks: list[Track] = []
        self.next_id = 0
        self.last_time: float | None = None

    def _score(self, predicted: list[Track], detections: list[Detection]):
        R = self.cfg.track.R
        preds = []
        for track in predicted:
            gates = []
            for slot in track.slots:
                H = observation(slot.model)[:2]
                gates.append((H @ slot.mean, H @ slot.covariance @ H.T))
            preds.append(Prediction(track.position, tuple(gates), track.heading))
        measured = [[corner_switch_compensate(track, d.rect) for d in detections] for track in predicted]
        dets = [(lambda t, d=d: (measured[t][d][:2], detections[d].rect.heading))
                for d in range(len(detections))]
        return build_score_matrix(preds, dets, R, self.cfg.assoc), measured

    def step(self, scan: Scan) -> FramePipelineOutput:
        if self.last_time is not None and not scan.timestamp > self.last_time:
            raise ValueError("scan timestamps must increase")
        cfg = self.cfg
        out = FramePipelineOutput(scan.frame_id, float(scan.timestamp))
        try:
            detections = detect(scan, cfg)
            predicted = [predict_track(t, scan.timestamp - t.last_time, cfg.track) for t in self.tracks]
            S, measured = self._score(predicted, detections)
            assignment = solve_assignment(S[:len(predicted), :len(detections)],
                                          len(predicted), len(detections), cfg.assoc.sentinel)
            updated: list[tuple[Track, int | None]] = []
            for t, d in assignment.pairs:
                track = mma_update(predicted[t], measured[t][d], cfg.track.R, cfg.track)
                updated.append((lifecycle_step(track, True, cfg.track), d))
            for t in assignment.unmatched_tracks:
                updated.append((lifecycle_step(predicted[t], False, cfg.track), None))
        except (LidarTrackError, np.linalg.LinAlgError) as exc:
            log.warning("frame %s skipped: %s", scan.frame_id, exc)
            out.skipped = True
            self.last_time = float(scan.timestamp)
            return out

        births = []
        for d in assignment.unmatched_detections:
            track = new_track(self.next_id, detections[d].rect, scan.timestamp, cfg.track)
            self.next_id += 1
            births.append((track, d))

        states = []
        for track, d in updated:
            record(track, scan.timestamp)
            states.append((track, d))
        states += births
        states.sort(key=lambda item: item[0].id)

        out.detections = detections
        out.assignments = sorted((track.id, d) for track, d in states if d is not None)
        out.tracks = [track_state(track, d) for track, d in states]
        self.tracks = [track for track, _ in states if track.lifecycle is not Lifecycle.DEAD]
        self.last_time = float(scan.timestamp)
        return out

    def run(self, scans) -> list[FramePipelineOutput]:
        return [self.step(scan) for scan in scans]


def run_pipeline(scans, cfg: PipelineConfig | None = None) -> list[FramePipelineOutput]:
    return Tracker(cfg).run(scans)
