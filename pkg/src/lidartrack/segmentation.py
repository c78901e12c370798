"""
Range-adaptive breakpoint segmentation of multi-layer scans.

Within a layer, bearing-consecutive returns are joined when their gap is below
``d0 + k * range``; the resulting runs are then merged across layers (and
across bearing gaps in the same layer) when any two of their points lie closer
than ``merge_dist``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

LABEL_NONE = -1


@dataclass(frozen=True)
class SegmentationConfig:
    d0: float = 0.5
    k: float = 0.02
    merge_dist: float = 0.5
    min_points: int = 5


@dataclass(eq=False)
class Scan:
    """
    One time-stamped frame of 2D returns.

    Arrays are parallel and sorted by ``(layer, bearing)``; ``labels`` holds the
    generating object id per point, or ``LABEL_NONE``.
    """

    frame_id: int
    timestamp: float
    xy: np.ndarray
    layer: np.ndarray
    range: np.ndarray
    bearing: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.xy = np.asarray(self.xy, dtype=float).reshape(-1, 2)
        n = len(self.xy)
        self.layer = np.asarray(self.layer, dtype=int).reshape(n)
        self.range = np.asarray(self.range, dtype=float).reshape(n)
        self.bearing = np.asarray(self.bearing, dtype=float).reshape(n)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int).reshape(n)
        if n and np.any(self.range <= 0):
            raise ValueError("scan ranges must be positive")
        if n > 1:
            order = np.lexsort((self.bearing, self.layer))
            if np.any(order != np.arange(n)):
                raise ValueError("scan points must be sorted by (layer, bearing)")

    @classmethod
    def from_unsorted(cls, frame_id, timestamp, xy, layer, rng, bearing, labels=None) -> "Scan":
        order = np.lexsort((np.asarray(bearing), np.asarray(layer)))
        return cls(
            frame_id,
            timestamp,
            np.asarray(xy, dtype=float).reshape(-1, 2)[order],
            np.asarray(layer)[order],
            np.asarray(rng)[order],
            np.asarray(bearing)[order],
            None if labels is None else np.asarray(labels)[order],
        )

    @classmethod
    def from_polar(cls, frame_id, timestamp, rng, bearing, layer, labels=None) -> "Scan":
        rng = np.asarray(rng, dtype=float)
        bearing = np.asarray(bearing, dtype=float)
        xy = np.column_stack((rng * np.cos(bearing), rng * np.sin(bearing)))
        return cls.from_unsorted(frame_id, timestamp, xy, layer, rng, bearing, labels)

    def __len__(self):
        return len(self.xy)


@dataclass(frozen=True)
class Segment:
    point_indices: np.ndarray = field(repr=False)

    def __post_init__(self):
        idx = np.asarray(self.point_indices, dtype=int)
        if idx.size == 0:
            raise ValueError("segment must be non-empty")
        object.__setattr__(self, "point_indices", idx)

    def __len__(self):
        return len(self.point_indices)


def _breakpoint_edges(scan: Scan, cfg: SegmentationConfig) -> np.ndarray:
    """Index pairs joined by the per-layer adaptive breakpoint rule."""
    edges = []
    for layer in np.unique(scan.layer):
        idx = np.flatnonzero(scan.layer == layer)
        if len(idx) < 2:
            continue
        pts = scan.xy[idx]
        rng = scan.range[idx]
        # close the ring: a 360 degree sweep wraps from +pi back to -pi
        nxt = np.roll(np.arange(len(idx)), -1)
        gaps = np.linalg.norm(pts[nxt] - pts, axis=1)
        joined = gaps < cfg.d0 + cfg.k * np.minimum(rng, rng[nxt])
        edges.append(np.column_stack((idx[joined], idx[nxt[joined]])))
    if not edges:
        return np.empty((0, 2), dtype=int)
    return np.concatenate(edges)


def _merge_edges(scan: Scan, cfg: SegmentationConfig) -> np.ndarray:
    if cfg.merge_dist <= 0:
        return np.empty((0, 2), dtype=int)
    pairs = cKDTree(scan.xy).query_pairs(cfg.merge_dist, output_type="ndarray")
    if len(pairs) == 0:
        return np.empty((0, 2), dtype=int)
    d = np.linalg.norm(scan.xy[pairs[:, 0]] - scan.xy[pairs[:, 1]], axis=1)
    return pairs[d < cfg.merge_dist]


def segment_scan(scan: Scan, cfg: SegmentationConfig | None = None) -> list[Segment]:
    """Partition a scan into candidate object segments, ordered by first point index."""
    cfg = cfg or SegmentationConfig()
    n = len(scan)
    if n == 0:
        return []
    edges = np.concatenate((_breakpoint_edges(scan, cfg), _merge_edges(scan, cfg)))
    graph = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)

    segments = []
    order = np.argsort(labels, kind="stable")
    bounds = np.flatnonzero(np.diff(labels[order])) + 1
    for members in np.split(order, bounds):
        if len(members) >= cfg.min_points:
            segments.append(Segment(np.sort(members)))
    segments.sort(key=lambda s: int(s.point_indices[0]))
    return segments
