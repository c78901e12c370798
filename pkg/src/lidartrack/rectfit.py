"""
Oriented rectangle fitting for L-shaped, side-only and rear-only clusters.

Three search-based criteria (area, closeness, variance) scan headings over a
quarter turn. A fourth candidate takes the heading of the dominant T-linkage
cluster. The final box is the candidate whose residual variance against the
dominant cluster is smallest.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateInput
from .geometry import (OrientedRect, as_points, canonical_heading, enforce_min_width,
                       fit_line_tls, rect_from_heading)


class CriterionKind(enum.Enum):
    AREA = "area"
    CLOSENESS = "closeness"
    VARIANCE = "variance"
    TLINKAGE = "tlinkage"


SEARCH_CRITERIA = (CriterionKind.AREA, CriterionKind.CLOSENESS, CriterionKind.VARIANCE)


@dataclass(frozen=True)
class RectFitConfig:
    step_deg: float = 1.0
    min_width: float = 0.1
    closeness_dmin: float = 0.01


@dataclass(frozen=True, eq=False)
class FitResult:
    rect: OrientedRect
    criterion: CriterionKind
    selection_cost: float


def _search_headings(step: float) -> np.ndarray:
    if not 0 < step <= math.pi / 2:
        raise ValueError("step must lie in (0, pi/2]")
    count = int(math.ceil(math.pi / 2 / step - 1e-9))
    return np.arange(count) * step


def _edge_distances(c: np.ndarray):
    """
    Distance of each projection to the nearer-side boundary of its axis.

    ``c`` is ``(n, k)``: projections of n points for k headings. For each
    heading the boundary (min or max) with the smaller distance norm is chosen,
    as in the closeness and variance criteria of search-based L-shape fitting.
    """
    lo = c.min(axis=0)
    hi = c.max(axis=0)
    to_lo = c - lo
    to_hi = hi - c
    use_lo = np.linalg.norm(to_lo, axis=0) < np.linalg.norm(to_hi, axis=0)
    return np.where(use_lo, to_lo, to_hi)


def _masked_pop_var(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    count = mask.sum(axis=0)
    safe = np.maximum(count, 1)
    mean = np.where(mask, values, 0.0).sum(axis=0) / safe
    sq = np.where(mask, (values - mean) ** 2, 0.0).sum(axis=0) / safe
    return np.where(count > 0, sq, 0.0)


class _Projections:
    """Point projections on both axes of every searched heading, shared by the criteria."""

    def __init__(self, pts: np.ndarray, headings: np.ndarray):
        cos, sin = np.cos(headings), np.sin(headings)
        self.c1 = pts[:, :1] * cos + pts[:, 1:] * sin
        self.c2 = pts[:, 1:] * cos - pts[:, :1] * sin
        self._d = None

    @property
    def edge_distances(self):
        if self._d is None:
            self._d = (_edge_distances(self.c1), _edge_distances(self.c2))
        return self._d


def _scores(proj: _Projections, criterion: CriterionKind, dmin: float) -> np.ndarray:
    if criterion is CriterionKind.AREA:
        return -(np.ptp(proj.c1, axis=0) * np.ptp(proj.c2, axis=0))
    d1, d2 = proj.edge_distances
    if criterion is CriterionKind.CLOSENESS:
        return (1.0 / np.maximum(np.minimum(d1, d2), dmin)).sum(axis=0)
    if criterion is CriterionKind.VARIANCE:
        on_first = d1 < d2
        return -(_masked_pop_var(d1, on_first) + _masked_pop_var(d2, ~on_first))
    raise ValueError(f"{criterion} is not a search criterion")


def criterion_scores(points, criterion: CriterionKind, headings: np.ndarray,
                     dmin: float = 0.01) -> np.ndarray:
    """Score per heading, oriented so that larger is better."""
    return _scores(_Projections(as_points(points), np.asarray(headings, dtype=float)), criterion, dmin)


def _is_collinear(pts: np.ndarray) -> bool:
    if len(pts) < 3:
        return True
    centered = pts - pts.mean(axis=0)
    evals = np.linalg.eigvalsh(centered.T @ centered)
    return evals[0] <= 1e-12 * max(evals[1], 1e-300) or evals[1] <= 1e-24


def search_fit(points, criterion: CriterionKind, step: float = math.radians(1.0),
               cfg: RectFitConfig | None = None) -> OrientedRect:
    """
    Best rectangle over headings ``{0, step, ...} < pi/2`` for one criterion.

    Collinear input does not raise: the rectangle is widened to
    ``cfg.min_width`` and flagged ``degenerate``.
    """
    cfg = cfg or RectFitConfig()
    pts = as_points(points)
    if len(pts) == 0:
        raise DegenerateInput("need at least one point")
    headings = _search_headings(step)
    return _search_fit(pts, criterion, headings, _Projections(pts, headings), cfg)


def _search_fit(pts, criterion, headings, proj, cfg) -> OrientedRect:
    scores = _scores(proj, criterion, cfg.closeness_dmin)
    k = int(np.argmax(scores))
    rect = rect_from_heading(pts, headings[k], criterion_score=float(scores[k]))
    rect = enforce_min_width(rect, cfg.min_width)
    if _is_collinear(pts) and not rect.degenerate:
        rect = replace(rect, degenerate=True)
    return rect


def selection_cost(rect: OrientedRect, dominant_points, dominant_heading: float | None = None) -> float:
    """
    Population variance of |residuals| of the dominant points to one rectangle edge.

    The edge is the support line whose direction is closest to the dominant
    heading, taking whichever of the two parallel sides lies nearer the points.
    """
    pts = as_points(dominant_points)
    if len(pts) < 2:
        raise DegenerateInput("need at least two dominant points")
    if dominant_heading is None:
        dominant_heading = fit_line_tls(pts).heading
    e1, e2 = rect.axes
    diff = abs(canonical_heading(rect.heading - dominant_heading))
    diff = min(diff, math.pi - diff)
    # edges along e1 have normal e2 and vice versa
    normal = e2 if diff <= math.pi / 4 else e1
    corner_proj = rect.corners @ normal
    proj = pts @ normal
    to_lo = np.abs(proj - corner_proj.min())
    to_hi = np.abs(corner_proj.max() - proj)
    resid = to_lo if to_lo.mean() <= to_hi.mean() else to_hi
    return float(np.var(resid))


def tlinkage_rect(points, heading: float, cfg: RectFitConfig | None = None) -> OrientedRect:
    cfg = cfg or RectFitConfig()
    rect = rect_from_heading(points, heading)
    return enforce_min_width(rect, cfg.min_width)


def fit_candidates(points, dominant_points, cfg: RectFitConfig | None = None,
                   inlier_points=None, dominant_heading: float | None = None) -> list[FitResult]:
    """
    The four candidate boxes with their selection costs, T-linkage first.

    Search criteria see every point of the segment; the T-linkage box is built
    from ``inlier_points`` (default: all points) at the dominant heading.
    """
    cfg = cfg or RectFitConfig()
    pts = as_points(points)
    dom = as_points(dominant_points)
    if dominant_heading is None:
        dominant_heading = fit_line_tls(dom).heading
    inliers = pts if inlier_points is None else as_points(inlier_points)
    step = math.radians(cfg.step_deg)

    rects = [(CriterionKind.TLINKAGE, tlinkage_rect(inliers, dominant_heading, cfg))]
    if len(pts) == 0:
        raise DegenerateInput("need at least one point")
    headings = _search_headings(step)
    proj = _Projections(pts, headings)
    rects += [(kind, _search_fit(pts, kind, headings, proj, cfg)) for kind in SEARCH_CRITERIA]
    return [FitResult(rect, kind, selection_cost(rect, dom, dominant_heading))
            for kind, rect in rects]


def best_selection(points, dominant_points, cfg: RectFitConfig | None = None,
                   inlier_points=None, dominant_heading: float | None = None) -> FitResult:
    """Candidate with minimal selection cost; exact ties go to the T-linkage box."""
    candidates = fit_candidates(points, dominant_points, cfg, inlier_points, dominant_heading)
    return select_best(candidates)


def select_best(candidates: list[FitResult]) -> FitResult:
    ordered = sorted(candidates, key=lambda c: c.criterion is not CriterionKind.TLINKAGE)
    best = ordered[0]
    for cand in ordered[1:]:
        if cand.selection_cost < best.selection_cost:
            best = cand
    return best
