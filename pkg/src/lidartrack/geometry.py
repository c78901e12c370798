"""
2D geometric primitives: points, normalized lines and oriented rectangles.

Point sets are passed around as ``(n, 2)`` float arrays; ``Point2`` exists for
the places where a single named point reads better.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DegenerateInput

COINCIDENT_EPS = 1e-12


class Point2(NamedTuple):
    x: float
    y: float


def as_points(points) -> np.ndarray:
    """Coerce a sequence of points into a finite ``(n, 2)`` float array."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1 and arr.size == 2:
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or (arr.size and arr.shape[1] != 2):
        raise ValueError(f"expected an (n, 2) point array, got shape {arr.shape}")
    arr = arr.reshape(-1, 2)
    if not np.all(np.isfinite(arr)):
        raise ValueError("point coordinates must be finite")
    return arr


def canonical_heading(theta: float) -> float:
    """Map an undirected line angle into [0, pi)."""
    h = math.fmod(theta, math.pi)
    if h < 0:
        h += math.pi
    # fmod can return pi - tiny for inputs like -1e-17
    if h >= math.pi:
        h -= math.pi
    return h


def rotation(phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Line2:
    """Line ``a*x + b*y + c = 0`` with unit normal ``(a, b)``."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if abs(self.a * self.a + self.b * self.b - 1.0) > 1e-9:
            raise ValueError("Line2 normal (a, b) must have unit length")

    @classmethod
    def from_coeffs(cls, a: float, b: float, c: float) -> "Line2":
        norm = math.hypot(a, b)
        if norm < COINCIDENT_EPS:
            raise DegenerateInput("line normal has zero length")
        return cls(a / norm, b / norm, c / norm)

    @property
    def heading(self) -> float:
        # direction vector is (b, -a)
        return canonical_heading(math.atan2(-self.a, self.b))

    @property
    def coeffs(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])


def line_through(p, q) -> Line2:
    """Line through two distinct points."""
    (px, py), (qx, qy) = p, q
    dx, dy = qx - px, qy - py
    length = math.hypot(dx, dy)
    if length <= COINCIDENT_EPS:
        raise DegenerateInput("cannot build a line through coincident points")
    a, b = -dy / length, dx / length
    return Line2(a, b, -(a * px + b * py))


def point_line_distance(p, line: Line2) -> float:
    return abs(line.a * p[0] + line.b * p[1] + line.c)


def line_distances(points, line: Line2) -> np.ndarray:
    """Vectorized ``point_line_distance`` over an ``(n, 2)`` array."""
    pts = np.asarray(points, dtype=float)
    return np.abs(pts[:, 0] * line.a + pts[:, 1] * line.b + line.c)


def fit_line_tls(points) -> Line2:
    """
    Total-least-squares line fit.

    The normal is the eigenvector of the centered scatter matrix with the
    smallest eigenvalue, so vertical lines need no special handling.
    """
    pts = as_points(points)
    if len(pts) < 2:
        raise DegenerateInput("need at least two points to fit a line")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    if np.max(np.abs(centered)) <= COINCIDENT_EPS:
        raise DegenerateInput("all points coincide")
    scatter = centered.T @ centered
    _, vecs = np.linalg.eigh(scatter)
    a, b = vecs[:, 0]
    return Line2.from_coeffs(a, b, -(a * centroid[0] + b * centroid[1]))


def tls_residual_variance(points) -> float:
    """Population variance of perpendicular residuals about the TLS line."""
    pts = as_points(points)
    if len(pts) < 2:
        return 0.0
    centered = pts - pts.mean(axis=0)
    evals = np.linalg.eigvalsh(centered.T @ centered / len(pts))
    return float(max(evals[0], 0.0))


def signed_area(corners) -> float:
    c = np.asarray(corners, dtype=float)
    x, y = c[:, 0], c[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True, eq=False)
class OrientedRect:
    """
    Rectangle with edges along ``heading`` and ``heading + pi/2``.

    ``corners`` is a ``(4, 2)`` array in counter-clockwise order starting from
    the (min, min) corner of the rotated frame.
    """

    heading: float
    corners: np.ndarray
    nearest_corner_index: int
    criterion_score: float = 0.0
    degenerate: bool = False
    _extent: tuple = field(default=(0.0, 0.0), repr=False)

    @property
    def nearest_corner(self) -> np.ndarray:
        return self.corners[self.nearest_corner_index]

    @property
    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        c, s = math.cos(self.heading), math.sin(self.heading)
        return np.array([c, s]), np.array([-s, c])

    @property
    def size(self) -> tuple[float, float]:
        """Extent along (heading, heading + pi/2)."""
        return self._extent

    @property
    def center(self) -> np.ndarray:
        return self.corners.mean(axis=0)

    @property
    def area(self) -> float:
        return self._extent[0] * self._extent[1]

    def is_valid(self, tol: float = 1e-6) -> bool:
        edges = np.roll(self.corners, -1, axis=0) - self.corners
        lengths = np.linalg.norm(edges, axis=1)
        if np.any(lengths <= COINCIDENT_EPS):
            return False
        unit = edges / lengths[:, None]
        dots = np.abs(np.sum(unit * np.roll(unit, -1, axis=0), axis=1))
        return bool(np.all(dots < tol) and signed_area(self.corners) > 0)


def rect_from_bounds(heading: float, lo1: float, hi1: float, lo2: float, hi2: float,
                     criterion_score: float = 0.0, degenerate: bool = False) -> OrientedRect:
    e1 = np.array([math.cos(heading), math.sin(heading)])
    e2 = np.array([-e1[1], e1[0]])
    local = np.array([[lo1, lo2], [hi1, lo2], [hi1, hi2], [lo1, hi2]])
    corners = local[:, :1] * e1 + local[:, 1:] * e2
    nearest = int(np.argmin(np.einsum("ij,ij->i", corners, corners)))
    return OrientedRect(heading=heading, corners=corners, nearest_corner_index=nearest,
                        criterion_score=criterion_score, degenerate=degenerate,
                        _extent=(hi1 - lo1, hi2 - lo2))


def rect_from_heading(points, heading: float, criterion_score: float = 0.0) -> OrientedRect:
    """Bounding rectangle of ``points`` in the frame rotated by ``heading``."""
    pts = as_points(points)
    if len(pts) == 0:
        raise DegenerateInput("need at least one point")
    heading = canonical_heading(heading)
    e1 = np.array([math.cos(heading), math.sin(heading)])
    e2 = np.array([-e1[1], e1[0]])
    c1, c2 = pts @ e1, pts @ e2
    return rect_from_bounds(heading, c1.min(), c1.max(), c2.min(), c2.max(), criterion_score)


def enforce_min_width(rect: OrientedRect, min_width: float) -> OrientedRect:
    """
    Grow any side shorter than ``min_width``.

    The side facing the sensor origin stays put and the far side moves away,
    since a line of returns is the visible surface of a body behind it.
    """
    len1, len2 = rect.size
    if len1 >= min_width and len2 >= min_width:
        return rect
    e1, e2 = rect.axes
    c1, c2 = rect.corners @ e1, rect.corners @ e2
    bounds = []
    for proj, length in ((c1, len1), (c2, len2)):
        lo, hi = float(proj.min()), float(proj.max())
        if length < min_width:
            if 0.5 * (lo + hi) >= 0:
                hi = lo + min_width
            else:
                lo = hi - min_width
        bounds.extend((lo, hi))
    return rect_from_bounds(rect.heading, *bounds, criterion_score=rect.criterion_score,
                            degenerate=True)
