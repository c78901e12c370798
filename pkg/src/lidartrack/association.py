"""
Track-to-detection assignment: Hungarian solver, Mahalanobis gating and
corner-distance score matrices padded to square form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SingularGate

SENTINEL = 1e6


@dataclass(frozen=True)
class AssocConfig:
    eps: float = 9.21
    heading_weight: float = 0.0
    sentinel: float = SENTINEL


@dataclass
class Assignment:
    pairs: list[tuple[int, int]] = field(default_factory=list)
    unmatched_tracks: list[int] = field(default_factory=list)
    unmatched_detections: list[int] = field(default_factory=list)


def hungarian(cost) -> list[tuple[int, int]]:
    """
    Minimum-cost perfect matching on a square matrix.

    Shortest augmenting path with row/column potentials (the O(n^3) form of
    the Hungarian method). Returns ``(row, col)`` pairs sorted by row.
    """
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError("cost matrix must be square")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix must be finite")
    n = c.shape[0]
    if n == 0:
        return []

    # 1-based bookkeeping; column 0 is a virtual start column
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    match = np.zeros(n + 1, dtype=int)  # match[col] = row
    way = np.zeros(n + 1, dtype=int)
    for row in range(1, n + 1):
        match[0] = row
        col0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[col0] = True
            i0 = match[col0]
            free = ~used[1:]
            reduced = c[i0 - 1] - u[i0] - v[1:]
            better = free & (reduced < minv[1:])
            minv[1:][better] = reduced[better]
            way[1:][better] = col0
            cand = np.where(free, minv[1:], np.inf)
            col1 = int(np.argmin(cand)) + 1
            delta = cand[col1 - 1]
            u[match[used]] += delta
            v[used] -= delta
            minv[1:][free] -= delta
            col0 = col1
            if match[col0] == 0:
                break
        while col0:
            col1 = way[col0]
            match[col0] = match[col1]
            col0 = col1

    pairs = [(int(match[j]) - 1, j - 1) for j in range(1, n + 1)]
    return sorted(pairs)


def assignment_cost(cost, pairs) -> float:
    c = np.asarray(cost, dtype=float)
    return float(sum(c[i, j] for i, j in sorted(pairs)))


def gate_statistic(x_pred, P_pred, z, R, H=None) -> float:
    """Mahalanobis form ``r^T B^-1 r`` with ``B = H P H^T + R``."""
    x_pred = np.asarray(x_pred, dtype=float)
    z = np.asarray(z, dtype=float)
    P_pred = np.asarray(P_pred, dtype=float)
    if H is None:
        H = np.eye(len(z), len(x_pred))
    B = H @ P_pred @ H.T + np.asarray(R, dtype=float)
    r = z - H @ x_pred
    try:
        chol = np.linalg.cholesky(0.5 * (B + B.T))
    except np.linalg.LinAlgError as exc:
        raise SingularGate("gate covariance is not positive definite") from exc
    w = np.linalg.solve(chol, r)
    return float(w @ w)


def gate(x_pred, P_pred, z, R, eps: float = 9.21, H=None) -> bool:
    return gate_statistic(x_pred, P_pred, z, R, H) < eps


def pad_square(cost, fill: float = SENTINEL) -> np.ndarray:
    c = np.asarray(cost, dtype=float)
    rows, cols = c.shape
    n = max(rows, cols)
    out = np.full((n, n), fill)
    out[:rows, :cols] = c
    return out


def solve_assignment(cost, n_tracks: int, n_dets: int, sentinel: float = SENTINEL) -> Assignment:
    """Solve a padded score matrix and drop every pair that landed on a sentinel."""
    square = pad_square(np.asarray(cost, dtype=float).reshape(n_tracks, n_dets), sentinel)
    result = Assignment()
    matched_t, matched_d = set(), set()
    for t, d in hungarian(square):
        if t < n_tracks and d < n_dets and square[t, d] < sentinel:
            result.pairs.append((t, d))
            matched_t.add(t)
            matched_d.add(d)
    result.unmatched_tracks = [t for t in range(n_tracks) if t not in matched_t]
    result.unmatched_detections = [d for d in range(n_dets) if d not in matched_d]
    return result


def heading_gap(a: float, b: float) -> float:
    """Smallest angle between two rectangle headings (quarter-turn symmetric)."""
    d = (a - b) % (np.pi / 2)
    return float(min(d, np.pi / 2 - d))


@dataclass(frozen=True, eq=False)
class Prediction:
    """
    Predicted track corner for scoring plus one or more gates.

    A detection is admissible when it falls inside any gate, which lets a
    filter bank gate with each motion model's own covariance.
    """

    position: np.ndarray
    gates: tuple[tuple[np.ndarray, np.ndarray], ...]
    heading: float = 0.0

    @classmethod
    def single(cls, mean, cov, heading: float = 0.0) -> "Prediction":
        mean = np.asarray(mean, dtype=float)[:2]
        cov = np.asarray(cov, dtype=float)[:2, :2]
        return cls(mean, ((mean, cov),), float(heading))

    def admits(self, z, R, eps: float) -> bool:
        return any(gate(m, P, z, R, eps) for m, P in self.gates)


def build_score_matrix(predictions, detections, R, cfg: AssocConfig | None = None) -> np.ndarray:
    """
    Square score matrix from predicted track corners to detected corners.

    ``predictions`` holds ``Prediction`` objects or ``(mean, cov, heading)``
    tuples over the corner position (x, y). ``detections`` holds
    ``(corner_xy, heading)`` per detection, or a callable mapping the track
    index to that pair (corner-switch compensation happens there).
    Gated-out and padding entries hold ``cfg.sentinel``.
    """
    cfg = cfg or AssocConfig()
    preds = [p if isinstance(p, Prediction) else Prediction.single(*p) for p in predictions]
    n_t, n_d = len(preds), len(detections)
    n = max(n_t, n_d)
    S = np.full((n, n), cfg.sentinel)
    R = np.asarray(R, dtype=float)[:2, :2]
    for t, pred in enumerate(preds):
        for d, det in enumerate(detections):
            corner, d_heading = det(t) if callable(det) else det
            corner = np.asarray(corner, dtype=float)[:2]
            if not pred.admits(corner, R, cfg.eps):
                continue
            cost = float(np.linalg.norm(corner - pred.position))
            if cfg.heading_weight:
                cost += cfg.heading_weight * heading_gap(pred.heading, d_heading)
            S[t, d] = cost
    return S
