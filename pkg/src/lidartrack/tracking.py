"""
Multiple-model Kalman tracking of a vehicle's nearest corner.

Each track carries one Kalman filter per motion model (stationary, constant
velocity, constant acceleration). Every frame the pre-fit residual of each
filter is scored with a Gaussian likelihood, the model probabilities are
re-weighted and normalized, and the most probable filter provides the output.
Slot states are never mixed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import SingularInnovation
from .geometry import OrientedRect

LOG_2PI = math.log(2.0 * math.pi)
QUARTER = math.pi / 2


class ModelKind(enum.Enum):
    STATIONARY = "stationary"
    CV = "cv"
    CA = "ca"


class Lifecycle(enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    DEAD = "dead"


# full state: x, y, vx, vy, ax, ay, theta, delta
STATE_INDEX = {
    ModelKind.STATIONARY: [0, 1, 6],
    ModelKind.CV: [0, 1, 2, 3],
    ModelKind.CA: [0, 1, 2, 3, 4, 5, 6, 7],
}
INITIAL_VARIANCE = np.array([1.0, 1.0, 4.0, 4.0, 1.0, 1.0, 0.1, 0.1])


@dataclass(frozen=True)
class TrackConfig:
    models: str = "stationary,cv,ca"
    # process noise variances, per second (scaled by dt) or per frame
    q_per_second: bool = True
    q_stationary: float = 1e-4
    q_cv: float = 0.1
    q_ca: float = 0.5
    q_heading: float = 1e-4
    r_pos: float = 0.05
    r_heading_deg: float = 2.0
    confirm_hits: int = 3
    max_misses: int = 5
    p_floor: float = 0.001

    @property
    def model_kinds(self) -> tuple[ModelKind, ...]:
        return tuple(ModelKind(name.strip()) for name in self.models.split(",") if name.strip())

    @property
    def R(self) -> np.ndarray:
        return np.diag([self.r_pos ** 2, self.r_pos ** 2, math.radians(self.r_heading_deg) ** 2])


@dataclass(frozen=True, eq=False)
class FilterSlot:
    model: ModelKind
    mean: np.ndarray
    covariance: np.ndarray
    probability: float

    @property
    def position(self) -> np.ndarray:
        return self.mean[:2]

    @property
    def heading(self) -> float | None:
        idx = STATE_INDEX[self.model]
        return float(self.mean[idx.index(6)]) if 6 in idx else None

    @property
    def observes_heading(self) -> bool:
        return 6 in STATE_INDEX[self.model]


@dataclass(frozen=True)
class HistoryEntry:
    timestamp: float
    corner: tuple[float, float]
    heading: float
    mixture: tuple[float, float]
    model: str


@dataclass(eq=False)
class Track:
    id: int
    slots: list[FilterSlot]
    corner_id: tuple[int, int]
    last_time: float
    lifecycle: Lifecycle = Lifecycle.TENTATIVE
    hits: int = 1
    misses: int = 0
    history: list[HistoryEntry] = field(default_factory=list)
    matched: bool = True
    # last measured heading; used when no slot carries theta
    heading_ref: float = 0.0

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([s.probability for s in self.slots])

    @property
    def best_slot(self) -> FilterSlot:
        return self.slots[int(np.argmax(self.probabilities))]

    @property
    def position(self) -> np.ndarray:
        return self.best_slot.position.copy()

    @property
    def mixture_position(self) -> np.ndarray:
        p = self.probabilities
        return sum(w * s.position for w, s in zip(p, self.slots))

    @property
    def heading(self) -> float:
        best = self.best_slot
        if best.heading is not None:
            return best.heading
        with_heading = [s for s in self.slots if s.observes_heading]
        if not with_heading:
            return self.heading_ref
        return max(with_heading, key=lambda s: s.probability).heading

    @property
    def alive(self) -> bool:
        return self.lifecycle is not Lifecycle.DEAD


# ---------------------------------------------------------------------------
# model matrices

def transition(model: ModelKind, dt: float) -> np.ndarray:
    if model is ModelKind.STATIONARY:
        return np.eye(3)
    if model is ModelKind.CV:
        F = np.eye(4)
        F[0, 2] = F[1, 3] = dt
        return F
    F = np.eye(8)
    F[0, 2] = F[1, 3] = dt
    F[2, 4] = F[3, 5] = dt
    F[0, 4] = F[1, 5] = 0.5 * dt * dt
    return F


def process_noise(model: ModelKind, dt: float, cfg: TrackConfig) -> np.ndarray:
    if not cfg.q_per_second:
        dt = 1.0
    if model is ModelKind.STATIONARY:
        return np.eye(3) * cfg.q_stationary * dt
    if model is ModelKind.CV:
        return np.diag([0.0, 0.0, cfg.q_cv, cfg.q_cv]) * dt
    return np.diag([0.0, 0.0, 0.0, 0.0, cfg.q_ca, cfg.q_ca, cfg.q_heading, cfg.q_heading]) * dt


def observation(model: ModelKind) -> np.ndarray:
    """Rows select x, y and, where the state has it, theta."""
    idx = STATE_INDEX[model]
    rows = [idx.index(0), idx.index(1)] + ([idx.index(6)] if 6 in idx else [])
    H = np.zeros((len(rows), len(idx)))
    H[np.arange(len(rows)), rows] = 1.0
    return H


def wrap_quarter(angle):
    """Wrap into [-pi/4, pi/4): rectangle headings are quarter-turn symmetric."""
    return (np.asarray(angle) + QUARTER / 2) % QUARTER - QUARTER / 2


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


# ---------------------------------------------------------------------------
# Kalman primitives

def kf_predict(mean, cov, F, Q):
    mean = F @ mean
    cov = _symmetrize(F @ cov @ F.T + Q)
    return mean, cov


def innovation(mean, cov, z, H, R, angle_row: int | None = None):
    """Pre-fit residual ``z - H x`` and its covariance ``H P H^T + R``."""
    r = np.asarray(z, dtype=float) - H @ mean
    if angle_row is not None:
        r[angle_row] = wrap_quarter(r[angle_row])
    S = _symmetrize(H @ cov @ H.T + R)
    return r, S


def kf_update(mean, cov, z, H, R, angle_row: int | None = None):
    """
    Joseph-form Kalman correction.

    Returns ``(mean, cov, residual, S)`` where ``residual`` is the pre-fit
    residual.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    r, S = innovation(mean, cov, np.atleast_1d(z), H, R, angle_row)
    try:
        chol = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise SingularInnovation("innovation covariance is not positive definite") from exc
    PHt = cov @ H.T
    K = np.linalg.solve(chol.T, np.linalg.solve(chol, PHt.T)).T
    new_mean = mean + K @ r
    I_KH = np.eye(len(mean)) - K @ H
    new_cov = _symmetrize(I_KH @ cov @ I_KH.T + K @ R @ K.T)
    return new_mean, new_cov, r, S


def log_gaussian(r, S) -> float:
    """Log of the standard multivariate normal density of ``r`` under ``N(0, S)``."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    S = np.atleast_2d(np.asarray(S, dtype=float))
    try:
        chol = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise SingularInnovation("residual covariance is not positive definite") from exc
    w = np.linalg.solve(chol, r)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return float(-0.5 * (len(r) * LOG_2PI + logdet + w @ w))


def gaussian_likelihood(r, S) -> float:
    return math.exp(log_gaussian(r, S))


def update_probabilities(prior, log_likelihood, p_floor: float = 0.0) -> np.ndarray:
    """
    Bayes re-weighting of model probabilities, evaluated in log space.

    Entries that fall under ``p_floor`` are lifted to it and the remaining
    mass is rescaled, so the result sums to one and no model is locked out.
    """
    prior = np.asarray(prior, dtype=float)
    logw = np.asarray(log_likelihood, dtype=float) + np.log(np.maximum(prior, 1e-300))
    logw -= logw.max()
    p = np.exp(logw)
    p /= p.sum()
    return apply_floor(p, p_floor)


def apply_floor(p, p_floor: float) -> np.ndarray:
    p = np.asarray(p, dtype=float).copy()
    if p_floor <= 0:
        return p
    if p_floor * len(p) > 1:
        raise ValueError("p_floor too large for the number of models")
    floored = np.zeros(len(p), dtype=bool)
    for _ in range(len(p)):
        low = (p < p_floor) & ~floored
        if not low.any():
            break
        floored |= low
        free = ~floored
        p[floored] = p_floor
        spare = 1.0 - p_floor * floored.sum()
        p[free] *= spare / p[free].sum()
    return p


# ---------------------------------------------------------------------------
# slots

def init_slot(model: ModelKind, z, probability: float) -> FilterSlot:
    idx = STATE_INDEX[model]
    full = np.zeros(8)
    full[0], full[1] = z[0], z[1]
    if len(z) > 2:
        full[6] = z[2]
    return FilterSlot(model, full[idx], np.diag(INITIAL_VARIANCE[idx]), probability)


def predict(slot: FilterSlot, dt: float, cfg: TrackConfig | None = None) -> FilterSlot:
    cfg = cfg or TrackConfig()
    if not dt > 0:
        raise ValueError("dt must be positive")
    F = transition(slot.model, dt)
    mean, cov = kf_predict(slot.mean, slot.covariance, F, process_noise(slot.model, dt, cfg))
    return replace(slot, mean=mean, covariance=cov)


def _slot_measurement(slot: FilterSlot, z, R):
    z = np.asarray(z, dtype=float)
    R = np.asarray(R, dtype=float)
    H = observation(slot.model)
    k = H.shape[0]
    angle_row = 2 if k == 3 else None
    return z[:k], R[:k, :k], H, angle_row


def slot_innovation(slot: FilterSlot, z, R):
    zk, Rk, H, angle_row = _slot_measurement(slot, z, R)
    return innovation(slot.mean, slot.covariance, zk, H, Rk, angle_row)


def update(slot: FilterSlot, z, R) -> tuple[FilterSlot, np.ndarray]:
    """Correct one slot with a corner measurement ``(x, y, theta)``; returns the pre-fit residual."""
    zk, Rk, H, angle_row = _slot_measurement(slot, z, R)
    mean, cov, r, _ = kf_update(slot.mean, slot.covariance, zk, H, Rk, angle_row)
    return replace(slot, mean=mean, covariance=cov), r


def slot_log_likelihood(slot: FilterSlot, z, R) -> float:
    """
    Log-likelihood of the position part of the pre-fit residual.

    Models observe different measurement subsets, so only the (x, y) block
    that every model shares enters the comparison.
    """
    r, S = slot_innovation(slot, z, R)
    return log_gaussian(r[:2], S[:2, :2])


# ---------------------------------------------------------------------------
# tracks

def corner_identity(rect: OrientedRect, heading: float, corner=None) -> tuple[int, int]:
    """Signs of a corner's offset from the box centre along ``heading`` and its normal."""
    u = np.array([math.cos(heading), math.sin(heading)])
    v = np.array([-u[1], u[0]])
    c = rect.nearest_corner if corner is None else np.asarray(corner)
    off = c - rect.center
    return (1 if off @ u >= 0 else -1, 1 if off @ v >= 0 else -1)


def corner_by_identity(rect: OrientedRect, heading: float, ident: tuple[int, int]) -> np.ndarray:
    u = np.array([math.cos(heading), math.sin(heading)])
    v = np.array([-u[1], u[0]])
    direction = ident[0] * u + ident[1] * v
    off = rect.corners - rect.center
    return rect.corners[int(np.argmax(off @ direction))].copy()


def unwrap_heading(measured: float, reference: float) -> float:
    return float(reference + wrap_quarter(measured - reference))


def corner_switch_compensate(track: Track, new_rect: OrientedRect) -> np.ndarray:
    """
    Measurement ``(x, y, theta)`` for the corner this track follows.

    When the new box's nearest corner is a different corner than the tracked
    one, the tracked corner of the new box is used instead, which is the
    nearest corner shifted by the box edge length(s).
    """
    ref = track.heading
    theta = unwrap_heading(new_rect.heading, ref)
    if corner_identity(new_rect, ref) == track.corner_id:
        corner = new_rect.nearest_corner.copy()
    else:
        corner = corner_by_identity(new_rect, ref, track.corner_id)
    return np.array([corner[0], corner[1], theta])


def new_track(track_id: int, rect: OrientedRect, timestamp: float,
              cfg: TrackConfig | None = None) -> Track:
    cfg = cfg or TrackConfig()
    kinds = cfg.model_kinds
    z = np.array([*rect.nearest_corner, rect.heading])
    slots = [init_slot(kind, z, 1.0 / len(kinds)) for kind in kinds]
    track = Track(id=track_id, slots=slots, corner_id=corner_identity(rect, rect.heading),
                  last_time=timestamp, heading_ref=float(rect.heading))
    if track.hits >= cfg.confirm_hits:
        track.lifecycle = Lifecycle.CONFIRMED
    _record(track, timestamp)
    return track


def _record(track: Track, timestamp: float) -> None:
    best = track.best_slot
    track.history.append(HistoryEntry(
        timestamp=float(timestamp),
        corner=tuple(float(v) for v in best.position),
        heading=float(track.heading),
        mixture=tuple(float(v) for v in track.mixture_position),
        model=best.model.value,
    ))


def predict_track(track: Track, dt: float, cfg: TrackConfig | None = None) -> Track:
    cfg = cfg or TrackConfig()
    slots = [predict(s, dt, cfg) for s in track.slots]
    return replace(track, slots=slots, last_time=track.last_time + dt, history=list(track.history))


def mma_update(track: Track, z, R, cfg: TrackConfig | None = None) -> Track:
    """Score, re-weight and correct the already-predicted slots of a track."""
    cfg = cfg or TrackConfig()
    loglik = [slot_log_likelihood(s, z, R) for s in track.slots]
    probs = update_probabilities(track.probabilities, loglik, cfg.p_floor)
    slots = []
    for slot, p in zip(track.slots, probs):
        corrected, _ = update(slot, z, R)
        slots.append(replace(corrected, probability=float(p)))
    heading_ref = unwrap_heading(float(z[2]), track.heading) if len(z) > 2 else track.heading_ref
    return replace(track, slots=slots, history=list(track.history), heading_ref=heading_ref)


def mma_step(track: Track, z, R, dt: float, cfg: TrackConfig | None = None) -> Track:
    """Predict every slot by ``dt``, then run the multiple-model correction."""
    return mma_update(predict_track(track, dt, cfg), z, R, cfg)


def lifecycle_step(track: Track, matched: bool, cfg: TrackConfig | None = None) -> Track:
    """Hit/miss bookkeeping; the coast itself is the prediction already applied."""
    cfg = cfg or TrackConfig()
    track = replace(track, history=list(track.history), matched=matched)
    if matched:
        track.hits += 1
        track.misses = 0
    else:
        track.misses += 1
    if track.misses >= cfg.max_misses:
        track.lifecycle = Lifecycle.DEAD
    elif track.lifecycle is Lifecycle.TENTATIVE and track.hits >= cfg.confirm_hits:
        track.lifecycle = Lifecycle.CONFIRMED
    return track


def record(track: Track, timestamp: float) -> Track:
    if track.history and timestamp <= track.history[-1].timestamp:
        raise ValueError("history timestamps must increase")
    _record(track, timestamp)
    return track
