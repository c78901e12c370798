"""
Ray-casting simulator for a multi-layer 2D LIDAR at the origin.

Vehicles are rectangles moving under closed-form stationary, constant
velocity or constant acceleration motion with fixed heading. Each layer casts
one ray per angular step; the nearest edge hit wins, so occlusion falls out of
the ray test. Layers differ only by a per-frame bearing offset and independent
range noise, which reproduces the small cross-layer disagreement of real
multi-layer sensors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidSpec
from .segmentation import LABEL_NONE, Scan
from .tracking import ModelKind

VIEW_L = "L"
VIEW_SIDE = "side"
VIEW_REAR = "rear"
# an edge counts as seen once it holds this many clean returns
VIEW_EDGE_MIN_POINTS = 3
OBSERVED_MIN_POINTS = 5


@dataclass(frozen=True)
class SensorSpec:
    resolution_deg: float = 0.25
    max_range: float = 50.0
    layers: int = 4
    sigma: float = 0.05
    outlier_rate: float = 0.02
    jitter_deg: float = 0.1


@dataclass(frozen=True)
class VehicleSpec:
    """Footprint and motion; ``(x, y)`` is the footprint centre at ``spawn``."""

    length: float = 4.5
    width: float = 1.8
    motion: ModelKind = ModelKind.STATIONARY
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    ax: float = 0.0
    ay: float = 0.0
    spawn: float = 0.0
    end: float = math.inf

    def pose(self, t: float) -> tuple[float, float, float]:
        tau = t - self.spawn
        if self.motion is ModelKind.STATIONARY:
            return self.x, self.y, self.theta
        if self.motion is ModelKind.CV:
            return self.x + self.vx * tau, self.y + self.vy * tau, self.theta
        return (self.x + self.vx * tau + 0.5 * self.ax * tau * tau,
                self.y + self.vy * tau + 0.5 * self.ay * tau * tau, self.theta)

    def present(self, t: float) -> bool:
        return self.spawn <= t < self.end

    def corners(self, t: float) -> np.ndarray:
        return footprint(*self.pose(t), self.length, self.width)


@dataclass(frozen=True)
class ScenarioSpec:
    duration: float = 10.0
    scan_rate: float = 12.5
    sensor: SensorSpec = field(default_factory=SensorSpec)
    vehicles: tuple[VehicleSpec, ...] = ()

    @property
    def n_frames(self) -> int:
        return int(math.floor(self.duration * self.scan_rate + 1e-9))

    def validate(self) -> "ScenarioSpec":
        s = self.sensor
        checks = [
            ("scenario.duration", self.duration > 0),
            ("scenario.scan_rate", self.scan_rate > 0),
            ("sensor.resolution_deg", 0 < s.resolution_deg <= 360),
            ("sensor.max_range", s.max_range > 0),
            ("sensor.layers", s.layers >= 1),
            ("sensor.sigma", s.sigma >= 0),
            ("sensor.outlier_rate", 0 <= s.outlier_rate < 1),
            ("sensor.jitter_deg", s.jitter_deg >= 0),
        ]
        for key, ok in checks:
            if not ok:
                raise InvalidSpec(f"invalid value for {key}", key)
        for i, v in enumerate(self.vehicles):
            if not (v.length > 0 and v.width > 0):
                raise InvalidSpec(f"vehicle.{i} footprint must be positive", f"vehicle.{i}.length")
            if not v.end > v.spawn:
                raise InvalidSpec(f"vehicle.{i}.end must follow spawn", f"vehicle.{i}.end")
        return self


@dataclass(frozen=True)
class VehicleTruth:
    id: int
    x: float
    y: float
    theta: float
    motion: ModelKind
    corners: np.ndarray
    nearest_corner: np.ndarray
    n_points: int
    edge_counts: tuple[int, int, int, int]
    view: str | None

    @property
    def observed(self) -> bool:
        return self.view is not None and self.n_points >= OBSERVED_MIN_POINTS


@dataclass
class FrameTruth:
    frame_id: int
    timestamp: float
    vehicles: list[VehicleTruth]

    def by_id(self) -> dict[int, VehicleTruth]:
        return {v.id: v for v in self.vehicles}


@dataclass
class GroundTruth:
    frames: list[FrameTruth]

    def observations(self) -> list[tuple[int, VehicleTruth]]:
        return [(f.frame_id, v) for f in self.frames for v in f.vehicles if v.observed]


def footprint(x: float, y: float, theta: float, length: float, width: float) -> np.ndarray:
    """
    Corners counter-clockwise: rear-right, front-right, front-left, rear-left.

    Edge k joins corner k to k+1, so edges 0 and 2 are the long sides and
    edges 1 (front) and 3 (rear) the short ones.
    """
    u = np.array([math.cos(theta), math.sin(theta)])
    v = np.array([-u[1], u[0]])
    local = np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]])
    return np.array([x, y]) + (local[:, :1] * length) * u + (local[:, 1:] * width) * v


def cast_rays(bearings: np.ndarray, edges: np.ndarray, max_range: float):
    """
    Nearest hit per ray from the origin.

    ``edges`` is ``(E, 2, 2)``. Returns ``(range, edge_index)`` with ``inf``/-1
    where nothing lies within ``max_range``.
    """
    n = len(bearings)
    if len(edges) == 0:
        return np.full(n, np.inf), np.full(n, -1)
    u = np.column_stack((np.cos(bearings), np.sin(bearings)))  # (n, 2)
    A = edges[:, 0, :]  # (E, 2)
    e = edges[:, 1, :] - A
    cross_ue = u[:, :1] * e[None, :, 1] - u[:, 1:] * e[None, :, 0]  # (n, E)
    cross_Ae = A[:, 0] * e[:, 1] - A[:, 1] * e[:, 0]  # (E,)
    cross_Au = A[None, :, 0] * u[:, 1:] - A[None, :, 1] * u[:, :1]  # (n, E)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = cross_Ae[None, :] / cross_ue
        s = cross_Au / cross_ue
    hit = (np.abs(cross_ue) > 1e-12) & (t > 0) & (s >= 0) & (s <= 1) & (t <= max_range)
    t = np.where(hit, t, np.inf)
    idx = np.argmin(t, axis=1)
    rng = t[np.arange(n), idx]
    idx = np.where(np.isfinite(rng), idx, -1)
    return rng, idx


def classify_view(edge_counts) -> str | None:
    seen = [k for k, c in enumerate(edge_counts) if c >= VIEW_EDGE_MIN_POINTS]
    if len(seen) >= 2:
        return VIEW_L
    if len(seen) == 1:
        return VIEW_SIDE if seen[0] in (0, 2) else VIEW_REAR
    return None


def simulate(spec: ScenarioSpec, seed: int = 0) -> tuple[list[Scan], GroundTruth]:
    """Render every frame of a scenario; deterministic for a given seed."""
    spec.validate()
    sensor = spec.sensor
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x11DA]))
    res = math.radians(sensor.resolution_deg)
    n_rays = int(round(2 * math.pi / res))
    nominal = -math.pi + np.arange(n_rays) * (2 * math.pi / n_rays)
    jitter = math.radians(sensor.jitter_deg)

    scans, truths = [], []
    for frame in range(spec.n_frames):
        t = frame / spec.scan_rate
        present = [(vid, v) for vid, v in enumerate(spec.vehicles) if v.present(t)]
        corners = {vid: v.corners(t) for vid, v in present}
        edges = np.array([[corners[vid][k], corners[vid][(k + 1) % 4]]
                          for vid, _ in present for k in range(4)]).reshape(-1, 2, 2)
        owner = np.repeat([vid for vid, _ in present], 4) if present else np.empty(0, int)

        ranges, bearings, layers, labels, edge_ids = [], [], [], [], []
        for layer in range(sensor.layers):
            offset = rng.normal(0.0, jitter) if jitter > 0 else 0.0
            r, idx = cast_rays(nominal + offset, edges, sensor.max_range)
            keep = idx >= 0
            ranges.append(r[keep])
            bearings.append((nominal + offset)[keep])
            layers.append(np.full(keep.sum(), layer))
            labels.append(owner[idx[keep]] if keep.any() else np.empty(0, int))
            edge_ids.append(idx[keep] % 4)
        r = np.concatenate(ranges)
        b = np.concatenate(bearings)
        lay = np.concatenate(layers)
        lab = np.concatenate(labels).astype(int)
        edge_k = np.concatenate(edge_ids).astype(int)

        if sensor.sigma > 0:
            r = r + rng.normal(0.0, sensor.sigma, len(r))
        outlier = rng.random(len(r)) < sensor.outlier_rate
        r = np.where(outlier, sensor.max_range - rng.random(len(r)) * sensor.max_range, r)
        lab = np.where(outlier, LABEL_NONE, lab)
        valid = r > 0
        r, b, lay, lab, edge_k = r[valid], b[valid], lay[valid], lab[valid], edge_k[valid]

        scans.append(Scan.from_polar(frame, t, r, b, lay, lab))

        vehicles = []
        for vid, v in present:
            mine = lab == vid
            counts = tuple(int(np.sum(mine & (edge_k == k))) for k in range(4))
            c = corners[vid]
            x, y, theta = v.pose(t)
            vehicles.append(VehicleTruth(
                id=vid, x=x, y=y, theta=theta, motion=v.motion, corners=c,
                nearest_corner=c[int(np.argmin(np.einsum("ij,ij->i", c, c)))],
                n_points=int(mine.sum()), edge_counts=counts, view=classify_view(counts),
            ))
        truths.append(FrameTruth(frame, t, vehicles))
    return scans, GroundTruth(truths)


# ---------------------------------------------------------------------------
# canned corpora

def _jittered(rng, base: VehicleSpec, pos=0.5, ang_deg=3.0, speed=0.05) -> VehicleSpec:
    f = 1.0 + rng.uniform(-speed, speed)
    return VehicleSpec(
        length=base.length, width=base.width, motion=base.motion,
        x=base.x + rng.uniform(-pos, pos), y=base.y + rng.uniform(-pos, pos) * 0.2,
        theta=base.theta + math.radians(rng.uniform(-ang_deg, ang_deg)),
        vx=base.vx * f, vy=base.vy * f, ax=base.ax, ay=base.ay,
        spawn=base.spawn, end=base.end,
    )


def _heading_aligned(v: VehicleSpec) -> VehicleSpec:
    """Point moving vehicles along their velocity after jittering."""
    speed = math.hypot(v.vx, v.vy)
    accel = math.hypot(v.ax, v.ay)
    if speed == 0 and accel == 0:
        return v
    c, s = math.cos(v.theta), math.sin(v.theta)
    return VehicleSpec(length=v.length, width=v.width, motion=v.motion, x=v.x, y=v.y,
                       theta=v.theta, vx=speed * c, vy=speed * s, ax=accel * c, ay=accel * s,
                       spawn=v.spawn, end=v.end)


TABLE_I_FULL = {"trackers": 60, "observations": 5353, "frames": 1368,
                "L": 5037, "side": 115, "rear": 201}


def _scenario(vehicles, seed, duration, sensor=None, align=True) -> ScenarioSpec:
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xC0C0]))
    jittered = []
    for base in vehicles:
        v = _jittered(rng, base)
        jittered.append(_heading_aligned(v) if align else v)
    return ScenarioSpec(duration=duration, scan_rate=12.5, sensor=sensor or SensorSpec(),
                        vehicles=tuple(jittered)).validate()


def tableI_scenario(seed: int = 0) -> ScenarioSpec:
    """
    Six vehicles over 137 frames, giving roughly 94% L-shape, 2% side and 4% rear views.

    Most vehicles are seen at an angle (L-shapes); one follows the ego lane
    ahead for a while (rear-only) and one passes abeam (side-only briefly).
    """
    V = VehicleSpec
    d = math.radians
    vehicles = [
        V(motion=ModelKind.STATIONARY, x=-9.0, y=7.0, theta=d(20)),
        V(motion=ModelKind.CV, x=-24.0, y=-7.0, theta=0.0, vx=4.6),
        V(motion=ModelKind.CV, x=14.0, y=0.0, theta=0.0, vx=1.0, end=1.6),
        V(motion=ModelKind.CV, x=12.0, y=12.0, theta=d(90), vx=3.0, spawn=2.8),
        V(motion=ModelKind.CA, x=-14.0, y=-16.0, theta=d(-160), vx=1.0, ax=0.6, spawn=4.0),
        V(motion=ModelKind.STATIONARY, x=18.0, y=9.0, theta=d(-20), spawn=3.6),
    ]
    return _scenario(vehicles, seed, duration=10.96)


def _reversed(v: VehicleSpec, duration: float) -> VehicleSpec:
    """Same lane driven the other way: start where ``v`` ends, heading turned half a revolution."""
    x, y, _ = v.pose(v.spawn + duration)
    c, s = math.cos(v.theta), math.sin(v.theta)
    speed = math.hypot(v.vx, v.vy)
    accel = math.hypot(v.ax, v.ay)
    return VehicleSpec(length=v.length, width=v.width, motion=v.motion, x=x, y=y,
                       theta=v.theta + math.pi, vx=-speed * c, vy=-speed * s,
                       ax=-accel * c, ay=-accel * s, spawn=v.spawn, end=v.end)


def mixed_scenario(seed: int = 0) -> ScenarioSpec:
    """
    Three parked and three moving vehicles, spread out so none occludes another.

    Each moving vehicle drives its lane in a seed-dependent direction, so that
    approaching and receding motion are equally represented across seeds.
    """
    V = VehicleSpec
    d = math.radians
    vehicles = [
        V(motion=ModelKind.STATIONARY, x=-12.0, y=14.0, theta=d(15)),
        V(motion=ModelKind.STATIONARY, x=14.0, y=-16.0, theta=d(-35)),
        V(motion=ModelKind.STATIONARY, x=10.0, y=16.0, theta=d(60)),
        V(motion=ModelKind.CV, x=-20.0, y=-6.0, theta=0.0, vx=5.0),
        V(motion=ModelKind.CV, x=20.0, y=6.0, theta=math.pi, vx=4.0),
        V(motion=ModelKind.CA, x=-24.0, y=-20.0, theta=d(90), vx=1.0, ax=0.8),
    ]
    duration = 8.0
    spec = _scenario(vehicles, seed, duration=duration)
    flips = np.random.default_rng(np.random.SeedSequence([int(seed), 0xF11B])).random(len(vehicles)) < 0.5
    moved = tuple(_reversed(v, duration) if flip and v.motion is not ModelKind.STATIONARY else v
                  for v, flip in zip(spec.vehicles, flips))
    return replace(spec, vehicles=moved).validate()


def three_vehicle_scenario(seed: int = 0) -> ScenarioSpec:
    """
    Three vehicles on separated paths that never cross or shadow each other.

    The two lanes run on opposite sides of the sensor and the parked car sits
    beyond both lane ends, so every line of sight stays clear.
    """
    V = VehicleSpec
    vehicles = [
        V(motion=ModelKind.CV, x=-15.0, y=8.0, theta=0.0, vx=3.0),
        V(motion=ModelKind.CV, x=12.0, y=-9.0, theta=math.pi, vx=3.5),
        V(motion=ModelKind.STATIONARY, x=18.0, y=2.0, theta=math.radians(50)),
    ]
    return _scenario(vehicles, seed, duration=8.0)


def single_vehicle_scenario(seed: int = 0) -> ScenarioSpec:
    V = VehicleSpec
    return _scenario([V(motion=ModelKind.CV, x=-12.0, y=9.0, theta=0.0, vx=3.0)],
                     seed, duration=6.0)


def corpus_tableI(seed: int = 0) -> tuple[list[Scan], GroundTruth]:
    return simulate(tableI_scenario(seed), seed)


CORPORA = {
    "tableI": tableI_scenario,
    "mixed": mixed_scenario,
    "three": three_vehicle_scenario,
    "single": single_vehicle_scenario,
}


def view_histogram(gt: GroundTruth) -> dict[str, int]:
    hist = {VIEW_L: 0, VIEW_SIDE: 0, VIEW_REAR: 0}
    for _, v in gt.observations():
        hist[v.view] += 1
    return hist
