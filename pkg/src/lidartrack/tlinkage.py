"""
T-linkage clustering of 2D points into line structures.

Every point gets a continuous preference vector over randomly sampled line
hypotheses; clusters are merged agglomeratively by Tanimoto distance until all
remaining pairs have disjoint preferences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput, NoCluster, UndefinedDistance
from .geometry import COINCIDENT_EPS, Line2, as_points, fit_line_tls, tls_residual_variance

TINY = 1e-300
ORTHOGONAL_EPS = 1e-9


@dataclass(frozen=True)
class TLinkageConfig:
    m: int = 200
    tau: float = 0.15
    min_cluster_size: int = 3
    seed: int = 0
    # larger segments are clustered on an even-stride subsample and the rest
    # of the points are attached to the resulting clusters afterwards
    max_points: int = 160


@dataclass(frozen=True, eq=False)
class HypothesisSet:
    """``m`` lines stored as an ``(m, 3)`` array of normalized ``(a, b, c)`` rows."""

    coeffs: np.ndarray
    tau: float
    pairs: np.ndarray | None = None

    def __post_init__(self):
        if len(self.coeffs) < 1:
            raise ValueError("hypothesis set must hold at least one line")
        if not self.tau > 0:
            raise ValueError("tau must be positive")

    @property
    def lines(self) -> list[Line2]:
        return [Line2(*row) for row in self.coeffs]

    def __len__(self):
        return len(self.coeffs)

    @classmethod
    def from_lines(cls, lines, tau: float) -> "HypothesisSet":
        return cls(np.array([[l.a, l.b, l.c] for l in lines], dtype=float), tau)


@dataclass(eq=False)
class Cluster:
    indices: np.ndarray
    preference: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.indices)


@dataclass(eq=False)
class ClusterSet:
    clusters: list[Cluster]
    outlier_indices: np.ndarray
    dominant_index: int | None

    @property
    def dominant(self) -> Cluster | None:
        if self.dominant_index is None:
            return None
        return self.clusters[self.dominant_index]

    @property
    def inlier_indices(self) -> np.ndarray:
        if not self.clusters:
            return np.empty(0, dtype=int)
        return np.sort(np.concatenate([c.indices for c in self.clusters]))


def default_hypothesis_count(n_points: int, m: int = 200) -> int:
    return max(1, min(m, n_points * (n_points - 1) // 2))


def sample_hypotheses(points, m: int, rng_seed, tau: float = 0.15) -> HypothesisSet:
    """
    Sample ``m`` lines, each through a distinct random pair of non-coincident points.

    When fewer than ``m`` valid pairs exist, every valid pair is used once.
    """
    pts = as_points(points)
    if len(pts) < 2:
        raise DegenerateInput("need at least two points to sample lines")
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.default_rng(rng_seed)
    n = len(pts)
    total = n * (n - 1) // 2
    chosen = None
    if total > 8 * m:
        # sparse draw of linear pair indices; coincident pairs are skipped
        draw = rng.choice(total, size=2 * m, replace=False)
        starts = np.cumsum(np.arange(n - 1, 0, -1)) - np.arange(n - 1, 0, -1)
        ii = np.searchsorted(starts, draw, side="right") - 1
        jj = draw - starts[ii] + ii + 1
        delta = pts[jj] - pts[ii]
        length = np.hypot(delta[:, 0], delta[:, 1])
        valid = np.flatnonzero(length > COINCIDENT_EPS)
        if len(valid) >= m:
            chosen = valid[:m]
    if chosen is None:
        ii, jj = np.triu_indices(n, k=1)
        delta = pts[jj] - pts[ii]
        length = np.hypot(delta[:, 0], delta[:, 1])
        valid = np.flatnonzero(length > COINCIDENT_EPS)
        if len(valid) == 0:
            raise DegenerateInput("all points coincide")
        chosen = rng.choice(valid, size=min(m, len(valid)), replace=False)
    a = -delta[chosen, 1] / length[chosen]
    b = delta[chosen, 0] / length[chosen]
    c = -(a * pts[ii[chosen], 0] + b * pts[ii[chosen], 1])
    pairs = np.column_stack((ii[chosen], jj[chosen]))
    return HypothesisSet(np.column_stack((a, b, c)), tau, pairs)


def preference_matrix(points, hyps: HypothesisSet) -> np.ndarray:
    """``(n, m)`` soft inlier scores, ``exp(-d/tau)`` when ``d < tau`` else 0."""
    pts = as_points(points)
    d = np.abs(pts @ hyps.coeffs[:, :2].T + hyps.coeffs[:, 2])
    return np.where(d < hyps.tau, np.exp(-d / hyps.tau), 0.0)


def preference(point, hyps: HypothesisSet) -> np.ndarray:
    return preference_matrix(np.asarray(point, dtype=float).reshape(1, 2), hyps)[0]


def tanimoto(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("preference vectors must have equal length")
    # the distance is invariant to a joint rescale; this keeps tiny entries from underflowing
    scale = max(float(np.max(np.abs(p), initial=0.0)), float(np.max(np.abs(q), initial=0.0)))
    if scale == 0.0:
        raise UndefinedDistance("Tanimoto distance is undefined for two zero vectors")
    p, q = p / scale, q / scale
    pq = float(p @ q)
    denom = float(p @ p) + float(q @ q) - pq
    return 1.0 - pq / denom


def _tanimoto_to_many(pref: np.ndarray, others: np.ndarray, others_sq: np.ndarray) -> np.ndarray:
    """Tanimoto distance of one vector to each row, with zero/zero taken as 1."""
    dots = others @ pref
    denom = others_sq + pref @ pref - dots
    out = np.ones(len(others))
    ok = denom > 0
    out[ok] = 1.0 - dots[ok] / denom[ok]
    return out


def _agglomerate(prefs: np.ndarray) -> list[list[int]]:
    """
    Greedy T-linkage merging over the rows of ``prefs``.

    Keeps a full distance matrix plus a cached row minimum; a merge only
    rescans the rows whose cached nearest neighbour was one of the merged pair.
    """
    n = len(prefs)
    prefs = prefs.copy()
    sq = np.einsum("ij,ij->i", prefs, prefs)
    gram = prefs @ prefs.T
    # zero/zero pairs give dots 0 over a tiny denominator, i.e. distance 1
    dist = 1.0 - gram / np.maximum(sq[:, None] + sq[None, :] - gram, TINY)
    np.fill_diagonal(dist, np.inf)
    row_arg = dist.argmin(axis=1)
    row_min = dist[np.arange(n), row_arg]
    members = [[i] for i in range(n)]
    alive = np.ones(n, dtype=bool)
    dead_penalty = np.zeros(n)
    threshold = 1.0 - ORTHOGONAL_EPS

    while True:
        i = int(row_min.argmin())
        if not row_min[i] < threshold:
            break
        j = int(row_arg[i])
        p, q = (i, j) if i < j else (j, i)

        members[p].extend(members[q])
        members[q] = []
        alive[q] = False
        dead_penalty[q] = np.inf
        dist[q, :] = np.inf
        dist[:, q] = np.inf
        row_min[q] = np.inf

        pp = np.minimum(prefs[p], prefs[q], out=prefs[p])
        sq[p] = pp @ pp
        dots = prefs @ pp
        d_new = 1.0 - dots / np.maximum(sq + sq[p] - dots, TINY) + dead_penalty
        d_new[p] = np.inf
        dist[p, :] = d_new
        dist[:, p] = d_new

        stale = (row_arg == p) | (row_arg == q)
        stale[p] = True
        rows = stale.nonzero()[0]
        sub = dist[rows]
        row_arg[rows] = sub.argmin(axis=1)
        row_min[rows] = sub.min(axis=1)
        # merged cluster may now be the nearest neighbour of other rows
        closer = d_new < row_min
        row_min[closer] = d_new[closer]
        row_arg[closer] = p

    return [sorted(members[k]) for k in np.flatnonzero(alive)]


def _pick_dominant(points: np.ndarray, clusters: list[Cluster]) -> int | None:
    if not clusters:
        return None
    sizes = np.array([len(c) for c in clusters])
    best = np.flatnonzero(sizes == sizes.max())
    if len(best) == 1:
        return int(best[0])
    spread = [tls_residual_variance(points[clusters[k].indices]) for k in best]
    return int(best[int(np.argmin(spread))])


def tlinkage_cluster(points, hyps: HypothesisSet, cfg: TLinkageConfig | None = None) -> ClusterSet:
    """
    Cluster points by T-linkage over the given hypotheses.

    Clusters with fewer than ``cfg.min_cluster_size`` points are reported as
    outliers. Cluster preference is the element-wise minimum of its members.
    """
    cfg = cfg or TLinkageConfig()
    pts = as_points(points)
    n = len(pts)
    if n == 0:
        raise DegenerateInput("need at least one point")
    prefs = preference_matrix(pts, hyps)

    if n > cfg.max_points:
        sample = np.unique(np.linspace(0, n - 1, cfg.max_points).round().astype(int))
    else:
        sample = np.arange(n)

    groups = [sample[g] for g in _agglomerate(prefs[sample])]
    kept = [np.asarray(g) for g in groups if len(g) >= cfg.min_cluster_size]
    cluster_prefs = [prefs[g].min(axis=0) for g in kept]

    if len(sample) < n and kept:
        rest = np.setdiff1d(np.arange(n), sample)
        cp = np.array(cluster_prefs)
        cp_sq = np.einsum("ij,ij->i", cp, cp)
        pr = prefs[rest]
        dots = pr @ cp.T
        denom = np.einsum("ij,ij->i", pr, pr)[:, None] + cp_sq[None, :] - dots
        d = 1.0 - dots / np.maximum(denom, TINY)
        nearest = d.argmin(axis=1)
        ok = d[np.arange(len(rest)), nearest] < 1.0 - ORTHOGONAL_EPS
        extra = [rest[ok & (nearest == k)] for k in range(len(kept))]
        for k, add in enumerate(extra):
            if len(add):
                kept[k] = np.sort(np.concatenate((kept[k], add)))
                cluster_prefs[k] = np.minimum(cluster_prefs[k], prefs[add].min(axis=0))

    kept = [np.asarray(g, dtype=int) for g in kept]
    clusters = [Cluster(g, cp) for g, cp in zip(kept, cluster_prefs)]
    clusters.sort(key=lambda c: int(c.indices[0]))
    assigned = np.concatenate([c.indices for c in clusters]) if clusters else np.empty(0, int)
    outliers = np.setdiff1d(np.arange(n), assigned)
    return ClusterSet(clusters, outliers, _pick_dominant(pts, clusters))


def dominant_heading(cs: ClusterSet, points) -> float:
    """TLS heading in [0, pi) of the dominant cluster."""
    if cs.dominant is None:
        raise NoCluster("every point was rejected as an outlier")
    pts = as_points(points)
    return fit_line_tls(pts[cs.dominant.indices]).heading


def cluster_segment(points, cfg: TLinkageConfig | None = None, seed=None) -> ClusterSet:
    """Sample hypotheses for a point set and cluster it in one call."""
    cfg = cfg or TLinkageConfig()
    pts = as_points(points)
    m = default_hypothesis_count(len(pts), cfg.m)
    hyps = sample_hypotheses(pts, m, cfg.seed if seed is None else seed, cfg.tau)
    return tlinkage_cluster(pts, hyps, cfg)

