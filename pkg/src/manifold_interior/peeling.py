"""Boundary balls of a union of equal balls, its peeling, the interior test and
the noisy-support radius estimator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .geometry import PointCloud, _pair_dist, as_cloud, maxmin_nn, unit_ball_volume

TWO_PI = 2.0 * math.pi
# merged arcs leaving gaps no wider than this (radians) count as covering
ARC_TOL = 1e-12
# relative slack a probe point must clear to certify an uncovered direction
_PROBE_MARGIN = 1e-9
_CHUNK = 512


@dataclass(frozen=True)
class BallUnion:
    """Union of closed balls ``B(X_i, radius)`` centred at a point cloud.

    ``centers`` may only be empty for the output of :func:`peel`.
    """

    centers: PointCloud
    radius: float
    allow_empty: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "centers", as_cloud(self.centers))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0 or not math.isfinite(self.radius):
            raise ValueError("ball radius must be positive and finite")
        if len(self.centers) == 0 and not self.allow_empty:
            raise ValueError("a ball union needs at least one center")

    def __len__(self) -> int:
        return len(self.centers)

    @property
    def dim(self) -> int:
        return self.centers.dim


@dataclass(frozen=True)
class BoundaryClassification:
    """``flags[i]`` is True iff ``B(X_i, r)`` is a boundary ball."""

    flags: np.ndarray
    method: str
    samples: Optional[int] = None

    def __post_init__(self):
        flags = np.array(self.flags, dtype=bool, copy=True)
        flags.setflags(write=False)
        object.__setattr__(self, "flags", flags)
        if self.method not in ("exact2d", "montecarlo"):
            raise ValueError(f"unknown classification method {self.method!r}")
        if self.method == "montecarlo" and not (self.samples and self.samples >= 1):
            raise ValueError("montecarlo classification needs a positive sample count")

    def __len__(self) -> int:
        return self.flags.shape[0]

    @property
    def boundary(self) -> np.ndarray:
        return np.flatnonzero(self.flags)

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.flags)


@dataclass(frozen=True)
class InteriorDecision:
    nonempty_interior: bool
    radius_used: float
    beta: float
    peel_size: int
    n: int
    status: str = "ok"

    def as_record(self) -> dict:
        return {
            "decision": "nonempty" if self.nonempty_interior else "empty",
            "r_n": self.radius_used,
            "peel_size": self.peel_size,
            "n": self.n,
            "status": self.status,
        }


@dataclass(frozen=True)
class NoiseRadiusParams:
    """Constant ``c`` and density lower bound ``f0`` of the radius
    ``rho_n = c (log n / n)^(1/d)``."""

    c: float
    f0: float

    def __post_init__(self):
        if not self.f0 > 0:
            raise ValueError("f0 must be positive")
        if not self.c > 0:
            raise ValueError("c must be positive")

    @staticmethod
    def minimal_c(f0: float, d: int) -> float:
        return (6.0 / (f0 * unit_ball_volume(d))) ** (1.0 / d)

    @classmethod
    def with_margin(cls, f0: float, d: int, factor: float = 1.1) -> "NoiseRadiusParams":
        return cls(c=factor * cls.minimal_c(f0, d), f0=f0)

    def validate(self, d: int) -> None:
        if not self.c > self.minimal_c(self.f0, d):
            raise ValueError(
                f"c={self.c} must exceed (6/(f0*omega_d))^(1/d)={self.minimal_c(self.f0, d)}"
            )

    def rho(self, n: int, d: int) -> float:
        return self.c * (math.log(n) / n) ** (1.0 / d)


def arc_half_width(d, r):
    """Half-width of the arc of ``dB(X_i, r)`` inside the open ball ``B(X_j, r)``
    when ``||X_i - X_j|| = d`` with ``0 < d < 2r``."""
    return np.arccos(np.asarray(d, dtype=np.float64) / (2.0 * r))


def circle_covered(center, neighbors, r: float, tol: float = ARC_TOL) -> bool:
    """Whether the circle ``dB(center, r)`` lies inside the union of the open
    balls ``B(X_j, r)`` for the given neighbour centres."""
    nb = np.asarray(neighbors, dtype=np.float64).reshape(-1, 2)
    c = np.asarray(center, dtype=np.float64)
    d = _pair_dist(nb, c)
    keep = (d > 0) & (d < 2.0 * r)
    # each arc is shorter than a half circle, so fewer than 3 cannot close up
    if np.count_nonzero(keep) < 3:
        return False
    v = nb[keep] - c
    theta = np.arctan2(v[:, 1], v[:, 0])
    h = arc_half_width(d[keep], r)
    start = np.mod(theta - h, TWO_PI)
    covered, _ = _row_coverage(start[None, :], (start + 2.0 * h)[None, :],
                               np.ones((1, start.size), dtype=bool), tol)
    return bool(covered[0])


def _row_coverage(start: np.ndarray, end: np.ndarray, valid: np.ndarray, tol: float):
    """Merge padded rows of open arcs ``(start, end)`` (``start`` in
    ``[0, 2 pi)``, ``end = start + width``) and test full coverage.

    Angles are measured from the start of the first valid arc of each row,
    so a sweep from 0 only has to account for arcs running past ``2 pi``,
    which cover ``[0, end - 2 pi)``.  Returns ``(covered, gap_mid)`` where
    ``gap_mid`` is the (original) angle of the midpoint of the widest gap of
    an uncovered row, NaN for covered rows.
    """
    rows, width = start.shape
    ar = np.arange(rows)
    cnt = valid.sum(axis=1)
    ref_col = np.argmax(valid, axis=1)
    ref = start[ar, ref_col]
    s = np.mod(start - ref[:, None], TWO_PI)
    s[ar, ref_col] = 0.0
    e = s + (end - start)
    big = 4.0 * TWO_PI
    s = np.where(valid, s, big)
    e = np.where(valid, e, -np.inf)
    head = np.maximum(e[ar, ref_col], np.max(e - TWO_PI, axis=1))
    order = np.argsort(s, axis=1, kind="stable")
    s = np.take_along_axis(s, order, axis=1)
    e = np.take_along_axis(e, order, axis=1)
    reach = np.maximum.accumulate(np.maximum(e, head[:, None]), axis=1)
    live = np.arange(width)[None, :] < cnt[:, None]
    prev = np.concatenate([head[:, None], reach[:, :-1]], axis=1)
    gaps = np.where(live, s - prev, -np.inf)
    last = reach[ar, np.maximum(cnt - 1, 0)]
    tail = TWO_PI - last
    covered = (cnt >= 3) & ~np.any(gaps > tol, axis=1) & (tail <= tol)

    k = np.argmax(gaps, axis=1)
    inner_w = gaps[ar, k]
    use_tail = tail >= inner_w
    with np.errstate(invalid="ignore"):
        mid = np.where(use_tail, 0.5 * (last + TWO_PI), 0.5 * (prev[ar, k] + s[ar, k]))
        mid = np.mod(mid + ref, TWO_PI)
    mid = np.where(cnt == 0, 0.0, mid)
    return covered, np.where(covered, np.nan, mid)


def _probe_clear(pts: np.ndarray, tree: cKDTree, idx: np.ndarray, angles: np.ndarray, r: float):
    """True where ``X_i + r (cos a, sin a)`` is clearly outside every other
    open ball (relative slack ``_PROBE_MARGIN``)."""
    n = len(pts)
    y = pts[idx] + r * np.column_stack([np.cos(angles), np.sin(angles)])
    kq = min(3, n)
    _, cand = tree.query(y, k=kq)
    cand = cand.reshape(len(idx), kq)
    dist = _pair_dist(pts[cand], y[:, None, :])
    dist[cand == idx[:, None]] = np.inf
    # a duplicate of X_i sits exactly at distance r and is never cleared
    return dist.min(axis=1) >= r * (1.0 + _PROBE_MARGIN)


def boundary_balls_2d(u: BallUnion, probe: bool = True, knn_width: int = 32) -> BoundaryClassification:
    """Exact boundary-ball classification for planar unions.

    A ball is non-boundary iff its circle is covered by the open balls of the
    other centres; arcs are merged per ball on the angle axis.

    All balls are first processed together using their ``knn_width`` nearest
    neighbours; that pass is already exact for balls with fewer neighbours
    within ``2r``.  For the others a covered verdict is final (more arcs
    only cover more), and an uncovered one is confirmed by a probe point in
    the widest gap or else recomputed with all neighbours.  ``probe=False``
    forces the plain per-ball computation.
    """
    if u.dim != 2:
        raise ValueError("boundary_balls_2d needs planar centers; use boundary_balls_mc")
    pts = u.centers.points
    n = len(pts)
    r = u.radius
    flags = np.ones(n, dtype=bool)
    if n < 4:
        return BoundaryClassification(flags, "exact2d")
    tree = cKDTree(pts)
    if not probe:
        _exact_rows(pts, tree, r, np.arange(n), flags)
        return BoundaryClassification(flags, "exact2d")

    k = min(n, knn_width + 1)
    _, nb = tree.query(pts, k=k)
    nb = nb.reshape(n, k)
    vec = pts[nb] - pts[:, None, :]
    d = _pair_dist(pts[nb], pts[:, None, :])
    valid = (d > 0) & (d < 2.0 * r)
    complete = (k == n) | (d.max(axis=1) > 2.0 * r * (1.0 + 1e-9))
    theta = np.arctan2(vec[..., 1], vec[..., 0])
    h = np.arccos(np.clip(d / (2.0 * r), 0.0, 1.0))
    start = np.mod(theta - h, TWO_PI)
    covered, mid = _row_coverage(start, start + 2.0 * h, valid, ARC_TOL)
    flags[:] = ~covered

    pending = np.flatnonzero(~complete & ~covered)
    if pending.size:
        clear = _probe_clear(pts, tree, pending, mid[pending], r)
        _exact_rows(pts, tree, r, pending[~clear], flags)
    return BoundaryClassification(flags, "exact2d")


def _exact_rows(pts, tree, r, rows, flags):
    for s in range(0, len(rows), _CHUNK):
        chunk = rows[s : s + _CHUNK]
        neigh = tree.query_ball_point(pts[chunk], 2.0 * r)
        for i, nb in zip(chunk, neigh):
            flags[i] = len(nb) < 4 or not circle_covered(pts[i], pts[nb], r)


def _ball_rng(seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def boundary_balls_mc(
    u: BallUnion, sphere_samples: int = 10_000, seed: int = 0
) -> BoundaryClassification:
    """Monte-Carlo boundary test in any dimension.

    Draws ``sphere_samples`` uniform points on each sphere and flags the ball as
    boundary as soon as one of them is outside every other open ball.  A True
    flag is always right; a False flag can miss an uncovered cap of relative
    size ``q`` with probability ``(1 - q)^sphere_samples``.
    """
    if sphere_samples < 1:
        raise ValueError("sphere_samples must be >= 1")
    pts = u.centers.points
    n, dim = pts.shape
    r = u.radius
    flags = np.ones(n, dtype=bool)
    if n == 1:
        return BoundaryClassification(flags, "montecarlo", sphere_samples)
    tree = cKDTree(pts)
    neigh = tree.query_ball_point(pts, 2.0 * r)
    batch = max(1, 2_000_000 // max(1, dim * 16))
    for i in range(n):
        nb = np.asarray([j for j in neigh[i] if j != i], dtype=np.intp)
        if nb.size == 0:
            continue
        others = pts[nb]
        rng = _ball_rng(seed, i)
        covered_all = True
        for s in range(0, sphere_samples, batch):
            m = min(batch, sphere_samples - s)
            g = rng.standard_normal((m, dim))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            y = pts[i] + r * g
            inside = np.zeros(m, dtype=bool)
            for c in range(0, len(others), 64):
                dd = _pair_dist(y[:, None, :], others[None, c : c + 64, :])
                inside |= (dd < r).any(axis=1)
            if not inside.all():
                covered_all = False
                break
        flags[i] = not covered_all
    return BoundaryClassification(flags, "montecarlo", sphere_samples)


def classify(u: BallUnion, method: str = "auto", mc_samples: int = 10_000, seed: int = 0):
    if method == "auto":
        method = "exact2d" if u.dim == 2 else "mc"
    if method == "exact2d":
        return boundary_balls_2d(u)
    if method in ("mc", "montecarlo"):
        return boundary_balls_mc(u, mc_samples, seed)
    raise ValueError(f"unknown method {method!r}; expected exact2d, mc or auto")


def peel(u: BallUnion, cls: BoundaryClassification) -> BallUnion:
    """Sub-union of the non-boundary balls (possibly empty)."""
    if len(cls) != len(u):
        raise ValueError(
            f"classification has {len(cls)} flags for a union of {len(u)} balls"
        )
    return BallUnion(u.centers.subset(cls.interior), u.radius, allow_empty=True)


def beta_threshold(d: int) -> float:
    return 6.0 ** (1.0 / d)


def decide_interior(
    cloud,
    beta: float = 2.5,
    method: str = "auto",
    mc_samples: int = 10_000,
    seed: int = 0,
) -> InteriorDecision:
    """Interior test: peel the union of balls of radius
    ``beta * max_i min_{j != i} ||X_j - X_i||`` and report whether anything is
    left."""
    cloud = as_cloud(cloud)
    if beta <= beta_threshold(cloud.dim):
        raise ValueError(
            f"beta below theorem threshold: need beta > 6^(1/{cloud.dim}) = "
            f"{beta_threshold(cloud.dim):.6f}"
        )
    spacing = maxmin_nn(cloud)
    if spacing == 0:
        raise ValueError("degenerate sample: every point is duplicated")
    r_n = beta * spacing
    u = BallUnion(cloud, r_n)
    peeled = peel(u, classify(u, method, mc_samples, seed))
    size = len(peeled)
    return InteriorDecision(size > 0, r_n, float(beta), size, len(cloud))


def estimate_noise_radius(
    cloud,
    params: NoiseRadiusParams,
    method: str = "auto",
    include_self: bool = True,
    mc_samples: int = 10_000,
    seed: int = 0,
) -> tuple[float, np.ndarray]:
    """Thickness estimate ``R_hat = max_i min_{j in I_bb} ||X_i - X_j||`` where
    ``I_bb`` indexes the boundary balls at radius ``rho_n``.

    With ``include_self`` (the default) ``j = i`` is allowed, so members of
    ``I_bb`` contribute 0; ``include_self=False`` excludes it.
    Returns ``(R_hat, I_bb)``.
    """
    cloud = as_cloud(cloud)
    n, d = len(cloud), cloud.dim
    if n < 2:
        raise ValueError("degenerate sample: need at least 2 points")
    params.validate(d)
    rho = params.rho(n, d)
    cls = classify(BallUnion(cloud, rho), method, mc_samples, seed)
    bb = cls.boundary
    if bb.size == 0:
        raise ValueError("no boundary balls; radius too large")
    pts = cloud.points
    tree = cKDTree(pts[bb])
    if include_self:
        _, j = tree.query(pts, k=1)
        return float(np.max(_pair_dist(pts, pts[bb[j]]))), bb
    if bb.size < 2:
        raise ValueError("need two boundary balls when j = i is excluded")
    _, j = tree.query(pts, k=2)
    first = bb[j[:, 0]]
    pick = np.where(first == np.arange(n), bb[j[:, 1]], first)
    return float(np.max(_pair_dist(pts, pts[pick]))), bb
