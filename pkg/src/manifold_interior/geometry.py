"""Point-cloud primitives: exact nearest neighbours, max-min spacing, Hausdorff
distances and the annulus used as reference manifold in the simulations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

# kd-tree partitioning only pays off (and is only used) in low dimension
KDTREE_MAX_DIM = 16


@dataclass(frozen=True)
class PointCloud:
    """An ordered, immutable set of points in R^d.

    Duplicated points are allowed.  ``points`` is stored as a read-only
    ``(n, dim)`` float64 array; index ``i`` always refers to the same point.
    """

    points: np.ndarray
    dim: int = field(default=0)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim == 1:
            if self.dim in (0, 1) and pts.size > 0:
                pts = pts.reshape(-1, 1)
            elif pts.size == 0:
                pts = pts.reshape(0, max(self.dim, 1))
        if pts.ndim != 2:
            raise ValueError("points must be a 2-D array of shape (n, dim)")
        dim = self.dim or pts.shape[1]
        if dim < 1:
            raise ValueError("dimension must be positive")
        if pts.shape[1] != dim:
            raise ValueError(
                f"every point must have exactly {dim} coordinates, got {pts.shape[1]}"
            )
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "dim", int(dim))

    def __len__(self) -> int:
        return self.points.shape[0]

    def __getitem__(self, idx) -> np.ndarray:
        return self.points[idx]

    def subset(self, indices: Sequence[int]) -> "PointCloud":
        idx = np.asarray(indices, dtype=np.intp)
        return PointCloud(self.points[idx], dim=self.dim)

    def tree(self) -> cKDTree:
        return _tree(self)


def as_cloud(points) -> PointCloud:
    """Coerce arrays / sequences to a :class:`PointCloud` (no copy if already one)."""
    if isinstance(points, PointCloud):
        return points
    return PointCloud(np.asarray(points, dtype=np.float64))


@dataclass(frozen=True)
class RingSpec:
    """Closed annulus ``r_inner <= ||p - center|| <= r_outer``.

    ``r_inner == r_outer`` is a circle, ``r_inner == 0`` a disk.
    """

    r_inner: float
    r_outer: float
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not 0 <= self.r_inner <= self.r_outer:
            raise ValueError("need 0 <= r_inner <= r_outer")
        if self.r_outer <= 0:
            raise ValueError("r_outer must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def epsilon(self) -> float:
        return self.r_outer - self.r_inner

    @property
    def area(self) -> float:
        return math.pi * (self.r_outer**2 - self.r_inner**2)

    @classmethod
    def from_width(cls, epsilon: float, radius: float = 1.0, center=(0.0, 0.0)) -> "RingSpec":
        """Ring ``B(c, radius + eps/2) minus B(c, radius - eps/2)``; eps=0 gives the circle."""
        if epsilon == 0:
            return cls(radius, radius, center)
        return cls(radius - epsilon / 2, radius + epsilon / 2, center)


def unit_ball_volume(d: int) -> float:
    """Lebesgue volume of the unit ball in R^d, pi^(d/2) / Gamma(d/2 + 1)."""
    if d < 1:
        raise ValueError("d must be a positive integer")
    return math.exp(0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d + 1.0))


def _pair_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # canonical distance formula; every exact statistic goes through it so
    # that the kd-tree paths and brute-force oracles agree bit for bit
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _tree(cloud: PointCloud) -> cKDTree:
    return cKDTree(cloud.points)


def _use_tree(cloud: PointCloud) -> bool:
    return cloud.dim <= KDTREE_MAX_DIM


def maxmin_nn(cloud) -> float:
    """Largest nearest-neighbour distance, ``max_i min_{j != i} ||X_j - X_i||``."""
    cloud = as_cloud(cloud)
    n = len(cloud)
    if n < 2:
        raise ValueError("degenerate sample: need at least 2 points")
    pts = cloud.points
    if _use_tree(cloud):
        _, idx = _tree(cloud).query(pts, k=2)
        # with duplicates the tree may list the twin before i itself
        other = np.where(idx[:, 0] == np.arange(n), idx[:, 1], idx[:, 0])
        return float(np.max(_pair_dist(pts, pts[other])))
    best = 0.0
    for i in range(n):
        d = _pair_dist(pts, pts[i])
        d[i] = np.inf
        best = max(best, float(d.min()))
    return best


def nn_distances(cloud) -> np.ndarray:
    """Per-point distance to the nearest *other* point."""
    cloud = as_cloud(cloud)
    n = len(cloud)
    if n < 2:
        raise ValueError("degenerate sample: need at least 2 points")
    pts = cloud.points
    _, idx = _tree(cloud).query(pts, k=2)
    other = np.where(idx[:, 0] == np.arange(n), idx[:, 1], idx[:, 0])
    return _pair_dist(pts, pts[other])


def knn(cloud, query, k: int) -> list[tuple[int, float]]:
    """The ``k`` nearest points of ``cloud`` to ``query``.

    Returns ``(index, distance)`` pairs in nondecreasing distance, ties broken by
    the smaller index.  Exact: the tree only proposes candidates, distances
    are recomputed and the final order comes from a full sort of the
    candidate set.
    """
    cloud = as_cloud(cloud)
    n = len(cloud)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    q = np.asarray(query, dtype=np.float64).reshape(cloud.dim)
    idx, dist = _knn_indices(cloud, q[None, :], k)
    return [(int(i), float(d)) for i, d in zip(idx[0], dist[0])]


def knn_batch(cloud, queries, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`knn`: index and distance arrays of shape ``(m, k)``."""
    cloud = as_cloud(cloud)
    n = len(cloud)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    q = np.asarray(queries, dtype=np.float64).reshape(-1, cloud.dim)
    return _knn_indices(cloud, q, k)


def knn_distances(cloud, queries, k: int) -> np.ndarray:
    """Sorted distances from each query to its ``k`` nearest points, shape ``(m, k)``.

    Cheaper than :func:`knn_batch` because tie order is irrelevant when only
    the distance values are needed.
    """
    cloud = as_cloud(cloud)
    n = len(cloud)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    q = np.asarray(queries, dtype=np.float64).reshape(-1, cloud.dim)
    if not _use_tree(cloud):
        return _knn_indices(cloud, q, k)[1]
    d, _ = _tree(cloud).query(q, k=k)
    return np.asarray(d, dtype=np.float64).reshape(len(q), k)


def _knn_indices(cloud: PointCloud, q: np.ndarray, k: int):
    pts = cloud.points
    n = len(cloud)
    m = q.shape[0]
    if not _use_tree(cloud) or k == n:
        dist = np.stack([_pair_dist(pts, qi) for qi in q]) if m else np.empty((0, n))
        order = np.lexsort((np.broadcast_to(np.arange(n), dist.shape), dist), axis=-1)
        order = order[:, :k]
        return order, np.take_along_axis(dist, order, axis=1)

    tree = _tree(cloud)
    # one spare neighbour lets us detect a tie straddling position k
    kk = min(k + 1, n)
    _, cand = tree.query(q, k=kk)
    cand = cand.reshape(m, kk)
    d = _pair_dist(pts[cand], q[:, None, :])
    order = np.lexsort((cand, d), axis=-1)
    cand = np.take_along_axis(cand, order, axis=1)
    d = np.take_along_axis(d, order, axis=1)
    out_idx = cand[:, :k].copy()
    out_d = d[:, :k].copy()
    if kk > k:
        suspicious = np.nonzero(d[:, k] <= d[:, k - 1] * (1 + 1e-12) + 1e-300)[0]
        for row in suspicious:
            # tie (or near tie) at the cut: gather every point on the kth shell
            radius = d[row, k - 1] * (1 + 1e-9) + 1e-300
            ball = np.asarray(tree.query_ball_point(q[row], radius), dtype=np.intp)
            bd = _pair_dist(pts[ball], q[row])
            o = np.lexsort((ball, bd))[:k]
            out_idx[row] = ball[o]
            out_d[row] = bd[o]
    return out_idx, out_d


def hausdorff_finite(a, b) -> float:
    """Hausdorff distance between two finite point sets."""
    a = as_cloud(a)
    b = as_cloud(b)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("Hausdorff distance needs nonempty clouds")
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return max(_directed(a, b), _directed(b, a))


def _directed(a: PointCloud, b: PointCloud) -> float:
    """sup_{x in a} min_{y in b} ||x - y||."""
    if _use_tree(b):
        _, idx = _tree(b).query(a.points, k=1)
        return float(np.max(_pair_dist(a.points, b.points[idx])))
    return float(max(np.min(_pair_dist(b.points, x)) for x in a.points))


def dist_to_ring(p, ring: RingSpec) -> float:
    p = np.asarray(p, dtype=np.float64)
    c = np.asarray(ring.center, dtype=np.float64)
    if p.shape != c.shape:
        raise ValueError("point dimension does not match ring center")
    rho = float(_pair_dist(p, c))
    if ring.r_inner <= rho <= ring.r_outer:
        return 0.0
    return min(abs(rho - ring.r_inner), abs(rho - ring.r_outer))


def _dist_to_ring_many(pts: np.ndarray, ring: RingSpec) -> np.ndarray:
    rho = _pair_dist(pts, np.asarray(ring.center))
    below = np.maximum(ring.r_inner - rho, 0.0)
    above = np.maximum(rho - ring.r_outer, 0.0)
    return np.maximum(below, above)


def ring_grid(ring: RingSpec, grid_step: float) -> np.ndarray:
    """Polar product grid covering the annulus.

    Radial levels are at most ``grid_step`` apart and, on every level, angular
    neighbours are at most ``grid_step`` apart, so any point of the annulus is
    within ``grid_step`` of a grid node.
    """
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    n_rad = max(1, math.ceil(ring.epsilon / grid_step))
    if ring.epsilon == 0:
        radii = np.array([ring.r_inner])
    else:
        radii = np.linspace(ring.r_inner, ring.r_outer, n_rad + 1)
    chunks = []
    for rad in radii:
        if rad == 0:
            chunks.append(np.zeros((1, 2)))
            continue
        # chord 2 r sin(pi/m) <= grid_step
        m = max(3, math.ceil(math.pi / math.asin(min(1.0, grid_step / (2 * rad)))))
        theta = 2 * math.pi * np.arange(m) / m
        chunks.append(np.column_stack([rad * np.cos(theta), rad * np.sin(theta)]))
    return np.concatenate(chunks) + np.asarray(ring.center)


def hausdorff_cloud_to_ring(cloud, ring: RingSpec, grid_step: float = 1e-3) -> tuple[float, float]:
    """Hausdorff distance between a 2-D cloud and an annulus.

    Returns ``(value, grid_step)``: the supremum over the annulus is replaced by
    a maximum over :func:`ring_grid`, which under-estimates it by at most
    ``grid_step``.  The cloud-to-ring half is computed analytically.
    """
    cloud = as_cloud(cloud)
    if cloud.dim != 2:
        raise ValueError("ring reference is 2-D only")
    if len(cloud) == 0:
        raise ValueError("cloud must be nonempty")
    grid = ring_grid(ring, grid_step)
    _, idx = _tree(cloud).query(grid, k=1)
    ring_to_cloud = float(np.max(_pair_dist(grid, cloud.points[idx])))
    cloud_to_ring = float(np.max(_dist_to_ring_many(cloud.points, ring)))
    return max(ring_to_cloud, cloud_to_ring), grid_step


def pairwise_distances(a, b=None) -> np.ndarray:
    """Dense distance matrix (brute force; for small inputs and oracles)."""
    a = np.asarray(as_cloud(a).points)
    b = a if b is None else np.asarray(as_cloud(b).points)
    return _pair_dist(a[:, None, :], b[None, :, :])
