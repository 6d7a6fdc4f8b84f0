import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from manifold_interior.geometry import (
    PointCloud, RingSpec, dist_to_ring, hausdorff_cloud_to_ring, hausdorff_finite,
    knn, knn_batch, maxmin_nn, ring_grid, unit_ball_volume,
)

import oracles

coords = st.floats(-100, 100, allow_nan=False, width=64)


def clouds(min_size=2, max_size=25, dim=2):
    return arrays(np.float64, st.tuples(st.integers(min_size, max_size), st.just(dim)),
                  elements=coords)


def test_cloud_validation():
    with pytest.raises(ValueError):
        PointCloud(np.array([[0.0, np.inf]]))
    with pytest.raises(ValueError):
        PointCloud(np.zeros((3, 2)), dim=3)
    c = PointCloud([[0, 0], [1, 1]])
    assert c.dim == 2 and len(c) == 2
    with pytest.raises(ValueError):
        c.points[0, 0] = 5.0


def test_ring_spec():
    r = RingSpec.from_width(0.1)
    assert r.r_inner == 0.95 and r.r_outer == 1.05
    assert r.epsilon == r.r_outer - r.r_inner
    c = RingSpec.from_width(0.0)
    assert c.r_inner == c.r_outer == 1.0
    with pytest.raises(ValueError):
        RingSpec(1.1, 1.0)


@pytest.mark.parametrize("d, expected", [(1, 2.0), (2, math.pi), (3, 4 * math.pi / 3), (4, math.pi**2 / 2)])
def test_unit_ball_volume(d, expected):
    assert unit_ball_volume(d) == pytest.approx(expected, rel=1e-12)


def test_maxmin_small_cases():
    assert maxmin_nn([[0, 0], [1, 0]]) == 1.0
    assert maxmin_nn([[0, 0], [1, 0], [3, 0]]) == 2.0
    with pytest.raises(ValueError, match="degenerate sample"):
        maxmin_nn([[0, 0]])


def test_maxmin_duplicates():
    assert maxmin_nn([[0, 0], [0, 0], [0, 0]]) == 0.0
    assert maxmin_nn([[0, 0], [0, 0], [2, 0]]) == 2.0


def test_maxmin_matches_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(20):
        pts = rng.uniform(0, 1, (20, 2))
        assert maxmin_nn(pts) == oracles.maxmin_brute(pts)


def test_maxmin_high_dim_brute_path():
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(30, 20))
    assert maxmin_nn(pts) == pytest.approx(oracles.maxmin_brute(pts), rel=1e-15)


@given(clouds(), st.floats(0, 2 * math.pi), st.floats(0.1, 10),
       arrays(np.float64, 2, elements=st.floats(-5, 5)))
def test_maxmin_rigid_and_scale(pts, angle, scale, shift):
    rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    base = maxmin_nn(pts)
    moved = maxmin_nn(pts @ rot.T + shift)
    assert moved == pytest.approx(base, rel=1e-9, abs=1e-9)
    assert maxmin_nn(scale * pts) == pytest.approx(scale * base, rel=1e-9, abs=1e-12)


def test_knn_examples():
    line = [[0.0], [1.0], [2.0]]
    assert knn(line, [0.0], 2) == [(0, 0.0), (1, 1.0)]
    assert knn([[3, 4], [1, 1]], [1, 1], 1) == [(1, 0.0)]
    with pytest.raises(ValueError):
        knn(line, [0.0], 4)
    with pytest.raises(ValueError):
        knn(line, [0.0], 0)


def test_knn_ties_by_index():
    pts = [[1, 0], [0, 1], [-1, 0], [0, -1], [0, 0]]
    assert [i for i, _ in knn(pts, [0, 0], 3)] == [4, 0, 1]


def test_knn_matches_sort():
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1, 1, (50, 2))
    for q in rng.uniform(-1.5, 1.5, (20, 2)):
        assert knn(pts, q, 5) == oracles.knn_brute(pts, q, 5)


@given(clouds(2, 30), arrays(np.float64, 2, elements=coords))
def test_knn_properties(pts, q):
    n = len(pts)
    res = knn(pts, q, n)
    d = [v for _, v in res]
    assert d == sorted(d)
    assert sorted(i for i, _ in res) == list(range(n))
    k = max(1, n // 2)
    assert knn(pts, q, k) == res[:k]


def test_knn_batch_agrees():
    rng = np.random.default_rng(4)
    pts = np.round(rng.uniform(0, 4, (60, 2)))  # lattice, many ties
    qs = np.round(rng.uniform(0, 4, (15, 2)))
    idx, dist = knn_batch(pts, qs, 7)
    for q, i_row, d_row in zip(qs, idx, dist):
        ref = oracles.knn_brute(pts, q, 7)
        assert list(i_row) == [i for i, _ in ref]
        assert list(d_row) == [v for _, v in ref]


def test_hausdorff_examples():
    assert hausdorff_finite([[0, 0]], [[0, 0]]) == 0.0
    assert hausdorff_finite([[0, 0]], [[3, 4]]) == 5.0
    with pytest.raises(ValueError):
        hausdorff_finite(np.empty((0, 2)), [[0, 0]])
    with pytest.raises(ValueError):
        hausdorff_finite([[0, 0]], [[0, 0, 0]])


def test_hausdorff_matches_brute():
    rng = np.random.default_rng(5)
    a, b = rng.normal(size=(30, 2)), rng.normal(size=(30, 2))
    assert hausdorff_finite(a, b) == oracles.hausdorff_brute(a, b)


@given(clouds(1, 12), clouds(1, 12), clouds(1, 12))
def test_hausdorff_metric(a, b, c):
    ab = hausdorff_finite(a, b)
    assert ab == hausdorff_finite(b, a)
    assert hausdorff_finite(a, c) <= ab + hausdorff_finite(b, c) + 1e-9
    assert hausdorff_finite(a, a[::-1]) == 0.0


def test_dist_to_ring():
    ring = RingSpec(0.95, 1.05)
    assert dist_to_ring([1, 0], ring) == 0
    assert dist_to_ring([2, 0], ring) == pytest.approx(0.95)
    assert dist_to_ring([0, 0], ring) == pytest.approx(0.95)


def test_ring_grid_spacing():
    ring = RingSpec(0.9, 1.1)
    g = ring_grid(ring, 0.01)
    rng = np.random.default_rng(6)
    th = rng.uniform(0, 2 * np.pi, 2000)
    rad = rng.uniform(0.9, 1.1, 2000)
    probe = np.c_[rad * np.cos(th), rad * np.sin(th)]
    worst = max(np.min(np.hypot(*(g - p).T)) for p in probe)
    assert worst <= 0.01


def test_hausdorff_to_circle_four_points():
    circle = RingSpec(1.0, 1.0)
    t = np.array([0, np.pi / 2, np.pi, 3 * np.pi / 2])
    cloud = np.c_[np.cos(t), np.sin(t)]
    val, step = hausdorff_cloud_to_ring(cloud, circle, 1e-4)
    assert step == 1e-4
    # dense oracle: 10^6 circle points
    s = np.arange(1_000_000) * (2 * np.pi / 1_000_000)
    dense = np.c_[np.cos(s), np.sin(s)]
    ref = np.max(np.min(np.hypot(dense[:, None, 0] - cloud[:, 0], dense[:, None, 1] - cloud[:, 1]), axis=1))
    assert abs(val - ref) <= 1e-3
    assert ref == pytest.approx(math.sqrt(2 - math.sqrt(2)), abs=1e-9)


def test_hausdorff_to_ring_outlier_and_self_cover():
    circle = RingSpec(1.0, 1.0)
    t = np.linspace(0, 2 * np.pi, 400, endpoint=False)
    cloud = np.r_[np.c_[np.cos(t), np.sin(t)], [[5.0, 0.0]]]
    assert hausdorff_cloud_to_ring(cloud, circle)[0] == pytest.approx(4.0)
    ring = RingSpec(0.9, 1.1)
    g = ring_grid(ring, 0.01)
    val, step = hausdorff_cloud_to_ring(g, ring, 0.01)
    assert val <= step
    with pytest.raises(ValueError, match="2-D only"):
        hausdorff_cloud_to_ring(np.zeros((3, 3)), ring)
