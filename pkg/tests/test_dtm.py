import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from manifold_interior.dtm import (
    DTMParams, EmpiricalMeasure, ScheduleExponents, delta_m, denoise,
    denoise_and_decide, dtm, dtm_batch, validate_schedule,
)

import oracles


def test_params_and_measure():
    with pytest.raises(ValueError):
        DTMParams(0.0)
    with pytest.raises(ValueError):
        DTMParams(1.5)
    with pytest.raises(ValueError):
        EmpiricalMeasure(np.empty((0, 2)))
    assert DTMParams(0.3).k0(10) == 3.0  # 0.3 * 10 is 3.0000000000000004 in floats


def test_delta_m_examples():
    line = [[0.0], [1.0], [2.0], [3.0]]
    assert delta_m(line, [0.0], 0.5) == 2.0
    assert delta_m(line, [0.4], 0.0) == pytest.approx(0.4)
    assert delta_m(line, [1.0], 0.2) == 0.0
    with pytest.raises(ValueError):
        delta_m(line, [0.0], 1.0)


def test_delta_m_matches_definition():
    rng = np.random.default_rng(0)
    for _ in range(30):
        pts = rng.normal(size=(int(rng.integers(1, 20)), 2))
        x = rng.normal(size=2)
        for m in rng.uniform(0, 1, 5):
            assert delta_m(pts, x, m) == oracles.delta_by_definition(pts, x, m)


@given(st.integers(0, 1000))
def test_delta_m_monotone(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(15, 2))
    x = rng.normal(size=2)
    vals = [delta_m(pts, x, m) for m in np.linspace(0, 0.99, 40)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_dtm_examples():
    pts = [[0, 0], [1, 0], [2, 0]]
    assert dtm(pts, [0, 0], DTMParams(2 / 3)) == pytest.approx(math.sqrt(0.5), abs=1e-15)
    assert dtm(pts, [1, 0], DTMParams(1 / 3)) == 0.0
    line = [[0.0], [1.0], [2.0]]
    assert dtm(line, [0.0], DTMParams(0.5)) == pytest.approx(math.sqrt(1 / 3), abs=1e-15)


def test_dtm_integer_k0_nearest_neighbour_formula():
    rng = np.random.default_rng(1)
    for _ in range(50):
        n = int(rng.integers(1, 40))
        pts = rng.normal(size=(n, 2))
        k = int(rng.integers(1, n + 1))
        x = rng.normal(size=2)
        assert abs(dtm(pts, x, DTMParams(k / n)) - oracles.dtm_nearest(pts, x, k)) <= 1e-12


def test_dtm_fractional_quadrature():
    rng = np.random.default_rng(2)
    for k0 in (1.25, 2.5, 3.2, 6.25):
        n = int(rng.integers(int(k0) + 2, 30))
        pts = rng.normal(size=(n, 2))
        x = rng.normal(size=2)
        got = dtm(pts, x, DTMParams(k0 / n))
        assert abs(got - oracles.dtm_by_quadrature(pts, x, k0 / n)) <= 1e-6


def test_dtm_batch_elementwise():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(40, 2))
    qs = rng.normal(size=(100, 2))
    p = DTMParams(0.17)
    batch = dtm_batch(pts, qs, p)
    assert batch.tolist() == [dtm(pts, q, p) for q in qs]
    assert dtm_batch(pts, qs[:1], p).shape == (1,)
    assert dtm_batch(pts, pts, p).tolist() == [dtm(pts, q, p) for q in pts]


@given(st.integers(0, 10_000), st.floats(0.02, 1.0))
def test_dtm_lipschitz(seed, m0):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(25, 2))
    a, b = rng.normal(size=(2, 2))
    p = DTMParams(m0)
    assert abs(dtm(pts, a, p) - dtm(pts, b, p)) <= np.linalg.norm(a - b) + 1e-9


def test_denoise_outlier():
    t = np.linspace(0, 2 * np.pi, 200, endpoint=False)
    pts = np.r_[np.c_[np.cos(t), np.sin(t)], [[3.0, 3.0]]]
    res = denoise(pts, 0.1, 0.5)
    assert res.removed.tolist() == [200]
    assert res.kept.tolist() == list(range(200))


def test_denoise_trivial_cases(caplog):
    rng = np.random.default_rng(4)
    pts = rng.uniform(0, 1, (30, 2))
    assert denoise(pts, 0.3, 2.0).removed.size == 0
    res = denoise(pts, 0.3, 0.0)
    assert res.all_removed and res.kept.size == 0
    assert "removed all" in caplog.text
    with pytest.raises(ValueError):
        denoise(pts, 0.0, 1.0)
    with pytest.raises(ValueError):
        denoise(pts, 0.5, -1.0)


def test_denoise_uses_full_sample():
    # reported values are DTMs with respect to the whole input, outlier included
    pts = np.r_[np.zeros((5, 2)), [[10.0, 0.0]]]
    res = denoise(pts, 2 / 6, 1.0)
    assert res.kept.tolist() == [0, 1, 2, 3, 4]
    full = dtm_batch(pts, pts, DTMParams(2 / 6))
    assert np.array_equal(res.values, full)


@pytest.mark.parametrize("s, values, verdict, degenerate", [
    (ScheduleExponents(x=0.25, y=0.9, z=0.95, d=4, d_prime=1), (-0.65, -0.875, -0.275, -2.75), True, False),
    (ScheduleExponents(x=0.25, y=0.95, z=0.95, d=2, d_prime=1), (-0.20, -0.30, -0.325, -0.90), True, False),
    (ScheduleExponents(x=0.25, y=0.75, z=0.95, d=2, d_prime=2), (0.25, 0.25, 0.25, 0.25), False, True),
])
def test_validate_schedule(s, values, verdict, degenerate):
    rep = validate_schedule(s)
    assert rep.values == pytest.approx(values, abs=1e-12)
    assert rep.verdict is verdict and rep.degenerate is degenerate
    assert all(p == (v < 0) for p, v in zip(rep.passed, rep.values))
    assert rep.as_record()["verdict"] == ("pass" if verdict else "fail")


def test_schedule_values():
    s = ScheduleExponents()
    assert s.m_n(10_000) == pytest.approx(0.1)
    assert s.delta_n(100) == pytest.approx(1000 * 100**-0.95)
    assert s.alpha_n(100) == pytest.approx(100**-0.95)
    with pytest.raises(ValueError):
        ScheduleExponents(d=1, d_prime=2)
    with pytest.raises(ValueError):
        ScheduleExponents(x=0)


def test_pipeline_two_points_and_insufficient():
    res = denoise_and_decide(np.array([[0.0, 0.0], [1.0, 0.0]]))
    assert res.kept.size == 2 and not res.decision.nonempty_interior
    assert res.decision.status == "ok"
    tight = ScheduleExponents(delta_const=1e-9)
    res = denoise_and_decide(np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 5.0]]), tight)
    assert res.decision.status == "insufficient points"
    with pytest.raises(ValueError):
        denoise_and_decide(np.array([[0.0, 0.0]]))
