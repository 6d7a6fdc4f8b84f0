import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from manifold_interior.transport import (
    DiscreteMeasure, TransportPlan, check_dtm_stability, check_mixture_bound,
    displacement_bound, mix_plans, mixture_measure, support_diameter, w2_1d,
    w2_exact_small, w2_exact_squared,
)

import oracles


def lattice_measure(rng, k, dim=2, uniform=True):
    atoms = np.round(rng.uniform(-1, 1, (k, dim)) * 32) / 32
    if uniform:
        return DiscreteMeasure.uniform(atoms)
    counts = 1 + rng.multinomial(20 - k, np.full(k, 1 / k))
    return DiscreteMeasure(atoms, None, exact=[Fraction(int(c), 20) for c in counts])


def test_measure_validation():
    with pytest.raises(ValueError):
        DiscreteMeasure([[0.0], [1.0]], [0.6, 0.6])
    with pytest.raises(ValueError):
        DiscreteMeasure([[0.0], [1.0]], [1.5, -0.5])
    with pytest.raises(ValueError):
        DiscreteMeasure([[0.0]], [0.5, 0.5])
    m = DiscreteMeasure([[0.0], [1.0]], [0.25, 0.75])
    assert sum(m.exact) == 1


def test_w2_1d_examples():
    d0, d1 = DiscreteMeasure.dirac([0.0]), DiscreteMeasure.dirac([1.0])
    assert w2_1d(d0, d1) == 1.0
    a = DiscreteMeasure.uniform([[0.0], [2.0]])
    b = DiscreteMeasure.uniform([[1.0], [3.0]])
    assert w2_1d(a, b) == 1.0
    assert w2_1d(a, a) == 0.0
    with pytest.raises(ValueError):
        w2_1d(DiscreteMeasure.dirac([0.0, 0.0]), d0)


def test_w2_exact_examples():
    a = DiscreteMeasure.uniform([[0, 0], [1, 0]])
    b = DiscreteMeasure.uniform([[0, 1], [1, 1]])
    val, plan = w2_exact_small(a, b)
    assert val == 1.0
    assert val == oracles.w2_uniform_assignment(a.atoms.points, b.atoms.points)
    assert plan.check_marginals()
    val, plan = w2_exact_small(a, a)
    assert val == 0.0
    dense = plan.as_dense()
    assert np.allclose(dense, np.diag([0.5, 0.5]))


def test_w2_exact_matches_1d():
    rng = np.random.default_rng(0)
    for _ in range(30):
        mu = lattice_measure(rng, int(rng.integers(1, 8)), dim=1, uniform=False)
        nu = lattice_measure(rng, int(rng.integers(1, 8)), dim=1, uniform=False)
        assert abs(w2_exact_small(mu, nu)[0] - w2_1d(mu, nu)) <= 1e-9


def test_w2_exact_matches_linprog():
    rng = np.random.default_rng(1)
    for _ in range(25):
        mu = DiscreteMeasure(rng.normal(size=(int(rng.integers(1, 9)), 2)), None,
                             exact=None) if False else lattice_measure(rng, int(rng.integers(1, 9)), uniform=False)
        nu = lattice_measure(rng, int(rng.integers(1, 9)), uniform=bool(rng.integers(2)))
        val, plan = w2_exact_small(mu, nu)
        ref = oracles.w2_linprog(mu.atoms.points, mu.weights, nu.atoms.points, nu.weights)
        assert val == pytest.approx(ref, abs=1e-9)
        assert plan.check_marginals(1e-9)
        assert plan.cost() == pytest.approx(val, abs=1e-9)


def test_w2_float_atoms_match_linprog():
    rng = np.random.default_rng(11)
    for _ in range(10):
        mu = DiscreteMeasure.uniform(rng.normal(size=(6, 3)))
        nu = DiscreteMeasure.uniform(rng.normal(size=(7, 3)))
        ref = oracles.w2_linprog(mu.atoms.points, mu.weights, nu.atoms.points, nu.weights)
        assert w2_exact_small(mu, nu)[0] == pytest.approx(ref, abs=1e-9)


def test_size_cap():
    big = DiscreteMeasure.uniform(np.zeros((65, 1)) + np.arange(65)[:, None])
    with pytest.raises(ValueError, match="subsample"):
        w2_exact_small(big, big)


@given(st.integers(0, 100_000))
def test_w2_metric_properties(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (lattice_measure(rng, int(rng.integers(1, 6)), uniform=False) for _ in range(3))
    ab, plan = w2_exact_small(a, b)
    assert ab >= 0 and plan.check_marginals(1e-9)
    assert ab == pytest.approx(w2_exact_small(b, a)[0], abs=1e-12)
    assert w2_exact_small(a, c)[0] <= ab + w2_exact_small(b, c)[0] + 1e-9
    assert w2_exact_squared(a, a)[0] == 0


def test_mix_plans_examples():
    src = DiscreteMeasure.uniform([[0.0, 0.0], [1.0, 0.0]])
    t1 = DiscreteMeasure.uniform([[0.0, 1.0], [1.0, 1.0]])
    t2 = DiscreteMeasure.uniform([[0.0, 2.0], [5.0, 5.0]])
    _, p1 = w2_exact_small(src, t1)
    _, p2 = w2_exact_small(src, t2)
    assert mix_plans(p1, p2, 0.0).canonical() == p1.canonical()
    assert mix_plans(p1, p2, 1.0).canonical() == p2.canonical()
    half = mix_plans(p1, p2, 0.5)
    assert half.check_marginals(1e-12)
    expected = {k: v / 2 for k, v in p1.canonical().items()}
    for k, v in p2.canonical().items():
        expected[k] = expected.get(k, 0.0) + v / 2
    assert half.canonical() == pytest.approx(expected)
    assert len(half.target) == 4
    other = DiscreteMeasure.uniform([[9.0, 9.0]])
    _, p3 = w2_exact_small(other, t1)
    with pytest.raises(ValueError):
        mix_plans(p1, p3, 0.5)


@given(st.integers(0, 100_000), st.sampled_from([0, 0.125, 0.25, 0.5, 0.875, 1]))
def test_mixed_plan_cost_is_linear(seed, alpha):
    rng = np.random.default_rng(seed)
    mu = lattice_measure(rng, 3)
    _, p1 = w2_exact_small(mu, lattice_measure(rng, 4))
    _, p2 = w2_exact_small(mu, lattice_measure(rng, 2))
    mixed = mix_plans(p1, p2, alpha)
    assert mixed.check_marginals(1e-9)
    expect = (1 - alpha) * p1.squared_cost() + alpha * p2.squared_cost()
    assert mixed.squared_cost() == pytest.approx(expect, abs=1e-12)


def test_mixture_measure_merges_equal_atoms():
    a = DiscreteMeasure.uniform([[0.0], [1.0]])
    b = DiscreteMeasure.uniform([[1.0], [2.0]])
    m = mixture_measure(a, b, Fraction(1, 2))
    assert m.canonical() == {(0.0,): Fraction(1, 4), (1.0,): Fraction(1, 2), (2.0,): Fraction(1, 4)}


def test_mixture_bound_examples():
    d = [DiscreteMeasure.dirac([float(v)]) for v in (0, 1, 2)]
    assert abs(check_mixture_bound(d[0], d[1], d[2], 0.5)) <= 1e-9
    mu = DiscreteMeasure.uniform([[0.0, 0.0], [1.0, 2.0]])
    assert check_mixture_bound(mu, mu, mu, 0.3) == 0.0
    rng = np.random.default_rng(2)
    for _ in range(20):
        mu, mu1, mu2 = (lattice_measure(rng, int(rng.integers(1, 6)), uniform=False) for _ in range(3))
        assert check_mixture_bound(mu, mu1, mu2, Fraction(int(rng.integers(0, 5)), 4)) >= -1e-9


def test_dtm_stability_examples():
    mu = DiscreteMeasure.uniform([[0.0], [1.0]])
    nu = DiscreteMeasure.uniform([[0.0], [1.2]])
    grid = np.arange(-1.0, 2.0 + 1e-9, 0.01)[:, None]
    assert check_dtm_stability(mu, nu, 0.5, grid) >= 0
    assert check_dtm_stability(mu, mu, 0.5, grid) == 0.0
    rng = np.random.default_rng(3)
    g2 = rng.uniform(-1.5, 1.5, (200, 2))
    for _ in range(5):
        a, b = lattice_measure(rng, 16), lattice_measure(rng, 16)
        assert check_dtm_stability(a, b, float(rng.choice([0.25, 0.5, 1.0])), g2) >= -1e-9
    with pytest.raises(ValueError):
        check_dtm_stability(lattice_measure(rng, 4, uniform=False), mu, 0.5, grid)


def test_displacement_bound():
    rng = np.random.default_rng(4)
    for _ in range(20):
        n, k = 12, int(rng.integers(1, 6))
        base = np.round(rng.uniform(-1, 1, (n, 2)) * 32) / 32
        mu = DiscreteMeasure.uniform(base)
        moved = base.copy()
        R = 0.7
        idx = rng.choice(n, k, replace=False)
        diam = support_diameter(mu)
        for i in idx:
            # push atom i to a point within R of the support
            j = int(rng.integers(n))
            v = rng.normal(size=2)
            moved[i] = base[j] + R * rng.uniform() * v / np.linalg.norm(v)
        nu = DiscreteMeasure.uniform(moved)
        assert w2_exact_small(mu, nu)[0] <= displacement_bound(n, k, R, diam) + 1e-12


def test_plan_validation():
    mu = DiscreteMeasure.dirac([0.0])
    with pytest.raises(ValueError):
        TransportPlan(mu, mu, [0], [0], [-1.0])
