"""Exact Wasserstein-2 distances between small discrete measures and the
transport-plan manipulations used to check mixture and stability bounds."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Optional, Sequence

import numpy as np

from .geometry import PointCloud, _pair_dist, as_cloud

MAX_PAIRS = 4096
_WEIGHT_TOL = 1e-12


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely supported probability measure.

    ``weights`` are floats; ``exact`` holds the same weights as fractions
    summing to exactly 1 (float input is converted exactly and renormalised).
    """

    atoms: PointCloud
    weights: np.ndarray
    exact: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        atoms = as_cloud(self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if self.exact is not None:
            ex = tuple(Fraction(w) for w in self.exact)
            w = np.array([float(x) for x in ex])
        else:
            w = np.array(self.weights, dtype=np.float64).reshape(-1)
            ex = None
        if w.shape[0] != len(atoms):
            raise ValueError("atoms and weights must have the same length")
        if len(atoms) == 0:
            raise ValueError("a measure needs at least one atom")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights must sum to 1 (got {w.sum()!r})")
        if ex is None:
            raw = [Fraction(float(x)) for x in w]
            total = sum(raw)
            ex = tuple(x / total for x in raw)
        elif sum(ex) != 1:
            raise ValueError("exact weights must sum to exactly 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "exact", ex)

    @classmethod
    def uniform(cls, points) -> "DiscreteMeasure":
        atoms = as_cloud(points)
        n = len(atoms)
        return cls(atoms, np.full(n, 1.0 / n), exact=(Fraction(1, n),) * n)

    @classmethod
    def dirac(cls, point) -> "DiscreteMeasure":
        return cls.uniform(np.asarray(point, dtype=np.float64).reshape(1, -1))

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def dim(self) -> int:
        return self.atoms.dim

    @property
    def is_uniform(self) -> bool:
        return len(set(self.exact)) == 1

    def same_as(self, other: "DiscreteMeasure") -> bool:
        return (
            self.atoms.points.shape == other.atoms.points.shape
            and np.array_equal(self.atoms.points, other.atoms.points)
            and self.exact == other.exact
        )

    def canonical(self) -> dict:
        """Atom (as coordinate tuple) -> total exact weight; zero weights dropped."""
        out: dict = {}
        for p, w in zip(map(tuple, self.atoms.points), self.exact):
            if w:
                out[p] = out.get(p, Fraction(0)) + w
        return out


def mixture_measure(mu1: DiscreteMeasure, mu2: DiscreteMeasure, alpha) -> DiscreteMeasure:
    """``(1 - alpha) mu1 + alpha mu2`` with atoms merged on exact coordinate
    equality and zero-weight atoms dropped."""
    a = Fraction(alpha)
    if not 0 <= a <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    if mu1.dim != mu2.dim:
        raise ValueError("measures live in different dimensions")
    weights: dict = {}
    for m, c in ((mu1, 1 - a), (mu2, a)):
        for p, w in zip(map(tuple, m.atoms.points), m.exact):
            weights[p] = weights.get(p, Fraction(0)) + c * w
    items = [(p, w) for p, w in weights.items() if w]
    pts = np.array([p for p, _ in items], dtype=np.float64).reshape(len(items), mu1.dim)
    return DiscreteMeasure(pts, None, exact=tuple(w for _, w in items))


@dataclass(frozen=True)
class TransportPlan:
    """Sparse coupling: mass ``mass[k]`` moves from ``source`` atom ``src[k]``
    to ``target`` atom ``tgt[k]``."""

    source: DiscreteMeasure
    target: DiscreteMeasure
    src: np.ndarray
    tgt: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        src = np.asarray(self.src, dtype=np.intp)
        tgt = np.asarray(self.tgt, dtype=np.intp)
        mass = np.asarray(self.mass, dtype=np.float64)
        if not (src.shape == tgt.shape == mass.shape):
            raise ValueError("plan arrays must have equal length")
        if np.any(mass < 0):
            raise ValueError("plan masses must be nonnegative")
        for arr in (src, tgt, mass):
            arr.setflags(write=False)
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "tgt", tgt)
        object.__setattr__(self, "mass", mass)

    def squared_cost(self) -> float:
        a = self.source.atoms.points[self.src]
        b = self.target.atoms.points[self.tgt]
        d = _pair_dist(a, b)
        return float(np.sum(self.mass * d * d))

    def cost(self) -> float:
        return math.sqrt(self.squared_cost())

    def marginal_errors(self) -> tuple[float, float]:
        rows = np.bincount(self.src, weights=self.mass, minlength=len(self.source))
        cols = np.bincount(self.tgt, weights=self.mass, minlength=len(self.target))
        return (
            float(np.max(np.abs(rows - self.source.weights))),
            float(np.max(np.abs(cols - self.target.weights))),
        )

    def check_marginals(self, tol: float = 1e-9) -> bool:
        return max(self.marginal_errors()) <= tol

    def as_dense(self) -> np.ndarray:
        out = np.zeros((len(self.source), len(self.target)))
        np.add.at(out, (self.src, self.tgt), self.mass)
        return out

    def canonical(self) -> dict:
        """(source atom, target atom) coordinates -> mass, zero entries dropped."""
        out: dict = {}
        sp = self.source.atoms.points
        tp = self.target.atoms.points
        for i, j, m in zip(self.src, self.tgt, self.mass):
            if m:
                key = (tuple(sp[i]), tuple(tp[j]))
                out[key] = out.get(key, 0.0) + float(m)
        return out


def w2_1d(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Exact W2 on the line through the monotone (quantile) coupling."""
    if mu.dim != 1 or nu.dim != 1:
        raise ValueError("w2_1d needs one-dimensional atoms")
    return math.sqrt(float(_w2_1d_squared(mu, nu)))


def _w2_1d_squared(mu: DiscreteMeasure, nu: DiscreteMeasure) -> Fraction:
    xs = mu.atoms.points[:, 0]
    ys = nu.atoms.points[:, 0]
    a = [(float(xs[i]), mu.exact[i]) for i in np.argsort(xs, kind="stable")]
    b = [(float(ys[j]), nu.exact[j]) for j in np.argsort(ys, kind="stable")]
    i = j = 0
    ra, rb = a[0][1], b[0][1]
    total = Fraction(0)
    while i < len(a) and j < len(b):
        m = min(ra, rb)
        if m:
            diff = Fraction(a[i][0]) - Fraction(b[j][0])
            total += m * diff * diff
        ra -= m
        rb -= m
        if ra == 0:
            i += 1
            if i < len(a):
                ra = a[i][1]
        if rb == 0:
            j += 1
            if j < len(b):
                rb = b[j][1]
    return total


def _exact_sq_costs(a: np.ndarray, b: np.ndarray) -> list[list[Fraction]]:
    """Squared Euclidean distances evaluated exactly from the float coordinates."""
    fa = [[Fraction(float(v)) for v in row] for row in a]
    fb = [[Fraction(float(v)) for v in row] for row in b]
    return [[sum((x - y) ** 2 for x, y in zip(p, q)) for q in fb] for p in fa]


def w2_exact_small(mu: DiscreteMeasure, nu: DiscreteMeasure) -> tuple[float, TransportPlan]:
    """Exact W2 and an optimal plan via the transportation simplex.

    Costs (squared distances of the float coordinates) and weights are
    handled as exact rationals, so the optimum is exact; only the returned
    value and plan masses are rounded to floats.
    """
    value_sq, plan = w2_exact_squared(mu, nu)
    return math.sqrt(float(value_sq)), plan


def w2_exact_squared(mu: DiscreteMeasure, nu: DiscreteMeasure) -> tuple[Fraction, TransportPlan]:
    if mu.dim != nu.dim:
        raise ValueError("measures live in different dimensions")
    if len(mu) * len(nu) > MAX_PAIRS:
        raise ValueError(
            f"{len(mu)}x{len(nu)} atom pairs exceed the exact solver cap of {MAX_PAIRS}; "
            "subsample the measures"
        )
    cost = _exact_sq_costs(mu.atoms.points, nu.atoms.points)
    flows, denom, total = _transport_simplex(list(mu.exact), list(nu.exact), cost)
    keys = sorted(flows)
    src = [i for i, _ in keys]
    tgt = [j for _, j in keys]
    mass = [flows[k] / denom for k in keys]
    plan = TransportPlan(mu, nu, src, tgt, mass)
    return total, plan


def _transport_simplex(a: Sequence[Fraction], b: Sequence[Fraction], cost: list[list[Fraction]]):
    """Minimise sum c_ij x_ij subject to row sums a and column sums b.

    Weights are scaled to integers over their common denominator and costs
    over theirs, then the classical u-v (MODI) simplex runs in integer
    arithmetic with Bland's rule, which cannot cycle.  Returns the positive
    flows ``{(i, j): int}``, their denominator and the exact optimal cost.
    """
    m, n = len(a), len(b)
    wden = reduce(_lcm, (w.denominator for w in list(a) + list(b)), 1)
    supply = [int(w * wden) for w in a]
    demand = [int(w * wden) for w in b]
    if sum(supply) != sum(demand):
        raise ValueError("measures do not have equal total mass")
    cden = reduce(_lcm, (c.denominator for row in cost for c in row), 1)
    C = [[int(c * cden) for c in row] for row in cost]

    # north-west corner; on simultaneous exhaustion advance the row only so
    # that the basis keeps m + n - 1 cells (a spanning tree)
    x: dict = {}
    s, d = supply[:], demand[:]
    i = j = 0
    while i < m and j < n:
        q = min(s[i], d[j])
        x[(i, j)] = q
        s[i] -= q
        d[j] -= q
        if s[i] == 0 and i < m - 1:
            i += 1
        elif d[j] == 0:
            j += 1
        else:
            i += 1

    while True:
        u, v = _potentials(x, m, n, C)
        entering = None
        for ii in range(m):
            ui = u[ii]
            row = C[ii]
            for jj in range(n):
                if row[jj] - ui - v[jj] < 0 and (ii, jj) not in x:
                    entering = (ii, jj)
                    break
            if entering is not None:
                break
        if entering is None:
            break
        cycle = _cycle(x, m, n, entering)
        minus = cycle[1::2]
        theta = min(x[c] for c in minus)
        leaving = min(c for c in minus if x[c] == theta)
        for k, c in enumerate(cycle):
            if k == 0:
                x[c] = theta
            elif k % 2:
                x[c] -= theta
            else:
                x[c] += theta
        del x[leaving]

    flows = {c: q for c, q in x.items() if q}
    total = Fraction(sum(q * C[i][j] for (i, j), q in flows.items()), wden * cden)
    return flows, wden, total


def _potentials(x: dict, m: int, n: int, C) -> tuple[list, list]:
    adj_r: list = [[] for _ in range(m)]
    adj_c: list = [[] for _ in range(n)]
    for i, j in x:
        adj_r[i].append(j)
        adj_c[j].append(i)
    u: list = [None] * m
    v: list = [None] * n
    u[0] = 0
    queue = deque([("r", 0)])
    while queue:
        kind, k = queue.popleft()
        if kind == "r":
            for j in adj_r[k]:
                if v[j] is None:
                    v[j] = C[k][j] - u[k]
                    queue.append(("c", j))
        else:
            for i in adj_c[k]:
                if u[i] is None:
                    u[i] = C[i][k] - v[k]
                    queue.append(("r", i))
    if any(t is None for t in u) or any(t is None for t in v):
        raise RuntimeError("transport basis is not a spanning tree")
    return u, v


def _cycle(x: dict, m: int, n: int, entering: tuple) -> list:
    """Cells of the pivot cycle, starting with ``entering`` and alternating
    +, -, +, ... around the unique cycle it closes in the basis tree."""
    i0, j0 = entering
    adj_r: list = [[] for _ in range(m)]
    adj_c: list = [[] for _ in range(n)]
    for i, j in x:
        adj_r[i].append(j)
        adj_c[j].append(i)
    # tree path from row i0 to column j0
    parent: dict = {("r", i0): None}
    queue = deque([("r", i0)])
    while queue:
        node = queue.popleft()
        if node == ("c", j0):
            break
        kind, k = node
        nbrs = [("c", j) for j in adj_r[k]] if kind == "r" else [("r", i) for i in adj_c[k]]
        for nb in nbrs:
            if nb not in parent:
                parent[nb] = node
                queue.append(nb)
    path = []
    node = ("c", j0)
    while parent[node] is not None:
        prev = parent[node]
        cell = (prev[1], node[1]) if prev[0] == "r" else (node[1], prev[1])
        path.append(cell)
        node = prev
    path.reverse()
    return [entering] + path


def mix_plans(p1: TransportPlan, p2: TransportPlan, alpha: float) -> TransportPlan:
    """``(1 - alpha) p1 + alpha p2``, a plan from the shared source to the
    mixture of the two targets."""
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    if not p1.source.same_as(p2.source):
        raise ValueError("plans must share the same source measure")
    target = mixture_measure(p1.target, p2.target, alpha)
    index = {p: k for k, p in enumerate(map(tuple, target.atoms.points))}
    src, tgt, mass = [], [], []
    for plan, c in ((p1, 1.0 - alpha), (p2, alpha)):
        if c == 0:
            continue
        tp = plan.target.atoms.points
        for i, j, q in zip(plan.src, plan.tgt, plan.mass):
            if q:
                src.append(int(i))
                tgt.append(index[tuple(tp[j])])
                mass.append(c * float(q))
    return TransportPlan(p1.source, target, src, tgt, mass)


def check_mixture_bound(mu: DiscreteMeasure, mu1: DiscreteMeasure, mu2: DiscreteMeasure, alpha) -> float:
    """``(1-a) W2(mu, mu1)^2 + a W2(mu, mu2)^2 - W2(mu, (1-a) mu1 + a mu2)^2``.

    All three transport problems are solved exactly, so for rational ``alpha``
    the margin is exact up to the final float conversion.
    """
    a = Fraction(alpha)
    mixed = mixture_measure(mu1, mu2, a)
    lhs, _ = w2_exact_squared(mu, mixed)
    r1, _ = w2_exact_squared(mu, mu1)
    r2, _ = w2_exact_squared(mu, mu2)
    return float((1 - a) * r1 + a * r2 - lhs)


def check_dtm_stability(mu: DiscreteMeasure, nu: DiscreteMeasure, m0: float, query_grid) -> float:
    """``m0^(-1/2) W2(mu, nu) - max_grid |d_{mu,m0} - d_{nu,m0}|``.

    The grid maximum under-estimates the sup norm, so a nonnegative margin
    on any grid is consistent with the stability inequality.
    """
    from .dtm import DTMParams, EmpiricalMeasure, dtm_batch

    if not (mu.is_uniform and nu.is_uniform):
        raise ValueError("DTM stability check needs uniform-weight measures")
    params = DTMParams(m0)
    grid = np.asarray(getattr(query_grid, "points", query_grid), dtype=np.float64)
    grid = grid.reshape(-1, mu.dim)
    w2, _ = w2_exact_small(mu, nu)
    da = dtm_batch(EmpiricalMeasure(mu.atoms), grid, params)
    db = dtm_batch(EmpiricalMeasure(nu.atoms), grid, params)
    return m0**-0.5 * w2 - float(np.max(np.abs(da - db)))


def displacement_bound(n: int, k: int, R: float, diameter: float) -> float:
    """Upper bound ``sqrt(k / n) (R + diam)`` on W2 between a uniform measure on
    ``n`` atoms and the same measure with ``k`` atoms moved to points within
    ``R`` of the support."""
    return math.sqrt(k / n) * (R + diameter)


def support_diameter(m: DiscreteMeasure) -> float:
    pts = m.atoms.points
    if len(pts) < 2:
        return 0.0
    return float(np.max(_pair_dist(pts[:, None, :], pts[None, :, :])))
