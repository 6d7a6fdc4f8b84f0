"""Seeded samplers: the ring manifold, the ring/box noise mixture and almost
independent scalar samples from a product-perturbed copula."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .geometry import PointCloud, RingSpec

MANIFOLD, NOISE = 0, 1
LABEL_NAMES = ("manifold", "noise")


@dataclass(frozen=True)
class Seed:
    """Master seed plus a path of derivation keys.

    ``Seed(7).child("cell", 3, "mixture")`` always yields the same stream on
    every platform (numpy ``SeedSequence`` spawn keys; strings are mapped to
    integers with CRC-32).
    """

    master: int
    path: tuple = ()

    def child(self, *keys) -> "Seed":
        return Seed(self.master, self.path + tuple(_key(k) for k in keys))

    def sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(entropy=self.master & (2**64 - 1), spawn_key=self.path)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.sequence()))

    def as_int(self) -> int:
        """A 63-bit integer child seed, for APIs that take plain ints."""
        lo, hi = self.sequence().generate_state(2, np.uint32)
        return (int(hi) << 32 | int(lo)) & (2**63 - 1)


def _key(k) -> int:
    if isinstance(k, (bool, np.bool_)):
        return int(k)
    if isinstance(k, (int, np.integer)):
        if k < 0:
            raise ValueError("seed keys must be nonnegative")
        return int(k)
    return zlib.crc32(str(k).encode("utf-8"))


SeedLike = Union[int, Seed, np.random.Generator]


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, Seed):
        return seed.generator()
    return Seed(int(seed)).generator()


def sample_ring(n: int, ring: RingSpec, seed: SeedLike) -> PointCloud:
    """``n`` i.i.d. uniform points on the annulus (uniform angle, radius by
    inverse CDF of the density proportional to r)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = as_generator(seed)
    return PointCloud(_ring_points(rng, n, ring))


def _ring_points(rng: np.random.Generator, n: int, ring: RingSpec) -> np.ndarray:
    theta = rng.uniform(0.0, 2.0 * math.pi, n)
    if ring.r_inner == ring.r_outer:
        rad = np.full(n, ring.r_outer)
    else:
        u = rng.uniform(0.0, 1.0, n)
        rad = np.sqrt(ring.r_inner**2 + u * (ring.r_outer**2 - ring.r_inner**2))
        # guard the exact radial range against rounding in the sqrt
        rad = np.clip(rad, ring.r_inner, ring.r_outer)
    pts = np.column_stack([rad * np.cos(theta), rad * np.sin(theta)])
    return pts + np.asarray(ring.center)


@dataclass(frozen=True)
class MixtureModel:
    """``(1 - alpha_n) * uniform(ring) + alpha_n * uniform(noise_box)``."""

    ring: RingSpec
    alpha_n: float
    noise_box: tuple = ((-2.0, 2.0), (-2.0, 2.0))

    def __post_init__(self):
        if not 0 <= self.alpha_n <= 1:
            raise ValueError("alpha_n must lie in [0, 1]")
        box = tuple((float(lo), float(hi)) for lo, hi in self.noise_box)
        object.__setattr__(self, "noise_box", box)
        if any(lo >= hi for lo, hi in box):
            raise ValueError("noise box must have positive side lengths")
        c = self.ring.center
        for (lo, hi), cc in zip(box, c):
            if cc - self.ring.r_outer < lo or cc + self.ring.r_outer > hi:
                raise ValueError("ring must be contained in the noise box")

    @classmethod
    def for_simulation(cls, epsilon: float, n: int, y: float, **kw) -> "MixtureModel":
        return cls(RingSpec.from_width(epsilon), n ** (-y), **kw)


def sample_mixture(n: int, model: MixtureModel, seed: SeedLike) -> tuple[PointCloud, np.ndarray]:
    """Draw ``n`` points from the mixture.

    Returns the cloud and an integer label array (``MANIFOLD`` / ``NOISE``).
    Labels are for evaluation only.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = as_generator(seed)
    labels = (rng.uniform(0.0, 1.0, n) < model.alpha_n).astype(np.int8)
    n_noise = int(labels.sum())
    pts = np.empty((n, 2))
    pts[labels == MANIFOLD] = _ring_points(rng, n - n_noise, model.ring)
    lo = np.array([b[0] for b in model.noise_box])
    hi = np.array([b[1] for b in model.noise_box])
    pts[labels == NOISE] = lo + (hi - lo) * rng.uniform(0.0, 1.0, (n_noise, 2))
    return PointCloud(pts), labels


@dataclass(frozen=True)
class FgmCopulaSpec:
    """Copula ``C(u) = prod u_i + prod f(u_i)`` with ``f(u) = eps u (1 - u)``.

    Its density is ``1 + prod eps (1 - 2 u_i)``, so the relative deviation
    from independence is at most ``eps^n``.  ``marginal_ppf`` maps the uniform
    coordinates to the common marginal (identity by default).
    """

    n: int
    eps: float
    marginal_ppf: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0 <= self.eps < 1:
            raise ValueError("eps must lie in [0, 1)")

    @property
    def alpha(self) -> float:
        return self.eps**self.n

    def f(self, u):
        return self.eps * u * (1.0 - u)

    def fprime(self, u):
        return self.eps * (1.0 - 2.0 * u)

    def density(self, u: np.ndarray) -> np.ndarray:
        """Copula density at points of ``[0, 1]^n`` (last axis = coordinates)."""
        u = np.asarray(u, dtype=np.float64)
        return 1.0 + np.prod(self.fprime(u), axis=-1)


def sample_ai_fgm(spec: FgmCopulaSpec, seed: SeedLike, return_stats: bool = False):
    """One draw ``(X_1, ..., X_n)`` from the copula by rejection.

    Uniform proposals are accepted with probability
    ``density(u) / (1 + eps^n)``.  With ``return_stats`` also returns the
    number of proposals used.
    """
    rng = as_generator(seed)
    bound = 1.0 + spec.alpha
    proposals = 0
    while True:
        proposals += 1
        u = rng.uniform(0.0, 1.0, spec.n)
        if spec.eps == 0 or rng.uniform(0.0, bound) < spec.density(u):
            break
    x = spec.marginal_ppf(u) if spec.marginal_ppf is not None else u
    x = np.asarray(x, dtype=np.float64)
    return (x, proposals) if return_stats else x


def _propose(spec: FgmCopulaSpec, rng: np.random.Generator, m: int):
    """``m`` uniform proposals and their accept/reject outcomes."""
    u = rng.uniform(0.0, 1.0, (m, spec.n))
    acc = rng.uniform(0.0, 1.0 + spec.alpha, m) < spec.density(u)
    if spec.eps == 0:
        acc[:] = True
    return u, acc


def sample_ai_fgm_many(spec: FgmCopulaSpec, draws: int, seed: SeedLike) -> tuple[np.ndarray, int]:
    """``draws`` independent copula vectors (rows); also returns total proposals."""
    rng = as_generator(seed)
    bound = 1.0 + spec.alpha
    out = np.empty((0, spec.n))
    proposals = 0
    while out.shape[0] < draws:
        m = max(16, int((draws - out.shape[0]) * bound * 1.05))
        u, acc = _propose(spec, rng, m)
        # count proposals up to the last accepted one we actually keep
        need = draws - out.shape[0]
        hits = np.flatnonzero(acc)
        if hits.size > need:
            proposals += int(hits[need - 1]) + 1
            hits = hits[:need]
        else:
            proposals += m
        out = np.vstack([out, u[hits]])
    if spec.marginal_ppf is not None:
        out = np.asarray(spec.marginal_ppf(out), dtype=np.float64)
    return out, proposals


def acceptance_count(spec: FgmCopulaSpec, proposals: int, seed: SeedLike) -> int:
    """Number of accepted draws among exactly ``proposals`` rejection trials."""
    if proposals < 1:
        raise ValueError("proposals must be >= 1")
    _, acc = _propose(spec, as_generator(seed), proposals)
    return int(acc.sum())


def ai_bound_check(spec: FgmCopulaSpec, grid_per_axis: int = 50, max_cells: int = 20_000_000):
    """Largest relative deviation of the joint density from the product of
    marginals over a tensor grid of ``[0, 1]^n`` (corners included).

    Returns ``(alpha_hat, alpha_hat <= eps^n + 1e-9)``.
    """
    if spec.n > 6:
        raise ValueError("ai_bound_check supports n <= 6")
    if grid_per_axis < 2:
        raise ValueError("grid_per_axis must be >= 2")
    if grid_per_axis**spec.n > max_cells:
        raise ValueError("grid too large; lower grid_per_axis")
    g = np.linspace(0.0, 1.0, grid_per_axis)
    axes = np.meshgrid(*([g] * spec.n), indexing="ij", sparse=True)
    # with uniform copula marginals the density ratio is the copula density
    # 1 + prod f'(u_i), so the relative deviation is |prod f'(u_i)|; forming
    # the ratio first would only add rounding
    prod = np.ones(())
    for a in axes:
        prod = prod * spec.fprime(a)
    alpha_hat = float(np.max(np.abs(prod)))
    return alpha_hat, alpha_hat <= spec.alpha + 1e-9
