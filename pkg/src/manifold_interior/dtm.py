"""Distance to a measure for uniform empirical measures, DTM-threshold
denoising, the schedule conditions on (m_n, alpha_n, delta_n) and the
denoise-then-peel pipeline."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import PointCloud, as_cloud, knn_batch, knn_distances
from .peeling import InteriorDecision, decide_interior

log = logging.getLogger(__name__)

# k0 = m0 * n within this relative distance of an integer is treated as one
_INT_SNAP = 1e-9


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Uniform measure ``(1/n) sum_p delta_p`` on a point cloud."""

    support: PointCloud

    def __post_init__(self):
        object.__setattr__(self, "support", as_cloud(self.support))
        if len(self.support) < 1:
            raise ValueError("empirical measure needs at least one atom")

    @property
    def n(self) -> int:
        return len(self.support)

    @property
    def dim(self) -> int:
        return self.support.dim


@dataclass(frozen=True)
class DTMParams:
    m0: float

    def __post_init__(self):
        if not 0 < self.m0 <= 1:
            raise ValueError(f"mass fraction m0 must lie in (0, 1], got {self.m0}")

    def k0(self, n: int) -> float:
        return _snap(self.m0 * n)


def _snap(k0: float) -> float:
    nearest = round(k0)
    if nearest >= 1 and abs(k0 - nearest) <= _INT_SNAP * max(1.0, k0):
        return float(nearest)
    return k0


def _measure(mu) -> EmpiricalMeasure:
    return mu if isinstance(mu, EmpiricalMeasure) else EmpiricalMeasure(as_cloud(mu))


def delta_m(mu, x, m: float) -> float:
    """``inf{r > 0 : mu(closed B(x, r)) > m}``: the distance from ``x`` to its
    ``(floor(m n) + 1)``-th nearest atom."""
    mu = _measure(mu)
    if not 0 <= m < 1:
        raise ValueError(f"m must lie in [0, 1), got {m}")
    j = min(int(math.floor(_snap(m * mu.n))) + 1, mu.n)
    _, d = knn_batch(mu.support, np.asarray(x, dtype=np.float64), j)
    return float(d[0, -1])


def _dtm_from_sorted(dist: np.ndarray, k0: float) -> np.ndarray:
    """DTM from rows of sorted neighbour distances (at least ceil(k0) columns)."""
    whole = int(math.floor(k0))
    frac = k0 - whole
    sq = dist * dist
    acc = sq[:, :whole].sum(axis=1)
    if frac > 0:
        acc = acc + frac * sq[:, whole]
    return np.sqrt(acc / k0)


def dtm(mu, x, params: DTMParams) -> float:
    """Distance to measure ``d_{mu, m0}(x)``.

    For integer ``k0 = m0 n`` this is the root mean square distance to the
    ``k0`` nearest atoms.  Otherwise the integral over ``m`` is evaluated
    exactly: the ``floor(k0)`` nearest atoms get weight 1, the next one the
    fractional remainder.
    """
    return float(dtm_batch(mu, np.asarray(x, dtype=np.float64).reshape(1, -1), params)[0])


def dtm_batch(mu, queries, params: DTMParams) -> np.ndarray:
    mu = _measure(mu)
    q = np.asarray(getattr(queries, "points", queries), dtype=np.float64).reshape(-1, mu.dim)
    k0 = params.k0(mu.n)
    kneed = min(int(math.ceil(k0)), mu.n)
    dist = knn_distances(mu.support, q, kneed)
    return _dtm_from_sorted(dist, k0)


@dataclass(frozen=True)
class DenoiseResult:
    kept: np.ndarray
    removed: np.ndarray
    values: np.ndarray
    m_n: float
    delta_n: float

    @property
    def all_removed(self) -> bool:
        return self.kept.size == 0


def denoise(cloud, m_n: float, delta_n: float) -> DenoiseResult:
    """Drop the points whose DTM (w.r.t. the empirical measure of the whole
    input) exceeds ``delta_n``."""
    cloud = as_cloud(cloud)
    if not 0 < m_n <= 1:
        raise ValueError(f"m_n must lie in (0, 1], got {m_n}")
    if delta_n < 0:
        raise ValueError("delta_n must be nonnegative")
    values = dtm_batch(EmpiricalMeasure(cloud), cloud.points, DTMParams(m_n))
    keep = values <= delta_n
    res = DenoiseResult(np.flatnonzero(keep), np.flatnonzero(~keep), values, m_n, delta_n)
    if res.all_removed:
        log.warning("denoising removed all %d points", len(cloud))
    return res


@dataclass(frozen=True)
class ScheduleExponents:
    """Polynomial schedules ``m_n = cm n^-x``, ``alpha_n = ca n^-y``,
    ``delta_n = cd n^-z`` together with the ambient and manifold dimensions."""

    x: float = 0.25
    y: float = 0.95
    z: float = 0.95
    d: int = 2
    d_prime: int = 1
    m_const: float = 1.0
    alpha_const: float = 1.0
    delta_const: float = 1000.0

    def __post_init__(self):
        if not (self.x > 0 and self.y > 0 and self.z > 0):
            raise ValueError("schedule exponents must be positive")
        if not self.d >= self.d_prime >= 1:
            raise ValueError("need d >= d' >= 1")

    def m_n(self, n: int) -> float:
        return min(1.0, self.m_const * n ** (-self.x))

    def alpha_n(self, n: int) -> float:
        return min(1.0, self.alpha_const * n ** (-self.y))

    def delta_n(self, n: int) -> float:
        return self.delta_const * n ** (-self.z)


@dataclass(frozen=True)
class ScheduleReport:
    values: tuple[float, float, float, float]
    passed: tuple[bool, bool, bool, bool]
    verdict: bool
    degenerate: bool
    notes: tuple[str, ...] = field(default_factory=tuple)

    def as_record(self) -> dict:
        return {
            "values": list(self.values),
            "passed": list(self.passed),
            "verdict": "pass" if self.verdict else "fail",
            "degenerate": self.degenerate,
            "notes": list(self.notes),
        }


def validate_schedule(s: ScheduleExponents) -> ScheduleReport:
    """Evaluate the four exponent conditions under which the denoising step
    removes every off-manifold point with probability tending to one."""
    gap = s.d - s.d_prime
    base = 1.0 - s.y
    values = (
        base - s.x * gap / s.d_prime,
        base + (s.x - s.y) / 2.0 * gap,
        base + (s.x / 2.0 - 1.0 / s.d) * gap,
        base - s.z * gap,
    )
    passed = tuple(v < 0 for v in values)
    notes = []
    degenerate = gap == 0
    if degenerate:
        notes.append("d == d': all four conditions reduce to 1 - y < 0")
    if s.d < 4:
        notes.append("DTM convergence result assumes d >= 4; schedule checked anyway")
    return ScheduleReport(values, passed, all(passed), degenerate, tuple(notes))


@dataclass(frozen=True)
class PipelineResult:
    decision: InteriorDecision
    kept: np.ndarray
    removed: np.ndarray
    m_n: float
    delta_n: float


def denoise_and_decide(
    cloud,
    s: ScheduleExponents = ScheduleExponents(),
    beta: float = 2.5,
    method: str = "auto",
    mc_samples: int = 10_000,
    seed: int = 0,
) -> PipelineResult:
    """DTM denoising followed by the peeling interior test on the survivors."""
    cloud = as_cloud(cloud)
    n = len(cloud)
    if n < 2:
        raise ValueError("degenerate sample: need at least 2 points")
    m_n, delta_n = s.m_n(n), s.delta_n(n)
    res = denoise(cloud, m_n, delta_n)
    kept = res.kept
    if kept.size < 2:
        decision = InteriorDecision(False, float("nan"), float(beta), 0, int(kept.size),
                                    status="insufficient points")
    else:
        sub = cloud.subset(kept)
        decision = decide_interior(sub, beta, method, mc_samples, seed)
    return PipelineResult(decision, kept, res.removed, m_n, delta_n)
