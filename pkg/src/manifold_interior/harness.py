"""Monte-Carlo experiment runner for the ring simulation tables and the
cross-module property suite."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Optional

import numpy as np

from .dtm import ScheduleExponents, denoise_and_decide
from .geometry import PointCloud, maxmin_nn, unit_ball_volume, RingSpec
from .peeling import NoiseRadiusParams, beta_threshold, estimate_noise_radius
from .sampling import MixtureModel, Seed, sample_mixture, sample_ring
from .transport import (
    DiscreteMeasure,
    check_dtm_stability,
    check_mixture_bound,
)

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "epsilon", "n", "y", "correct_rate", "paper_value", "abs_diff",
    "mean_kept", "replicates", "seconds",
)

SMALL_N = (5, 10, 25, 50, 100)
LARGE_N = (250, 500, 1000, 2500, 5000)
Y_GRID = (0.75, 0.8, 0.9, 0.95)


def _table(ns, rows):
    return {
        (y, n): v for y, vals in zip(Y_GRID, rows) for n, v in zip(ns, vals)
    }


# published correct-decision rates, keyed by epsilon then (y, n)
PAPER_TABLES = {
    0.0: _table(LARGE_N, [
        (0.05, 0.02, 0.03, 0.28, 0.86),
        (0.05, 0.07, 0.05, 0.34, 0.94),
        (0.30, 0.18, 0.24, 0.63, 0.95),
        (0.47, 0.34, 0.36, 0.75, 0.99),
    ]),
    0.01: _table(SMALL_N, [
        (0.046, 0.510, 0.936, 0.983, 0.999),
        (0.040, 0.475, 0.923, 0.961, 0.997),
        (0.029, 0.416, 0.850, 0.922, 0.998),
        (0.034, 0.377, 0.851, 0.899, 0.997),
    ]),
    0.05: _table(SMALL_N, [
        (0.047, 0.583, 0.990, 0.999, 1.0),
        (0.038, 0.552, 0.977, 0.999, 1.0),
        (0.040, 0.509, 0.966, 0.999, 1.0),
        (0.036, 0.470, 0.970, 0.997, 1.0),
    ]),
    0.1: _table(SMALL_N, [
        (0.049, 0.643, 0.997, 1.0, 1.0),
        (0.043, 0.624, 0.990, 1.0, 1.0),
        (0.037, 0.581, 0.988, 1.0, 1.0),
        (0.036, 0.535, 0.993, 1.0, 1.0),
    ]),
}


def paper_value(epsilon: float, n: int, y: float) -> Optional[float]:
    return PAPER_TABLES.get(float(epsilon), {}).get((float(y), int(n)))


def cell_tolerance(replicates: int, slack: float = 0.02) -> float:
    """Three binomial standard errors (worst case p = 1/2) plus model slack."""
    return 3.0 * math.sqrt(0.25 / replicates) + slack


@dataclass(frozen=True)
class ExperimentConfig:
    """Simulation grid.  Defaults reproduce the published study: 100 samples
    of size 250..5000 on the circle, 1000 samples of size 5..100 on the
    three rings of positive width."""

    epsilon_grid: tuple = (0.0, 0.01, 0.05, 0.1)
    n_grid: dict = field(default_factory=lambda: {
        0.0: LARGE_N, 0.01: SMALL_N, 0.05: SMALL_N, 0.1: SMALL_N})
    y_grid: tuple = Y_GRID
    replicates: dict = field(default_factory=lambda: {
        0.0: 100, 0.01: 1000, 0.05: 1000, 0.1: 1000})
    schedule: ScheduleExponents = ScheduleExponents()
    beta: float = 2.5
    method: str = "exact2d"
    mc_samples: int = 10_000
    master_seed: int = 20240601
    workers: int = 1
    cell_time_limit: float = 600.0
    timings: bool = False

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilon_grid)
        object.__setattr__(self, "epsilon_grid", eps)
        object.__setattr__(self, "y_grid", tuple(float(y) for y in self.y_grid))
        ng = {float(k): tuple(int(n) for n in v) for k, v in self.n_grid.items()}
        reps = {float(k): int(v) for k, v in self.replicates.items()}
        object.__setattr__(self, "n_grid", ng)
        object.__setattr__(self, "replicates", reps)
        for e in eps:
            if e not in ng or not ng[e]:
                raise ValueError(f"no sample sizes given for epsilon={e}")
            if reps.get(e, 0) < 1:
                raise ValueError(f"replicates for epsilon={e} must be >= 1")
            if any(n < 2 for n in ng[e]):
                raise ValueError("sample sizes must be >= 2")
        if not self.y_grid:
            raise ValueError("empty y grid")
        if self.beta <= beta_threshold(2):
            raise ValueError("beta below theorem threshold")
        if self.method not in ("exact2d", "mc"):
            raise ValueError("method must be exact2d or mc")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def cells(self) -> list[tuple[float, int, float]]:
        return [(e, n, y) for e in self.epsilon_grid for n in self.n_grid[e]
                for y in self.y_grid]

    def with_cells(self, epsilon: float, ns: Iterable[int], ys: Iterable[float],
                   replicates: Optional[int] = None) -> "ExperimentConfig":
        """Copy restricted to one epsilon and the given sizes/levels."""
        e = float(epsilon)
        reps = self.replicates.get(e, 1000) if replicates is None else replicates
        return replace(self, epsilon_grid=(e,), n_grid={e: tuple(ns)},
                       y_grid=tuple(ys), replicates={e: reps})


@dataclass(frozen=True)
class CellResult:
    epsilon: float
    n: int
    y: float
    correct_rate: float
    replicates: int
    mean_kept: float
    errors: int = 0
    paper_value: Optional[float] = None
    seconds: Optional[float] = None
    partial: bool = False

    @property
    def abs_diff(self) -> Optional[float]:
        if self.paper_value is None:
            return None
        return abs(self.correct_rate - self.paper_value)

    def csv_row(self, timings: bool = False) -> list[str]:
        def num(v):
            # shortest repr that round-trips exactly
            return "" if v is None else repr(float(v))
        return [
            num(self.epsilon), str(self.n), num(self.y), num(self.correct_rate),
            num(self.paper_value), num(self.abs_diff), num(self.mean_kept),
            str(self.replicates), num(self.seconds) if timings else "",
        ]


def replicate_seed(master: int, cell: tuple, rep: int) -> Seed:
    eps, n, y = cell
    return Seed(master).child(f"{float(eps)!r}", int(n), f"{float(y)!r}", rep, "mixture")


def _run_replicates(args) -> list[tuple[int, int, int]]:
    """Worker: ``(correct, kept, error)`` for a contiguous replicate range."""
    cfg, cell, start, stop = args
    eps, n, y = cell
    model = MixtureModel.for_simulation(eps, n, y)
    s = replace(cfg.schedule, y=y)
    out = []
    for rep in range(start, stop):
        seed = replicate_seed(cfg.master_seed, cell, rep)
        try:
            cloud, _ = sample_mixture(n, model, seed)
            res = denoise_and_decide(cloud, s, cfg.beta, cfg.method, cfg.mc_samples,
                                     seed.child("mc").as_int())
        except (ValueError, ArithmeticError) as exc:
            log.debug("replicate %s/%d failed: %s", cell, rep, exc)
            out.append((0, 0, 1))
            continue
        dec = res.decision
        if dec.status != "ok":
            out.append((0, int(res.kept.size), 1))
            continue
        out.append((int(dec.nonempty_interior == (eps > 0)), int(res.kept.size), 0))
    return out


def _chunks(total: int, size: int):
    return [(a, min(a + size, total)) for a in range(0, total, size)]


def _thread_cap(workers: int) -> int:
    env = os.environ.get("MI_THREADS")
    if env:
        try:
            workers = min(workers, max(1, int(env)))
        except ValueError:
            raise ValueError(f"MI_THREADS must be an integer, got {env!r}")
    return workers


def run_cell(cfg: ExperimentConfig, cell: tuple, pool: Optional[ProcessPoolExecutor] = None) -> CellResult:
    """Correct-decision rate of the denoise-then-peel test on one grid cell.

    Replicate ``k`` of a cell always uses the same child seed, so the result
    does not depend on how replicates are distributed over workers.  A
    replicate that raises or ends with too few points counts as incorrect.
    """
    eps, n, y = float(cell[0]), int(cell[1]), float(cell[2])
    cell = (eps, n, y)
    if eps not in cfg.n_grid or n not in cfg.n_grid[eps] or y not in cfg.y_grid:
        raise ValueError(f"cell {cell} is not in the configured grid")
    reps = cfg.replicates[eps]
    t0 = time.perf_counter()
    size = max(1, min(50, int(25_000 / n)))
    jobs = [(cfg, cell, a, b) for a, b in _chunks(reps, size)]
    rows: list[tuple[int, int, int]] = []
    partial = False
    if pool is None:
        for job in jobs:
            rows.extend(_run_replicates(job))
            if time.perf_counter() - t0 > cfg.cell_time_limit and len(rows) < reps:
                partial = True
                break
    else:
        # map() yields in submission order, so the reduction below is fixed
        for part in pool.map(_run_replicates, jobs):
            rows.extend(part)
            if time.perf_counter() - t0 > cfg.cell_time_limit and len(rows) < reps:
                partial = True
                break
    done = len(rows)
    if done == 0:
        raise RuntimeError(f"cell {cell} produced no replicates within the time limit")
    correct = sum(r[0] for r in rows)
    kept = sum(r[1] for r in rows)
    errors = sum(r[2] for r in rows)
    if partial:
        log.warning("cell %s stopped after %d of %d replicates", cell, done, reps)
    return CellResult(
        epsilon=eps, n=n, y=y,
        correct_rate=correct / done,
        replicates=done,
        mean_kept=kept / done,
        errors=errors,
        paper_value=paper_value(eps, n, y),
        seconds=time.perf_counter() - t0,
        partial=partial,
    )


@dataclass
class TableSummary:
    results: list
    tolerance: dict
    mismatches: list
    partial: list
    errors: int

    def lines(self) -> list[str]:
        out = [f"cells: {len(self.results)}, replicate errors: {self.errors}"]
        for r in self.mismatches:
            out.append(
                f"off-table eps={r.epsilon:g} n={r.n} y={r.y:g}: "
                f"{r.correct_rate:.3f} vs {r.paper_value:.3f} (tol {self.tolerance[r.replicates]:.3f})"
            )
        for r in self.partial:
            out.append(f"partial eps={r.epsilon:g} n={r.n} y={r.y:g}: {r.replicates} replicates")
        return out


def run_table(cfg: ExperimentConfig, out=None) -> TableSummary:
    """Run every cell and write the CSV row by row to ``out`` (a path or a
    text stream), so that completed cells survive an interruption."""
    workers = _thread_cap(cfg.workers)
    results: list[CellResult] = []
    own = isinstance(out, (str, os.PathLike))
    stream = open(out, "w", newline="") if own else out
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        writer = csv.writer(stream, lineterminator="\n") if stream is not None else None
        if writer:
            writer.writerow(CSV_COLUMNS)
            stream.flush()
        for cell in cfg.cells():
            res = run_cell(cfg, cell, pool)
            results.append(res)
            if writer:
                writer.writerow(res.csv_row(cfg.timings))
                stream.flush()
    finally:
        if pool is not None:
            pool.shutdown()
        if own:
            stream.close()
    tol = {r.replicates: cell_tolerance(r.replicates) for r in results}
    mism = [r for r in results if r.abs_diff is not None and r.abs_diff > tol[r.replicates]]
    return TableSummary(results, tol, mism, [r for r in results if r.partial],
                        sum(r.errors for r in results))


def table_csv(cfg: ExperimentConfig) -> str:
    buf = io.StringIO()
    run_table(cfg, buf)
    return buf.getvalue()


# --- property suite ---------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    margin: float
    detail: str = ""

    def as_record(self) -> dict:
        return {"check": self.name, "passed": bool(self.passed),
                "margin": float(self.margin), "detail": self.detail}


def sample_disk(n: int, seed: Seed, radius: float = 1.0) -> PointCloud:
    rng = seed.generator()
    theta = rng.uniform(0.0, 2.0 * math.pi, n)
    rad = radius * np.sqrt(rng.uniform(0.0, 1.0, n))
    return PointCloud(np.column_stack([rad * np.cos(theta), rad * np.sin(theta)]))


def disk_grid(step: float, radius: float = 1.0) -> np.ndarray:
    """Square lattice of spacing ``step`` clipped to the disk, plus a fine
    ring of boundary points."""
    ax = np.arange(-radius, radius + step, step)
    xx, yy = np.meshgrid(ax, ax)
    g = np.column_stack([xx.ravel(), yy.ravel()])
    g = g[np.einsum("ij,ij->i", g, g) <= radius * radius]
    m = int(math.ceil(2.0 * math.pi * radius / step))
    t = np.arange(m) * (2.0 * math.pi / m)
    return np.vstack([g, radius * np.column_stack([np.cos(t), np.sin(t)])])


def hausdorff_to_disk(cloud: PointCloud, grid: np.ndarray) -> float:
    """Sample-to-disk Hausdorff distance, the sup taken over ``grid``
    (sample points inside the disk contribute nothing to the other term)."""
    from scipy.spatial import cKDTree

    d, _ = cKDTree(cloud.points).query(grid, k=1)
    out = np.linalg.norm(cloud.points, axis=1) - 1.0
    return float(max(d.max(), out.max(initial=0.0)))


def check_maxmin_lower(seed: Seed, ns=(500, 2000, 8000), t: float = 0.1,
                       reps: int = 100) -> CheckResult:
    """The max-min spacing on the uniform unit disk exceeds
    ``(t log n / (n omega_2))^(1/2)`` for ``t`` below ``1/f0``."""
    worst = math.inf
    hits = 0
    for n in ns:
        bound = math.sqrt(t * math.log(n) / (n * unit_ball_volume(2)))
        for rep in range(reps):
            v = maxmin_nn(sample_disk(n, seed.child("maxmin", n, rep)))
            worst = min(worst, v / bound - 1.0)
            hits += v > bound
    total = reps * len(ns)
    return CheckResult("maxmin_lower_bound", hits == total, worst, f"{hits}/{total} replicates")


def check_hausdorff_rate(seed: Seed, ns=(500, 2000, 8000), reps: int = 10,
                         step: float = 0.004) -> CheckResult:
    """``(n / log n)^(1/2) d_H(X_n, disk)`` stays within three times its
    median at the smallest n."""
    grid = disk_grid(step)
    stats = {}
    for n in ns:
        scale = math.sqrt(n / math.log(n))
        stats[n] = [scale * hausdorff_to_disk(sample_disk(n, seed.child("dH", n, rep)), grid)
                    for rep in range(reps)]
    ref = float(np.median(stats[ns[0]]))
    top = max(max(v) for v in stats.values())
    return CheckResult("hausdorff_rate", top <= 3.0 * ref, 3.0 * ref - top,
                       f"max {top:.3f}, 3x median(n={ns[0]}) {3 * ref:.3f}")


def random_measure(rng: np.random.Generator, size: int, dim: int = 2, denom: int = 0,
                   scale: float = 1.0) -> DiscreteMeasure:
    """Random atoms on a dyadic lattice.  ``denom > 0`` draws random rational
    weights with that denominator; otherwise weights are uniform."""
    atoms = np.round(rng.uniform(-scale, scale, (size, dim)) * 64.0) / 64.0
    if denom <= 0:
        return DiscreteMeasure.uniform(atoms)
    counts = 1 + rng.multinomial(denom - size, np.full(size, 1.0 / size))
    return DiscreteMeasure(atoms, None, exact=[Fraction(int(c), denom) for c in counts])


def check_mixture_margins(seed: Seed, instances: int = 50) -> CheckResult:
    rng = seed.child("comblin").generator()
    worst = math.inf
    for _ in range(instances):
        sizes = rng.integers(1, 6, 3)
        mu, mu1, mu2 = (random_measure(rng, int(k), denom=24) for k in sizes)
        alpha = Fraction(int(rng.integers(0, 9)), 8)
        worst = min(worst, check_mixture_bound(mu, mu1, mu2, alpha))
    return CheckResult("mixture_bound", worst >= -1e-9, worst, f"{instances} instances")


def check_dtm_margins(seed: Seed, instances: int = 20, atoms: int = 16) -> CheckResult:
    rng = seed.child("dtm-stability").generator()
    grid = np.stack(np.meshgrid(np.linspace(-1.5, 1.5, 31), np.linspace(-1.5, 1.5, 31)), -1).reshape(-1, 2)
    worst = math.inf
    for _ in range(instances):
        mu = random_measure(rng, atoms)
        nu = random_measure(rng, atoms)
        m0 = float(rng.choice([0.125, 0.25, 0.3, 0.5, 1.0]))
        worst = min(worst, check_dtm_stability(mu, nu, m0, grid))
    return CheckResult("dtm_stability", worst >= -1e-9, worst, f"{instances} instances")


def check_noise_radius(seed: Seed, n: int = 5000, seeds: int = 50,
                       thickness: float = 0.2, min_rate: float = 0.9) -> CheckResult:
    """``|R_hat - R1| <= 2 rho_n`` on uniform samples of the tube of radius
    ``R1`` around the unit circle."""
    ring = RingSpec(1.0 - thickness, 1.0 + thickness)
    params = NoiseRadiusParams.with_margin(1.0 / ring.area, 2)
    rho = params.rho(n, 2)
    hits = 0
    worst = math.inf
    for s in range(seeds):
        r_hat, _ = estimate_noise_radius(sample_ring(n, ring, seed.child("noise-radius", s)), params)
        gap = 2.0 * rho - abs(r_hat - thickness)
        worst = min(worst, gap)
        hits += gap >= 0
    rate = hits / seeds
    return CheckResult("noise_radius", rate >= min_rate, rate - min_rate,
                       f"{hits}/{seeds} seeds, rho_n={rho:.4f}")


def run_property_suite(seed: int = 0, quick: bool = False) -> list[CheckResult]:
    """Cross-module checks at fixed desk-scale sizes.  ``quick`` shrinks the
    replicate counts (for smoke tests only)."""
    root = Seed(int(seed))
    if quick:
        return [
            check_maxmin_lower(root, ns=(500,), reps=5),
            check_hausdorff_rate(root, ns=(500, 2000), reps=3, step=0.01),
            check_mixture_margins(root, 5),
            check_dtm_margins(root, 3, atoms=6),
            check_noise_radius(root, n=2000, seeds=3, min_rate=2 / 3),
        ]
    return [
        check_maxmin_lower(root),
        check_hausdorff_rate(root),
        check_mixture_margins(root),
        check_dtm_margins(root),
        check_noise_radius(root),
    ]
