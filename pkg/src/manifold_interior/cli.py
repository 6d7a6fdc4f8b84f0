"""Command line entry point.

Exit status: 0 on success, 1 when inputs fail validation (a JSON error
record is written to stderr), 2 for usage errors.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .dtm import DTMParams, EmpiricalMeasure, ScheduleExponents, denoise, dtm_batch
from .geometry import RingSpec
from .harness import ExperimentConfig, run_property_suite, run_table
from .io import read_points, write_points
from .peeling import NoiseRadiusParams, decide_interior, estimate_noise_radius
from .sampling import (
    FgmCopulaSpec, MixtureModel, Seed, sample_ai_fgm, sample_mixture, sample_ring,
    LABEL_NAMES,
)


class UsageError(Exception):
    pass


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (np.floating,)):
        return _clean(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def emit(record: dict, stream=None) -> None:
    stream = stream or sys.stdout
    stream.write(json.dumps(_clean(record), allow_nan=False) + "\n")
    stream.flush()


def _floats(text: str) -> tuple:
    return tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())


def _ints(text: str) -> tuple:
    return tuple(int(t) for t in text.replace(";", ",").split(",") if t.strip())


def _auto_float(text: str):
    return None if text == "auto" else float(text)


# --- config file ------------------------------------------------------------

def load_config(path) -> ExperimentConfig:
    """Read an INI-style config.

    ``[experiment]`` holds ``epsilon_grid``, ``y_grid``, ``master_seed``,
    ``workers``, ``cell_time_limit`` and per-epsilon ``n_grid.<eps>`` /
    ``replicates.<eps>`` (a bare ``replicates`` applies to every epsilon).
    ``[peeling]`` holds ``beta``, ``method``, ``mc_samples``; ``[schedule]``
    the exponents and constants of :class:`ScheduleExponents`.
    """
    cp = configparser.ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)
    known = {"experiment", "peeling", "schedule"}
    bad = [s for s in cp.sections() if s not in known]
    if bad:
        raise ValueError(f"unknown config sections {bad}")
    cfg = ExperimentConfig()
    kw: dict = {}
    if cp.has_section("experiment"):
        sec = cp["experiment"]
        eps = _floats(sec["epsilon_grid"]) if "epsilon_grid" in sec else cfg.epsilon_grid
        kw["epsilon_grid"] = eps
        n_grid = {e: cfg.n_grid.get(e, ()) for e in eps}
        reps = {e: cfg.replicates.get(e, 1000) for e in eps}
        for key, val in sec.items():
            if key.startswith("n_grid."):
                n_grid[float(key.split(".", 1)[1])] = _ints(val)
            elif key.startswith("replicates."):
                reps[float(key.split(".", 1)[1])] = int(val)
            elif key == "replicates":
                reps = {e: int(val) for e in eps}
            elif key in ("y_grid",):
                kw["y_grid"] = _floats(val)
            elif key in ("master_seed", "workers"):
                kw[key] = int(val)
            elif key == "cell_time_limit":
                kw[key] = float(val)
            elif key == "timings":
                kw[key] = sec.getboolean(key)
            elif key != "epsilon_grid":
                raise ValueError(f"unknown key experiment.{key}")
        # explicit per-epsilon replicate counts win over the bare key
        for key, val in sec.items():
            if key.startswith("replicates."):
                reps[float(key.split(".", 1)[1])] = int(val)
        kw["n_grid"] = n_grid
        kw["replicates"] = reps
    if cp.has_section("peeling"):
        sec = cp["peeling"]
        for key, val in sec.items():
            if key == "beta":
                kw["beta"] = float(val)
            elif key == "method":
                kw["method"] = val.strip()
            elif key == "mc_samples":
                kw["mc_samples"] = int(val)
            else:
                raise ValueError(f"unknown key peeling.{key}")
    if cp.has_section("schedule"):
        sec = cp["schedule"]
        fields = {"x": float, "y": float, "z": float, "d": int, "d_prime": int,
                  "m_const": float, "alpha_const": float, "delta_const": float}
        skw = {}
        for key, val in sec.items():
            if key not in fields:
                raise ValueError(f"unknown key schedule.{key}")
            skw[key] = fields[key](val)
        kw["schedule"] = replace(cfg.schedule, **skw)
    return replace(cfg, **kw)


# --- subcommands --------------------------------------------------------------

def cmd_sample(a) -> int:
    seed = Seed(a.seed)
    if a.model == "ai-fgm":
        x = sample_ai_fgm(FgmCopulaSpec(a.n, a.eps), seed)
        write_points(a.out, x.reshape(-1, 1))
        emit({"model": a.model, "n": a.n, "eps": a.eps, "alpha": a.eps**a.n, "out": a.out})
        return 0
    ring = RingSpec.from_width(a.epsilon)
    if a.model == "ring":
        cloud = sample_ring(a.n, ring, seed)
        write_points(a.out, cloud)
        emit({"model": a.model, "n": a.n, "epsilon": a.epsilon, "out": a.out})
        return 0
    if a.y is None:
        raise ValueError("--y is required for the mixture model")
    model = MixtureModel.for_simulation(a.epsilon, a.n, a.y)
    cloud, labels = sample_mixture(a.n, model, seed)
    write_points(a.out, cloud, labels=[LABEL_NAMES[k] for k in labels])
    emit({"model": a.model, "n": a.n, "epsilon": a.epsilon, "y": a.y,
          "alpha_n": model.alpha_n, "noise": int(labels.sum()), "out": a.out})
    return 0


def cmd_dtm(a) -> int:
    cloud = read_points(a.input).cloud
    queries = read_points(a.queries).cloud if a.queries else cloud
    values = dtm_batch(EmpiricalMeasure(cloud), queries, DTMParams(a.m0))
    for i, v in enumerate(values):
        emit({"index": i, "dtm": float(v)})
    return 0


def _schedule(a) -> ScheduleExponents:
    kw = {k: getattr(a, k) for k in ("x", "y", "z") if getattr(a, k) is not None}
    if a.delta_const is not None:
        kw["delta_const"] = a.delta_const
    return ScheduleExponents(**kw)


def cmd_denoise(a) -> int:
    table = read_points(a.input)
    cloud = table.cloud
    s = _schedule(a)
    n = len(cloud)
    m_n = s.m_n(n) if a.mn is None else a.mn
    delta_n = s.delta_n(n) if a.deltan is None else a.deltan
    res = denoise(cloud, m_n, delta_n)
    prefix = a.out_prefix or str(Path(a.input).with_suffix(""))
    kept_path, removed_path = f"{prefix}.kept.csv", f"{prefix}.removed.csv"
    write_points(kept_path, cloud.points[res.kept])
    write_points(removed_path, cloud.points[res.removed])
    emit({"n": n, "kept": int(res.kept.size), "removed": int(res.removed.size),
          "m_n": m_n, "delta_n": delta_n, "all_removed": res.all_removed,
          "kept_csv": kept_path, "removed_csv": removed_path})
    return 0


def cmd_decide(a) -> int:
    cloud = read_points(a.input).cloud
    dec = decide_interior(cloud, a.beta, a.method, a.mc_samples, a.seed)
    emit(dec.as_record())
    return 0


def cmd_radius(a) -> int:
    cloud = read_points(a.input).cloud
    d = cloud.dim
    params = NoiseRadiusParams.with_margin(a.f0, d) if a.c is None else NoiseRadiusParams(a.c, a.f0)
    r_hat, bb = estimate_noise_radius(cloud, params, a.method, not a.exclude_self,
                                      a.mc_samples, a.seed)
    emit({"R_hat": r_hat, "rho_n": params.rho(len(cloud), d), "c": params.c, "f0": params.f0,
          "boundary_balls": int(bb.size), "n": len(cloud)})
    return 0


def cmd_experiment(a) -> int:
    cfg = load_config(a.config) if a.config else ExperimentConfig()
    kw: dict = {}
    if a.seed is not None:
        kw["master_seed"] = a.seed
    if a.workers is not None:
        kw["workers"] = a.workers
    if a.beta is not None:
        kw["beta"] = a.beta
    if a.method is not None:
        kw["method"] = a.method
    if a.timings:
        kw["timings"] = True
    if a.cell_time_limit is not None:
        kw["cell_time_limit"] = a.cell_time_limit
    if a.y is not None:
        kw["y_grid"] = _floats(a.y)
    eps = _floats(a.epsilon) if a.epsilon is not None else cfg.epsilon_grid
    if a.epsilon is not None or a.n is not None or a.replicates is not None:
        ns = _ints(a.n) if a.n is not None else None
        kw["epsilon_grid"] = eps
        kw["n_grid"] = {e: ns or cfg.n_grid.get(e, ()) for e in eps}
        kw["replicates"] = {e: a.replicates or cfg.replicates.get(e, 1000) for e in eps}
    cfg = replace(cfg, **kw)
    summary = run_table(cfg, a.out)
    for line in summary.lines():
        print(line, file=sys.stderr)
    emit({"out": a.out, "cells": len(summary.results), "errors": summary.errors,
          "off_table": len(summary.mismatches), "partial": len(summary.partial),
          "beta": cfg.beta, "method": cfg.method, "master_seed": cfg.master_seed})
    return 0


def cmd_verify(a) -> int:
    checks = run_property_suite(a.seed, quick=a.quick)
    for c in checks:
        emit(c.as_record())
    return 0 if all(c.passed for c in checks) else 1


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="manifold-interior",
                                description="Interior tests for sampled manifolds.")
    p.add_argument("--version", action="version", version=version_string())
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", help="draw a ring, mixture or copula sample")
    s.add_argument("--model", choices=("ring", "mixture", "ai-fgm"), required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--epsilon", type=float, default=0.0, help="ring width")
    s.add_argument("--y", type=float, help="noise exponent, alpha_n = n^-y")
    s.add_argument("--eps", type=float, default=0.0, help="copula perturbation amplitude")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("dtm", help="distance to the empirical measure")
    s.add_argument("--input", required=True)
    s.add_argument("--queries")
    s.add_argument("--m0", type=float, required=True)
    s.set_defaults(func=cmd_dtm)

    s = sub.add_parser("denoise", help="drop points with large DTM")
    s.add_argument("--input", required=True)
    s.add_argument("--mn", type=_auto_float, default=None, help="mass fraction or 'auto'")
    s.add_argument("--deltan", type=_auto_float, default=None, help="threshold or 'auto'")
    s.add_argument("--x", type=float)
    s.add_argument("--y", type=float)
    s.add_argument("--z", type=float)
    s.add_argument("--delta-const", type=float)
    s.add_argument("--out-prefix")
    s.set_defaults(func=cmd_denoise)

    for name, func, helptext in (
        ("decide-interior", cmd_decide, "peeling test for an empty interior"),
        ("estimate-radius", cmd_radius, "thickness of a noisy support"),
    ):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--input", required=True)
        s.add_argument("--method", choices=("exact2d", "mc", "auto"), default="auto")
        s.add_argument("--mc-samples", type=int, default=10_000)
        s.add_argument("--seed", type=int, default=0)
        if name == "decide-interior":
            s.add_argument("--beta", type=float, default=2.5)
        else:
            s.add_argument("--f0", type=float, required=True, help="density lower bound")
            s.add_argument("--c", type=float, help="radius constant (default 1.1x minimal)")
            s.add_argument("--exclude-self", action="store_true")
        s.set_defaults(func=func)

    s = sub.add_parser("experiment", help="run the simulation grid and write a CSV")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--beta", type=float)
    s.add_argument("--method", choices=("exact2d", "mc"))
    s.add_argument("--epsilon", help="comma separated widths")
    s.add_argument("--n", help="comma separated sample sizes")
    s.add_argument("--y", help="comma separated noise exponents")
    s.add_argument("--replicates", type=int)
    s.add_argument("--cell-time-limit", type=float)
    s.add_argument("--timings", action="store_true", help="fill the seconds column")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("verify", help="run the property suite")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--quick", action="store_true")
    s.set_defaults(func=cmd_verify)
    return p


def version_string() -> str:
    import scipy

    return f"manifold-interior {__version__} (numpy {np.__version__}, scipy {scipy.__version__})"


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return a.func(a)
    except (ValueError, OSError, KeyError, configparser.Error) as exc:
        emit({"error": type(exc).__name__, "message": str(exc), "command": a.command},
             sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
