"""CSV reading and writing for point clouds and weighted measures.

Files carry a header ``x1,...,xd`` optionally followed by ``weight`` and/or
``label`` columns; coordinates are written with 17 significant digits so a
round trip is lossless.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import PointCloud


@dataclass(frozen=True)
class CsvTable:
    cloud: PointCloud
    weights: Optional[np.ndarray] = None
    labels: Optional[list] = None


def _coord_columns(header: Sequence[str]) -> int:
    d = 0
    for name in header:
        if name.strip() == f"x{d + 1}":
            d += 1
        else:
            break
    if d == 0:
        raise ValueError("CSV header must start with x1")
    extra = [h.strip() for h in header[d:]]
    if any(h not in ("weight", "label") for h in extra) or len(set(extra)) != len(extra):
        raise ValueError(f"unexpected CSV columns {extra}; allowed: weight, label")
    return d


def read_points(path) -> CsvTable:
    """Load a CSV point table.  Ragged rows and non-numeric coordinates are
    rejected with the offending line number."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    header = [h.strip() for h in rows[0]]
    d = _coord_columns(header)
    width = len(header)
    coords = np.empty((len(rows) - 1, d))
    wcol = header.index("weight") if "weight" in header else None
    lcol = header.index("label") if "label" in header else None
    weights = np.empty(len(rows) - 1) if wcol is not None else None
    labels = [] if lcol is not None else None
    for k, row in enumerate(rows[1:]):
        if len(row) != width:
            raise ValueError(f"{path}: line {k + 2} has {len(row)} fields, expected {width}")
        try:
            coords[k] = [float(c) for c in row[:d]]
            if wcol is not None:
                weights[k] = float(row[wcol])
        except ValueError:
            raise ValueError(f"{path}: line {k + 2} is not numeric") from None
        if lcol is not None:
            labels.append(row[lcol].strip())
    return CsvTable(PointCloud(coords), weights, labels)


def write_points(path_or_stream, points, weights=None, labels=None) -> None:
    pts = np.asarray(getattr(points, "points", points), dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-D array")
    header = [f"x{i + 1}" for i in range(pts.shape[1])]
    if weights is not None:
        header.append("weight")
    if labels is not None:
        header.append("label")

    def dump(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k, p in enumerate(pts):
            row = [format(float(v), ".17g") for v in p]
            if weights is not None:
                row.append(format(float(weights[k]), ".17g"))
            if labels is not None:
                row.append(str(labels[k]))
            w.writerow(row)

    if hasattr(path_or_stream, "write"):
        dump(path_or_stream)
    else:
        with open(path_or_stream, "w", newline="") as fh:
            dump(fh)
