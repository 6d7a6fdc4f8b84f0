"""
Reproducing a few table cells
=============================

Runs the simulation harness on a handful of cells and prints the
observed rate of correct answers next to the published one.  The full
grid is ``manifold-interior experiment --out table.csv``.
"""

import io

from manifold_interior.harness import ExperimentConfig, run_table

cfg = ExperimentConfig().with_cells(0.1, ns=(10, 50), ys=(0.75, 0.95), replicates=200)
buf = io.StringIO()
summary = run_table(cfg, buf)
print(buf.getvalue())
print("\n".join(summary.lines()))
