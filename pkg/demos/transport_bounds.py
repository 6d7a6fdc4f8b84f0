"""
Wasserstein bounds on small measures
====================================

Exact W2 between finitely supported measures, a convexity bound for
mixtures and the Lipschitz bound of the distance to measure.
"""

from fractions import Fraction

import numpy as np

from manifold_interior import (
    DiscreteMeasure, check_dtm_stability, check_mixture_bound, w2_exact_small,
)

rng = np.random.default_rng(0)


def uniform(k):
    return DiscreteMeasure(rng.integers(-4, 5, (k, 2)) / 4, np.full(k, 1 / k),
                           exact=[Fraction(1, k)] * k)


mu, mu1, mu2 = uniform(3), uniform(4), uniform(2)
w2, plan = w2_exact_small(mu, mu1)
print(f"W2(mu, mu1) = {w2:.6f}")
for i, j, m in zip(plan.src, plan.tgt, plan.mass):
    print(f"  move {m:.4f} from atom {i} to atom {j}")

for a in (Fraction(1, 4), Fraction(1, 2)):
    margin = check_mixture_bound(mu, mu1, mu2, a)
    print(f"alpha={a}: convexity margin {margin:.6f} (>= 0)")

grid = np.stack(np.meshgrid(np.linspace(-1.5, 1.5, 31),
                            np.linspace(-1.5, 1.5, 31)), -1).reshape(-1, 2)
nu1, nu2 = uniform(8), uniform(8)
print(f"DTM stability margin, m0=0.25: {check_dtm_stability(nu1, nu2, 0.25, grid):.6f}")
