"""
Peeling a union of balls
========================

A circle has an empty interior, an annulus of any positive width does
not.  The test
covers the sample with balls of radius ``beta`` times the largest
nearest-neighbour gap, throws away every ball whose circle pokes out of
the union, and looks at what is left.
"""

import numpy as np

from manifold_interior import (
    BallUnion, RingSpec, Seed, boundary_balls_2d, decide_interior, peel,
    sample_ring,
)

# six unit balls around a seventh: only the centre one is fully enclosed
hexagon = np.vstack([[0.0, 0.0],
                     [[np.cos(t), np.sin(t)] for t in np.arange(6) * np.pi / 3]])
u = BallUnion(hexagon, 1.0)
flags = boundary_balls_2d(u).flags
print("hexagon boundary flags:", flags.astype(int))
print("balls left after one peel:", len(peel(u, boundary_balls_2d(u))))

# the unit circle, a ring of width 0.02 and an annulus that is almost a disk
seed = Seed(7)
for name, ring in [("circle", RingSpec.from_width(0.0)),
                   ("thin ring", RingSpec.from_width(0.01)),
                   ("fat annulus", RingSpec(0.05, 1.0))]:
    cloud = sample_ring(2000, ring, seed.child(name))
    d = decide_interior(cloud, beta=2.5)
    print(f"{name:12s} r_n={d.radius_used:.4f} peel={d.peel_size:5d} "
          f"-> {'nonempty' if d.nonempty_interior else 'empty'} interior")
