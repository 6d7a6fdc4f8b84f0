"""Interior tests for manifolds sampled with noise: union-of-balls peeling,
distance-to-measure denoising and exact discrete transport checks."""

__version__ = "0.1.0"

from .geometry import (
    PointCloud, RingSpec, as_cloud, dist_to_ring, hausdorff_cloud_to_ring,
    hausdorff_finite, knn, maxmin_nn, unit_ball_volume,
)
from .peeling import (
    BallUnion, BoundaryClassification, InteriorDecision, NoiseRadiusParams,
    boundary_balls_2d, boundary_balls_mc, decide_interior, estimate_noise_radius, peel,
)
from .dtm import (
    DTMParams, EmpiricalMeasure, ScheduleExponents, delta_m, denoise,
    denoise_and_decide, dtm, dtm_batch, validate_schedule,
)
from .transport import (
    DiscreteMeasure, TransportPlan, check_dtm_stability, check_mixture_bound,
    mix_plans, w2_1d, w2_exact_small,
)
from .sampling import (
    FgmCopulaSpec, MixtureModel, Seed, ai_bound_check, sample_ai_fgm,
    sample_mixture, sample_ring,
)
