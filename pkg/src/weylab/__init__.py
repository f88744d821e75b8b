"""weylab: a numerical laboratory for curvature estimates of near-degenerate
isometric embeddings of sphere metrics into Euclidean 3-space.

Pipeline: generate or load an intrinsic metric on a triangulated sphere,
lift its Gauss curvature off the degenerate set by a conformal change,
embed the lifted metrics by edge-length least squares with continuation
over the lift size, estimate extrinsic curvatures, and test quantitative
bounds (mean-curvature dichotomy, principal-curvature blowup rate, inverse
mean curvature Harnack ratio, total mean curvature) on the family.
"""

__version__ = "0.1.0"

from .corpus import GeneratedSurface, gen_flat_spot, gen_round, gen_spheroid
from .embed import (
    EmbeddingState,
    RoundInit,
    SolverConfig,
    SpectralInit,
    SweepMember,
    SweepResult,
    continuation_sweep,
    embed,
)
from .errors import (
    InputError,
    MeshError,
    MetricError,
    SchemaError,
    SolverError,
    WeylabError,
)
from .extrinsic import CurvatureReport, curvature_report, total_mean_curvature
from .mesh import PatchCover, TriSphere, build_patches, icosphere, icosphere_positions
from .metric import (
    AmbientSpec,
    IntrinsicCurvature,
    MetricField,
    RegularizationStep,
    angle_defect_curvature,
    conformal_scale,
    cotan_laplacian,
    induced_metric,
    regularize,
)
from .verify import (
    VerifierConfig,
    corollary_classify,
    default_b0,
    default_delta,
    dichotomy_check,
    harnack_check,
    rate_check,
    sweep_verdict,
    total_curvature_check,
)

__all__ = [
    "AmbientSpec",
    "CurvatureReport",
    "EmbeddingState",
    "GeneratedSurface",
    "IntrinsicCurvature",
    "InputError",
    "MeshError",
    "MetricError",
    "MetricField",
    "PatchCover",
    "RegularizationStep",
    "RoundInit",
    "SchemaError",
    "SolverConfig",
    "SolverError",
    "SpectralInit",
    "SweepMember",
    "SweepResult",
    "TriSphere",
    "VerifierConfig",
    "WeylabError",
    "angle_defect_curvature",
    "build_patches",
    "conformal_scale",
    "continuation_sweep",
    "corollary_classify",
    "cotan_laplacian",
    "curvature_report",
    "default_b0",
    "default_delta",
    "dichotomy_check",
    "embed",
    "gen_flat_spot",
    "gen_round",
    "gen_spheroid",
    "harnack_check",
    "icosphere",
    "icosphere_positions",
    "induced_metric",
    "rate_check",
    "regularize",
    "sweep_verdict",
    "total_curvature_check",
    "total_mean_curvature",
]
