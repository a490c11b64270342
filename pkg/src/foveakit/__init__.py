"""Radial foveation transform toolkit.

A numerically invertible image transform that magnifies a chosen region
while leaving everything past a blend radius untouched, plus the machinery
around it: an analytic Jacobian, a Riemannian box reparameterization that
round-trips exactly, dense image resampling, transform-parameter grid
search, and distance-binned detection metrics.
"""

from .boxes import (
    EuclideanBox,
    LabeledBox,
    RiemannianBox,
    area_amplification,
    boxes_to_euclidean,
    boxes_to_riemannian,
    giou,
    iou,
    l1_loss,
    noise_box,
    to_euclidean,
    to_riemannian,
)
from .errors import (
    ConvergenceError,
    EmptyInputError,
    FoveaKitError,
    InvalidParamsError,
    SchemaError,
    ShapeError,
    UnknownClassError,
)
from .evaluate import (
    CameraSpec,
    ClassHeightTable,
    EvalReport,
    RangedDetection,
    assign_bin,
    estimate_distance,
    evaluate,
    ingest_coco,
)
from .geometry import (
    BatchInverseResult,
    FoveationParams,
    InverseReport,
    forward_map,
    forward_map_batch,
    inverse_batch,
    inverse_fixed_point,
    inverse_newton,
    is_diffeomorphic,
    jacobian,
    jacobian_batch,
    poincare_contraction,
    radial_weight,
)
from .search import SearchResult, SearchSpec, grid_search, objective, weighted_objective
from .warp import (
    ImageBuffer,
    WarpGrid,
    build_inverse_grid,
    cached_inverse_grid,
    unwarp_image,
    warp_image,
)

__version__ = "0.1.0"
