"""Shape-constrained density estimation by warped templates."""

from .errors import (
    ConstraintError,
    DegenerateSampleError,
    DomainError,
    InvalidSrsfError,
    InvalidWarpError,
    OptimizationError,
    ShapeError,
    WarpdensError,
)
from .geometry import (
    BasisSet,
    CoefficientVector,
    SrsfGrid,
    TangentVector,
    WarpingGrid,
    coeffs_to_warp,
    compose,
    exp_map,
    fourier_basis,
    inv_exp_map,
    srsf,
    srsf_inverse,
    unit_grid,
    warp_to_coeffs,
)
from .templates import (
    GridDensity,
    ShapeSpec,
    TemplateFunction,
    build_template,
    count_modes,
    group_action,
    height_ratios_of,
    oracle_reconstruct_warp,
    template_density,
)
from .estimator import (
    DensityEstimate,
    FitConfig,
    estimate_support,
    fit,
    fit_fixed_j,
    log_likelihood,
    rescale_to_unit,
)
from .conditional import (
    ConditionalFitConfig,
    adaptive_bandwidth,
    compute_weights,
    fit_conditional,
    pilot_bandwidth,
)
from .bench import BENCHMARKS, BenchmarkSpec, ErrorSummary, error_norms, run_benchmark

__version__ = "0.1.0"
