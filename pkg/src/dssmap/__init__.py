"""Dynamic spike-and-slab MAP smoothing for sparse time-varying regression."""

__version__ = "0.1.0"

from .densities import (
    DssPath,
    printed_turning_point,
    sample_dss_path,
    slab_cond_pdf,
    slab_mean,
    slab_stationary_pdf,
    spike_pdf,
    stationary_mixture_cdf,
    stationary_mixture_pdf,
    theta_turning_point,
    transition_theta,
)
from .em import (
    CoefPath,
    Dataset,
    FitOptions,
    FitResult,
    WeightState,
    coordinate_consistency_check,
    estep,
    fit_map,
    log_posterior,
    mstep_initial,
    mstep_interior,
    mstep_terminal,
    save_fit,
)
from .errors import (
    ConfigurationError,
    DesignError,
    DssError,
    NumericalError,
    ParameterError,
    StructuralError,
)
from .params import DssParams
from .penalty import (
    ShrinkageBreakdown,
    prospective_pen,
    prospective_shrinkage,
    pstar,
    retrospective_pen,
    retrospective_shrinkage,
    total_pen,
    total_shrinkage,
)
from .threshold import (
    ThresholdPair,
    fixed_point_residual,
    one_site_map,
    one_site_objective,
    selection_thresholds,
)

__all__ = [
    "__version__",
    "DssParams",
    "DssPath",
    "spike_pdf",
    "slab_cond_pdf",
    "slab_mean",
    "slab_stationary_pdf",
    "stationary_mixture_pdf",
    "stationary_mixture_cdf",
    "transition_theta",
    "theta_turning_point",
    "printed_turning_point",
    "sample_dss_path",
    "ShrinkageBreakdown",
    "prospective_pen",
    "retrospective_pen",
    "total_pen",
    "pstar",
    "prospective_shrinkage",
    "retrospective_shrinkage",
    "total_shrinkage",
    "ThresholdPair",
    "selection_thresholds",
    "one_site_map",
    "one_site_objective",
    "fixed_point_residual",
    "Dataset",
    "CoefPath",
    "WeightState",
    "FitOptions",
    "FitResult",
    "estep",
    "mstep_interior",
    "mstep_terminal",
    "mstep_initial",
    "log_posterior",
    "fit_map",
    "coordinate_consistency_check",
    "save_fit",
    "DssError",
    "ParameterError",
    "StructuralError",
    "DesignError",
    "NumericalError",
    "ConfigurationError",
]
