"""Cross-fitted Double Machine Learning with a linear final stage."""
from .estimator import (
    DmlConfig,
    LinearDML,
    NuisancePredictions,
    crossfit_nuisances,
    estimate,
    residualize,
)
from .final_stage import DmlFit, cate_for, fit_final_stage
from .folds import FoldPlan, make_folds
from .inference import CateReport, SegmentEstimate, inference, segment_row
from .stats import critical_value, normal_cdf, normal_ppf

__all__ = [
    "CateReport",
    "DmlConfig",
    "DmlFit",
    "FoldPlan",
    "LinearDML",
    "NuisancePredictions",
    "SegmentEstimate",
    "cate_for",
    "critical_value",
    "crossfit_nuisances",
    "estimate",
    "fit_final_stage",
    "inference",
    "make_folds",
    "normal_cdf",
    "normal_ppf",
    "residualize",
    "segment_row",
]
