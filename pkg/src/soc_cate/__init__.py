"""Per-crop causal effects of sustainable practices on soil organic carbon.

Cross-fitted Double Machine Learning with a linear final stage over crop
one-hots, plus the CSV ingestion, synthetic data and reporting around it.
"""
__version__ = "0.1.0"

from .core import AnalysisUnit, SegmentVocabulary, validate_unit  # noqa: E402
from .dml import CateReport, DmlConfig, DmlFit, LinearDML, estimate  # noqa: E402
from .learners import LearnerSpec  # noqa: E402

__all__ = [
    "AnalysisUnit",
    "CateReport",
    "DmlConfig",
    "DmlFit",
    "LearnerSpec",
    "LinearDML",
    "SegmentVocabulary",
    "estimate",
    "validate_unit",
]
