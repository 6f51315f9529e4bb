"""Explanatory features, error-prediction modeling, and report tables."""

from .features import (  # noqa: F401
    FeatureVector, QUESTION_TYPES, build_features, encode_features,
    flesch_kincaid, human_agreement, question_type, syllable_count,
)
from .errmodel import (  # noqa: F401
    CvReport, DegenerateModelError, FoldError, GbdtClassifier, cross_validate,
)
from .report import report_tables  # noqa: F401
