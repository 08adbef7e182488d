"""Random-effects meta-analysis with HKSJ and modified Knapp-Hartung intervals."""

from .errors import (
    ContractError,
    ConvergenceError,
    CsvFormatError,
    DomainError,
    InsufficientDataError,
    MetaAnalysisError,
)
from .heterogeneity import (
    Estimator,
    TauEstimate,
    TauInterval,
    dl_estimate,
    estimate_tau2,
    generalized_q,
    pm_estimate,
    q_profile_ci,
    reml_estimate,
)
from .inference import AnalysisResult, ConfidenceInterval, Method, analyze
from .io import hinks2010, parse_study_csv, read_study_csv
from .model import Dataset, Study

__version__ = "0.1.0"

__all__ = [
    "AnalysisResult",
    "ConfidenceInterval",
    "ContractError",
    "ConvergenceError",
    "CsvFormatError",
    "Dataset",
    "DomainError",
    "Estimator",
    "InsufficientDataError",
    "MetaAnalysisError",
    "Method",
    "Study",
    "TauEstimate",
    "TauInterval",
    "analyze",
    "dl_estimate",
    "estimate_tau2",
    "generalized_q",
    "hinks2010",
    "parse_study_csv",
    "pm_estimate",
    "q_profile_ci",
    "read_study_csv",
    "reml_estimate",
]
