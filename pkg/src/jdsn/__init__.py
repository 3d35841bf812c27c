"""Estimation for small-noise jump-diffusions observed at high frequency."""

from .errors import (
    BoundaryEvaluationError,
    ConfigError,
    JdsnError,
    ModelError,
    ParameterDomainError,
    QuadratureError,
    SimulationDivergedError,
    SingularInformationError,
    StudyError,
)
from .estimate import OptimizerOptions, classify_increments, estimate_intensity, maximize_contrast
from .fisher import FisherInformation, fisher_information, observed_information
from .mcstudy import McTable, NormalityReport, consistency_ladder, normality_diagnostics, run_replications
from .model import ModelSpec, ParameterPoint, RegimeConfig, get_model, validate_regime_ladder, validate_rho
from .simulate import ObservationRecord, simulate_path

__version__ = "0.1.0"

__all__ = [
    "BoundaryEvaluationError",
    "ConfigError",
    "FisherInformation",
    "JdsnError",
    "McTable",
    "ModelError",
    "ModelSpec",
    "NormalityReport",
    "ObservationRecord",
    "OptimizerOptions",
    "ParameterDomainError",
    "ParameterPoint",
    "QuadratureError",
    "RegimeConfig",
    "SimulationDivergedError",
    "SingularInformationError",
    "StudyError",
    "classify_increments",
    "consistency_ladder",
    "estimate_intensity",
    "fisher_information",
    "get_model",
    "maximize_contrast",
    "normality_diagnostics",
    "observed_information",
    "run_replications",
    "simulate_path",
    "validate_regime_ladder",
    "validate_rho",
]
