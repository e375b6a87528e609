"""Core numerics of the one-bit spectral estimator."""

import sys
from pathlib import Path

# Ensure proper path setup
current_dir = Path(__file__).parent
src_dir = current_dir.parent
sys.path.insert(0, str(src_dir))

from .errors import (
    OneBitError,
    ValidationError,
    ScenarioFileError,
    NumericalError,
    QuadratureError,
    FactorizationError,
    SingularFisherError,
    McReportInvalid,
    exit_code_for,
)
from .model import Scenario, ParamVector, ModelMatrices, build_model, build_ry, build_sigma_y
from .orthant import CorrSubset, arcsine_pair, orthant3, orthant4, sign_moment4
from .auxstats import AuxMoments, PairIndex, aux_moments, mean_stats, jac_mean_stats, cov_stats
from .moment_cache import FourthMomentTable, MomentCache, get_moment_cache
from .infometrics import FisherReport, fisher_quantized, fisher_ideal, fisher_exact, info_loss, predict_sigma
from .estimator import ScoringConfig, EstimationResult, estimate_quant, estimate_ideal
from .simkit import EstimatorMode, McReport, TrialBatch, sample_windows, hard_limit, run_mc

__all__ = [
    "OneBitError",
    "ValidationError",
    "ScenarioFileError",
    "NumericalError",
    "QuadratureError",
    "FactorizationError",
    "SingularFisherError",
    "McReportInvalid",
    "exit_code_for",
    "Scenario",
    "ParamVector",
    "ModelMatrices",
    "build_model",
    "build_ry",
    "build_sigma_y",
    "CorrSubset",
    "arcsine_pair",
    "orthant3",
    "orthant4",
    "sign_moment4",
    "AuxMoments",
    "PairIndex",
    "aux_moments",
    "mean_stats",
    "jac_mean_stats",
    "cov_stats",
    "FourthMomentTable",
    "MomentCache",
    "get_moment_cache",
    "FisherReport",
    "fisher_quantized",
    "fisher_ideal",
    "fisher_exact",
    "info_loss",
    "predict_sigma",
    "ScoringConfig",
    "EstimationResult",
    "estimate_quant",
    "estimate_ideal",
    "EstimatorMode",
    "McReport",
    "TrialBatch",
    "sample_windows",
    "hard_limit",
    "run_mc",
]
