"""Zero-attracting LMS: adaptive filter, transient model and Monte Carlo validation."""

__version__ = "0.1.0"

from .errors import (ConfigError, DivergenceError, DomainError, MomentConsistencyError,
                     OracleFailure)
from .filtering import AlgoParams, FilterState, za_lms_step
from .gaussmath import Gaussian1, Gaussian2, lemma1_sign_mean, lemma2_sign_product, lemma3_cross_moment
from .harness import EnsembleConfig, JointDump, compare_curves, run_ensemble
from .signals import InputModel, PlantSpec, SeedSpec
from .theory import ModelKind, TheoryState, run_model

__all__ = [
    "AlgoParams", "ConfigError", "DivergenceError", "DomainError", "EnsembleConfig",
    "FilterState", "Gaussian1", "Gaussian2", "InputModel", "JointDump", "ModelKind",
    "MomentConsistencyError", "OracleFailure", "PlantSpec", "SeedSpec", "TheoryState",
    "compare_curves", "lemma1_sign_mean", "lemma2_sign_product", "lemma3_cross_moment",
    "run_ensemble", "run_model", "za_lms_step",
]
