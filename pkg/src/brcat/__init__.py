"""Mean and median bias-reduced estimation for binary, nominal and ordinal logit models."""

__version__ = "0.1.0"

from .diagnostics import SeparationReport, SeparationStatus, detect_separation, empirical_adjacent_logits
from .estimator import AdjacentCategoriesLogit, BaselineCategoryLogit, BiasReducedLogisticRegression
from .exceptions import (BrcatError, ConvergenceError, DataError, ModelError, RankDeficiencyError,
                         SingularInformationError, SolverError)
from .fitting import FitOptions, FitResult, fit, refit_under_contrast
from .inference import (odds_ratio_estimates, odds_ratio_estimators, parallel_contrast, summary_superiority,
                        superiority, transform_bias, wald_test, z_table)
from .likelihood import (adjustment_terms, expected_info, log_likelihood, mean_adjustment,
                         median_modification, multinomial_constant, p_tensor, score)
from .model import (Dataset, Family, ModelMatrix, ModelSpec, Parameterization, ParamVector, acl_from_bcl,
                    bcl_from_acl, build_model, parse_dataset)
from .poisson import fit_mbr_poisson
from .simulation import BiasReport, BiasStudyConfig, run_bias_study, sample_responses

__all__ = [
    "AdjacentCategoriesLogit", "BaselineCategoryLogit", "BiasReducedLogisticRegression",
    "BiasReport", "BiasStudyConfig", "BrcatError", "ConvergenceError", "DataError", "Dataset",
    "Family", "FitOptions", "FitResult", "ModelError", "ModelMatrix", "ModelSpec", "ParamVector",
    "Parameterization", "RankDeficiencyError", "SeparationReport", "SeparationStatus",
    "SingularInformationError", "SolverError", "acl_from_bcl", "adjustment_terms", "bcl_from_acl",
    "build_model", "detect_separation", "empirical_adjacent_logits", "expected_info", "fit",
    "fit_mbr_poisson", "log_likelihood", "mean_adjustment", "median_modification",
    "multinomial_constant", "odds_ratio_estimates", "odds_ratio_estimators", "p_tensor",
    "parallel_contrast", "parse_dataset", "refit_under_contrast", "run_bias_study",
    "sample_responses", "score", "summary_superiority", "superiority", "transform_bias",
    "wald_test", "z_table",
]
