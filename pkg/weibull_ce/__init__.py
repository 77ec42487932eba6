"""
Weibull cumulative exposure model with a threshold for step-stress life tests.

For more details about this package, please refer to the README.
"""

from __future__ import annotations

from .const import VERSION
from .data import BinSpec, Dataset, DesignTemplate, ModelParams, Observation, TestPlan
from .estimator import FitConfig, FitResult, fit
from .likelihood import log_likelihood, score_equations, score_jacobian
from .model import cdf_conditional, exposure, stage_probability
from .moments import MomentResult, curve, mean_norm, second_norm
from .simulate import generate_dataset, gof_monte_carlo, group_probabilities

__version__ = VERSION

__all__ = [
    "BinSpec",
    "Dataset",
    "DesignTemplate",
    "FitConfig",
    "FitResult",
    "ModelParams",
    "MomentResult",
    "Observation",
    "TestPlan",
    "cdf_conditional",
    "curve",
    "exposure",
    "fit",
    "generate_dataset",
    "gof_monte_carlo",
    "group_probabilities",
    "log_likelihood",
    "mean_norm",
    "score_equations",
    "score_jacobian",
    "second_norm",
    "stage_probability",
]
