"""Tempered-tilt density-ratio unlearning at desk scale.

Estimate a retain density from a mixture by tempering the base density and
tilting it with a learned retain-vs-forget classifier; measure Retain and
Forget Error; check every finite-sample bound numerically; and drive the
same inference rule through a tiny tabular language model.
"""

from ._kernels import NUMBA_ENABLED
from .dist import GaussianComponent, Mixture, QuadratureError, UniformComponent, quadrature
from .classifier import (
    LabeledDataset,
    OptimizerConfig,
    PiecewiseClassifier,
    QuadClassifier,
    TrainingError,
    bayes_classifier,
    estimate_excess_risk,
    imbalance_corrected_tilt,
    train,
    witness_classifier,
)
from .estimator import ImportanceSamplingError, T3Estimator, build, tempered_oracle
from .metrics import ErrorEstimate, closed_form_errors, forget_error, retain_error

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED",
    "GaussianComponent",
    "UniformComponent",
    "Mixture",
    "QuadratureError",
    "quadrature",
    "LabeledDataset",
    "OptimizerConfig",
    "QuadClassifier",
    "PiecewiseClassifier",
    "TrainingError",
    "bayes_classifier",
    "witness_classifier",
    "train",
    "estimate_excess_risk",
    "imbalance_corrected_tilt",
    "T3Estimator",
    "ImportanceSamplingError",
    "build",
    "tempered_oracle",
    "ErrorEstimate",
    "retain_error",
    "forget_error",
    "closed_form_errors",
    "__version__",
]
