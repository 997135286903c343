"""Gaussian-process modelling with Matérn, confluent hypergeometric (CH) and
generalized Cauchy covariances: special functions, kernels, designs,
likelihood-based fitting, kriging, simulation and Monte Carlo studies."""

__version__ = "1.0.0"

from .errors import (  # noqa: E402
    BracketError,
    ConvergenceError,
    DecompositionError,
    DomainError,
    OptimizationError,
)
from .kernels import CHParams, GCParams, MaternParams, TensorSpec  # noqa: E402
from .design import Locations  # noqa: E402
from .gp import Dataset, FitResult, GPModel, PredictionResult  # noqa: E402

__all__ = [
    "BracketError",
    "ConvergenceError",
    "DecompositionError",
    "DomainError",
    "OptimizationError",
    "CHParams",
    "GCParams",
    "MaternParams",
    "TensorSpec",
    "Locations",
    "Dataset",
    "FitResult",
    "GPModel",
    "PredictionResult",
]
