"""Graph-regularized tensor regression.

Multilinear regression with a CPD-factored weight tensor, trained by
per-mode gradient descent with optional graph Laplacian smoothness
penalties, plus linear and unregularized tensor baselines and the
experiment harnesses that exercise them.
"""

from .cpd import CpdFactors, load_factors, save_factors
from .estimators import (
    GraphRegularizedTensorRegression,
    TensorRegression,
    VectorizedLinearRegression,
)
from .exceptions import DataError, DivergenceError, GrtrError
from .graph import GraphSpec, kernel_adjacency, laplacian_from_adjacency, sector_adjacency, smoothness
from .model import GrtrConfig, TrainTrace

__version__ = "0.1.0"

__all__ = [
    "CpdFactors",
    "DataError",
    "DivergenceError",
    "GraphRegularizedTensorRegression",
    "GraphSpec",
    "GrtrConfig",
    "GrtrError",
    "TensorRegression",
    "TrainTrace",
    "VectorizedLinearRegression",
    "kernel_adjacency",
    "laplacian_from_adjacency",
    "load_factors",
    "save_factors",
    "sector_adjacency",
    "smoothness",
    "__version__",
]
