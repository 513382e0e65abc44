"""Scikit-learn style estimators wrapping the regression core.

Three regressors cover the model family:

* :class:`GraphRegularizedTensorRegression` learns CPD factors with per-mode
  graph smoothness penalties (the full model).
* :class:`TensorRegression` is the same training loop without graphs: plain
  tensor regression, or factor-wise L2 shrinkage via ``l2 > 0`` (equivalent
  to identity Laplacians).
* :class:`VectorizedLinearRegression` flattens the inputs and solves ordinary
  or ridge least squares in closed form.

All of them accept ``X`` of shape (n_samples, I_1, ..., I_N) and a scalar
label per sample, and expose the usual ``fit`` / ``predict`` / ``get_params``
surface so they compose with model selection utilities.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from . import model as _model
from .validation import check_fitted_shape, check_tensor_samples

__all__ = [
    "GraphRegularizedTensorRegression",
    "TensorRegression",
    "VectorizedLinearRegression",
]


class _FactorRegressorBase(RegressorMixin, BaseEstimator):
    """Shared fit/predict machinery for the CPD-factor regressors."""

    def _config(self) -> _model.GrtrConfig:
        raise NotImplementedError

    def _laplacians(self, n_modes: int):
        raise NotImplementedError

    def fit(self, X, y):
        X, y = check_tensor_samples(X, y)
        config = self._config()
        laplacians = self._laplacians(X.ndim - 1)
        factors, bias, trace = _model.fit_gd(X, y, config, laplacians)
        self.factors_ = factors
        self.bias_ = bias
        self.trace_ = trace
        self.mode_shape_ = factors.shape
        return self

    def predict(self, X):
        X = check_fitted_shape(X, self.mode_shape_)
        path = getattr(self, "inference", "materialized")
        return _model.predict_batch(self.factors_, self.bias_, X, path=path)

    def n_params(self, include_bias: bool = False) -> int:
        """Trainable parameter count R * sum(I_n), plus one if the bias is counted."""
        return self.factors_.n_params + (1 if include_bias else 0)


class GraphRegularizedTensorRegression(_FactorRegressorBase):
    """Tensor regression whose factor learning is smoothed by mode graphs.

    Parameters
    ----------
    rank : int
        CPD rank of the weight tensor.
    lambdas : float or sequence of float
        Regularization strength, one value per mode or a single shared value.
    laplacians : None, 'identity', or sequence
        Mode Laplacians: a list with one entry per mode, each a GraphSpec, a
        Laplacian matrix, or None for unregularized modes. 'identity' uses
        identity matrices on every mode (factor-wise L2 shrinkage). None
        disables the smoothness term entirely.
    learning_rate, tolerance, max_steps, seed, init_scale, bias_update
        Gradient-descent settings; see :class:`grtr.model.GrtrConfig`.
    rho : unused
        Accepted for interface compatibility and ignored (with a warning).
    inference : {'materialized', 'factored'}
        Whether :meth:`predict` reconstructs the dense weight tensor or
        contracts the factors directly.
    """

    def __init__(
        self,
        rank: int = 1,
        lambdas=0.0,
        laplacians=None,
        learning_rate: float = 1e-2,
        tolerance: float = 0.0,
        max_steps: int = 500,
        seed: int = 0,
        init_scale: float = 0.1,
        bias_update: str = "per_mode",
        rho=None,
        inference: str = "materialized",
    ):
        self.rank = rank
        self.lambdas = lambdas
        self.laplacians = laplacians
        self.learning_rate = learning_rate
        self.tolerance = tolerance
        self.max_steps = max_steps
        self.seed = seed
        self.init_scale = init_scale
        self.bias_update = bias_update
        self.rho = rho
        self.inference = inference

    def _config(self) -> _model.GrtrConfig:
        return _model.GrtrConfig(
            rank=self.rank,
            lambdas=self.lambdas,
            learning_rate=self.learning_rate,
            tolerance=self.tolerance,
            max_steps=self.max_steps,
            seed=self.seed,
            init_scale=self.init_scale,
            bias_update=self.bias_update,
            rho=self.rho,
        )

    def _laplacians(self, n_modes: int):
        return self.laplacians


class TensorRegression(_FactorRegressorBase):
    """Plain CPD tensor regression, optionally with factor-wise L2 shrinkage.

    ``l2 == 0`` trains the unregularized model; ``l2 > 0`` penalizes
    0.5 * l2 * ||U^(n)||_F^2 on every mode, which is the graph model with
    identity Laplacians.
    """

    def __init__(
        self,
        rank: int = 1,
        l2: float = 0.0,
        learning_rate: float = 1e-2,
        tolerance: float = 0.0,
        max_steps: int = 500,
        seed: int = 0,
        init_scale: float = 0.1,
        bias_update: str = "per_mode",
        inference: str = "materialized",
    ):
        self.rank = rank
        self.l2 = l2
        self.learning_rate = learning_rate
        self.tolerance = tolerance
        self.max_steps = max_steps
        self.seed = seed
        self.init_scale = init_scale
        self.bias_update = bias_update
        self.inference = inference

    def _config(self) -> _model.GrtrConfig:
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")
        return _model.GrtrConfig(
            rank=self.rank,
            lambdas=self.l2,
            learning_rate=self.learning_rate,
            tolerance=self.tolerance,
            max_steps=self.max_steps,
            seed=self.seed,
            init_scale=self.init_scale,
            bias_update=self.bias_update,
        )

    def _laplacians(self, n_modes: int):
        return "identity" if self.l2 > 0 else None


class VectorizedLinearRegression(RegressorMixin, BaseEstimator):
    """Linear baseline on flattened inputs, solved by the normal equations.

    ``l2 == 0`` is ordinary least squares; on rank-deficient systems follow
    `on_singular`: raise, or return the minimum-norm solution. ``l2 > 0``
    adds a ridge penalty on the weights (bias unpenalized).
    """

    def __init__(self, l2: float = 0.0, on_singular: str = "error"):
        self.l2 = l2
        self.on_singular = on_singular

    def fit(self, X, y):
        X, y = check_tensor_samples(X, y)
        self.mode_shape_ = X.shape[1:]
        self.weights_, self.bias_ = _model.fit_linear(
            X, y, l2=self.l2, on_singular=self.on_singular
        )
        return self

    def predict(self, X):
        X = check_fitted_shape(X, self.mode_shape_)
        return X.reshape(X.shape[0], -1) @ self.weights_ + self.bias_

    def n_params(self, include_bias: bool = False) -> int:
        return self.weights_.size + (1 if include_bias else 0)

    def weight_tensor(self) -> np.ndarray:
        """Weights reshaped back to the sample mode shape."""
        return self.weights_.reshape(self.mode_shape_)
