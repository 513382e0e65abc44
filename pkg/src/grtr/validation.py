"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np

__all__ = ["check_tensor_samples", "check_fitted_shape"]


def check_tensor_samples(X, y=None, min_order: int = 1):
    """Coerce stacked tensor samples (and optional labels) to float64 arrays.

    X must stack M samples of order >= `min_order` along its first axis and
    contain only finite values; y, when given, must be one finite label per
    sample.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim < min_order + 1:
        raise ValueError(
            f"X must have shape (n_samples, I_1, ..., I_N) with N >= {min_order}; got {X.shape}"
        )
    if X.shape[0] == 0:
        raise ValueError("X has no samples")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")
    if y is None:
        return X
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size != X.shape[0]:
        raise ValueError(f"X has {X.shape[0]} samples but y has {y.size} entries")
    if not np.all(np.isfinite(y)):
        raise ValueError("y contains non-finite values")
    return X, y


def check_fitted_shape(X, mode_shape: tuple) -> np.ndarray:
    """Validate prediction inputs against the shape seen during fit."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1:] != tuple(mode_shape):
        raise ValueError(
            f"X samples have shape {X.shape[1:]}, expected {tuple(mode_shape)}"
        )
    return X
