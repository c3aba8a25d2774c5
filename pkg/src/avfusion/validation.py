"""Small array-validation helpers shared by the estimators and frontends."""

from __future__ import annotations

import numpy as np

from .errors import ShapeMismatch


def as_float_array(x, name: str, dtype=np.float64) -> np.ndarray:
    arr = np.asarray(x, dtype=dtype)
    if not np.all(np.isfinite(arr)):
        raise ShapeMismatch(f"{name} contains NaN or Inf")
    return arr


def check_ndim(x: np.ndarray, ndim: int, name: str) -> np.ndarray:
    if x.ndim != ndim:
        raise ShapeMismatch(f"{name} must be {ndim}-D, got shape {x.shape}")
    return x


def check_feature_matrix(X, n_features: int | None = None, name: str = "X") -> np.ndarray:
    """Validate a 2-D finite sample matrix, optionally pinning the column count."""
    X = as_float_array(X, name)
    check_ndim(X, 2, name)
    if n_features is not None and X.shape[1] != n_features:
        raise ShapeMismatch(f"{name} has {X.shape[1]} features, expected {n_features}")
    return X


def check_labels(y, n_samples: int, name: str = "y") -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != n_samples:
        raise ShapeMismatch(f"{name} must be 1-D with {n_samples} entries, got shape {y.shape}")
    values = set(np.unique(y).tolist())
    if not values <= {0, 1}:
        raise ShapeMismatch(f"{name} must be binary 0/1 labels, got values {sorted(values)}")
    return y.astype(np.int64)
