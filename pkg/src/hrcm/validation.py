"""Input validation helpers for the estimator API."""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError


def check_points(X) -> np.ndarray:
    """Coerce to a finite (N, 2) float array."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != 2:
        raise ConfigurationError(f"expected an (N, 2) point array, got shape {X.shape}")
    if X.shape[0] < 1:
        raise ConfigurationError("point array is empty")
    if not np.all(np.isfinite(X)):
        raise ConfigurationError("point coordinates must be finite")
    return X


def check_weights(W, n_points: int) -> tuple[np.ndarray, bool]:
    """Coerce to (n_rhs, N) weights; returns (array, was_1d)."""
    W = np.asarray(W)
    if not np.issubdtype(W.dtype, np.number):
        raise ConfigurationError("weights must be numeric")
    was_1d = W.ndim == 1
    if was_1d:
        W = W[None, :]
    if W.ndim != 2 or W.shape[1] != n_points:
        raise ConfigurationError(
            f"weights must have {n_points} entries per row, got shape {W.shape}")
    if not np.all(np.isfinite(W)):
        raise ConfigurationError("weights must be finite")
    return W, was_1d


def check_fitted(estimator, attr: str = "tree_"):
    if getattr(estimator, attr, None) is None:
        raise ConfigurationError(
            f"{type(estimator).__name__} is not fitted yet; call fit(X) first")
