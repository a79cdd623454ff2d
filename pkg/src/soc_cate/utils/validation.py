"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from ..exceptions import DimensionMismatchError, InvalidModifierError


def check_matrix(X, allow_empty: bool = False) -> np.ndarray:
    """Return ``X`` as a finite 2-D float array."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if X.size else X.reshape(0, 0)
    if X.shape[0] == 0:
        if allow_empty:
            return X
        return X.reshape(0, X.shape[1] if X.ndim == 2 else 0)
    return check_array(X, dtype=float, ensure_all_finite=True)


def check_vector(y, n: int | None = None, name: str = "y") -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    if not np.all(np.isfinite(y)):
        raise ValueError(f"{name} contains non-finite values")
    if n is not None and y.shape[0] != n:
        raise DimensionMismatchError(f"{name} has length {y.shape[0]}, expected {n}")
    return y


def check_binary(t, n: int | None = None, name: str = "T") -> np.ndarray:
    t = check_vector(t, n, name)
    if not np.all((t == 0) | (t == 1)):
        raise ValueError(f"{name} must be binary 0/1")
    return t


def check_one_hot(X, n: int | None = None) -> np.ndarray:
    """Validate a matrix whose rows each contain exactly one 1."""
    X = check_matrix(X)
    if n is not None and X.shape[0] != n:
        raise DimensionMismatchError(f"X has {X.shape[0]} rows, expected {n}")
    if not np.all((X == 0) | (X == 1)) or not np.all(X.sum(axis=1) == 1):
        raise InvalidModifierError("modifiers must be one-hot rows")
    return X


def check_n_features(X, expected: int) -> None:
    if X.shape[1] != expected:
        raise DimensionMismatchError(f"expected {expected} features, got {X.shape[1]}")
