"""Input validation helpers shared by the estimator front end."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils import check_array

from .errors import DimensionMismatchError


def check_pair_arrays(X, Y):
    """Validate aligned input/output sample arrays.

    Both become C-contiguous float64 2-D arrays with finite entries and
    matching shapes.
    """
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    Y = check_array(Y, dtype=np.float64, ensure_2d=True)
    if X.shape[0] != Y.shape[0]:
        raise DimensionMismatchError(
            f"X and Y must pair up: {X.shape[0]} vs {Y.shape[0]} samples"
        )
    if X.shape[1] != Y.shape[1]:
        raise DimensionMismatchError(
            f"inputs and outputs live in one state space: d={X.shape[1]} vs {Y.shape[1]}"
        )
    return X, Y


def check_positive(name: str, value) -> float:
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_mode_indices(indices) -> tuple:
    idx = tuple(int(i) for i in indices)
    if not idx or any(i < 1 for i in idx):
        raise ValueError("mode indices are 1-based and at least one is required")
    return idx
