"""Input validation shared by the estimators and the CLI."""
from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .instances import CouplingMatrix


def check_coupling(J, name: str | None = None) -> CouplingMatrix:
    """Accept a CouplingMatrix, a dense array or a scipy sparse matrix."""
    if isinstance(J, CouplingMatrix):
        return J
    if hasattr(J, "toarray"):
        J = J.toarray()
    A = check_array(J, dtype=np.float64, ensure_2d=True, ensure_min_samples=1,
                    ensure_min_features=1, input_name="J")
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"coupling matrix must be square, got shape {A.shape}")
    return CouplingMatrix(A, name=name or f"matrix-n{A.shape[0]}")


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_seed(random_state) -> int:
    """Master seeds are plain non-negative integers; None maps to 0."""
    if random_state is None:
        return 0
    if isinstance(random_state, (bool, np.bool_)) or not isinstance(random_state, numbers.Integral):
        raise TypeError("random_state must be an int or None")
    if random_state < 0:
        raise ValueError("random_state must be non-negative")
    return int(random_state)
