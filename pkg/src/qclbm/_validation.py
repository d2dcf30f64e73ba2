"""Input checks shared by the estimators and the CLI."""
from __future__ import annotations

import numbers

import numpy as np

from .lattice import Q


def check_populations(X, name="X") -> np.ndarray:
    """Return populations as a finite float array of shape ``(ny, nx, 9)``."""
    X = np.asarray(getattr(X, "values", X), dtype=float)
    if X.ndim != 3 or X.shape[2] != Q:
        raise ValueError(f"{name} must have shape (ny, nx, 9), got {X.shape}")
    if X.shape[0] < 2 or X.shape[1] < 2:
        raise ValueError(f"{name} needs at least a 2x2 lattice")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains NaN or inf")
    return X


def check_vector(v, size=None, name="b") -> np.ndarray:
    v = np.asarray(v)
    if v.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if size is not None and v.size != size:
        raise ValueError(f"{name} has length {v.size}, expected {size}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains NaN or inf")
    if not np.any(v):
        raise ValueError(f"{name} must be nonzero")
    return v


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_positive(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not value > 0:
        raise ValueError(f"{name} must be a positive number, got {value!r}")
    return float(value)


def check_omega(value, name: str = "omega") -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not 0 < value < 2:
        raise ValueError(f"unstable relaxation: {name}={value!r} outside (0, 2)")
    return float(value)
