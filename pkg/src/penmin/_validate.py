"""Small input-validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def as_float_vector(x, n: int | None = None, name: str = "x") -> np.ndarray:
    """Coerce to a 1-d float64 array, optionally enforcing its length."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {v.shape}")
    if n is not None and v.size != n:
        raise ValueError(f"{name} must have length {n}, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must contain only finite values")
    return v


def as_square_matrix(m, n: int | None = None, name: str = "matrix") -> np.ndarray:
    """Coerce to a square 2-d float64 array, optionally of a given side."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if n is not None and a.shape[0] != n:
        raise ValueError(f"{name} must be {n}x{n}, got {a.shape[0]}x{a.shape[1]}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must contain only finite values")
    return a


def check_symmetric(a: np.ndarray, tol: float = 1e-10, name: str = "matrix") -> np.ndarray:
    if np.max(np.abs(a - a.T), initial=0.0) > tol:
        raise ValueError(f"{name} must be symmetric to tolerance {tol:g}")
    return a
