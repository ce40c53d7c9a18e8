"""Small input-validation helpers shared across modules."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .errors import ParameterError


def check_positive(value, name: str, allow_zero: bool = False) -> float:
    value = float(value)
    ok = value >= 0 if allow_zero else value > 0
    if not (np.isfinite(value) and ok):
        bound = ">= 0" if allow_zero else "> 0"
        raise ParameterError(f"{name} must be finite and {bound}, got {value}")
    return value


def check_symbols(data, num_symbols: int | None = None) -> np.ndarray:
    """1-D integer array of symbols, optionally checked against an alphabet size."""
    arr = np.asarray(data)
    if arr.ndim != 1:
        arr = arr.ravel()
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.round(arr)):
            raise ParameterError("symbols must be integers")
    arr = arr.astype(np.int64)
    if arr.size and arr.min() < 0:
        raise ParameterError("symbols must be nonnegative")
    if num_symbols is not None and arr.size and arr.max() >= num_symbols:
        raise ParameterError(f"symbol {arr.max()} outside alphabet of size {num_symbols}")
    return arr


def check_samples(X, ensure_2d: bool = True, min_samples: int = 1) -> np.ndarray:
    """Finite float array; 1-D input becomes a column when ``ensure_2d``."""
    X = np.asarray(X, dtype=np.float64)
    if ensure_2d and X.ndim == 1:
        X = X[:, None]
    return check_array(X, ensure_2d=ensure_2d, ensure_min_samples=min_samples, dtype=np.float64)


def check_same_shape(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    return x, y


def check_rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)
