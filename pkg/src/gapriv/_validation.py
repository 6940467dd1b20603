"""Input validation helpers shared by the functional API and the estimators."""

import numpy as np
from sklearn.utils.validation import check_array


def as_matrix(X, name="X"):
    """Return X as a finite 2-D float64 array. Zero columns are allowed."""
    try:
        return check_array(
            X,
            dtype=np.float64,
            ensure_2d=True,
            ensure_min_samples=0,
            ensure_min_features=0,
            input_name=name,
        )
    except ValueError as exc:
        raise ValueError(f"{name}: {exc}") from None


def as_vector(y, length=None, name="y"):
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 2 and 1 in y.shape:
        y = y.ravel()
    if y.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError(f"{name} contains NaN or infinity")
    if length is not None and y.shape[0] != length:
        raise ValueError(f"{name} has length {y.shape[0]}, expected {length}")
    return y


def as_index_set(indices, n, name="R"):
    """Validate feature indices against n columns; returns a tuple in the given order."""
    out = []
    seen = set()
    for i in indices:
        i = int(i)
        if not 0 <= i < n:
            raise ValueError(f"{name}: feature index {i} out of range for {n} features")
        if i in seen:
            raise ValueError(f"{name}: duplicate feature index {i}")
        seen.add(i)
        out.append(i)
    return tuple(out)
