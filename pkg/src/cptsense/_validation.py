"""Small input-validation helpers shared by the estimators and simulators."""
import numbers

import numpy as np
from sklearn.utils import check_array


def check_positive(name, value, allow_zero=False):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{name} must be {bound}, got {value!r}")
    return float(value)


def check_int(name, value, minimum):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value!r}")
    return int(value)


def check_counts(X):
    """Validate photon counts and return them as a 2-D int64 array.

    A 1-D input is treated as a single count series.  Rows are series
    (runs), columns are time bins.
    """
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[np.newaxis, :]
    X = check_array(X, dtype=None, ensure_2d=True, ensure_all_finite=True)
    if X.size and not np.all(np.equal(np.mod(X, 1), 0)):
        raise ValueError("photon counts must be integers")
    X = X.astype(np.int64)
    if X.size and X.min() < 0:
        raise ValueError("photon counts must be nonnegative")
    return X


def check_series(X, name="X"):
    """Validate a real-valued series (or batch of series) as a 2-D float array."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[np.newaxis, :]
    return check_array(X, ensure_2d=True, ensure_all_finite=True, input_name=name)
