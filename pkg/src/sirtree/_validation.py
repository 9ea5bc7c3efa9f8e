"""Small input-checking helpers used across the package."""

import math
import numbers

import numpy as np

from .exceptions import DimensionError, ParameterError


def check_scalar(x, name, *, lower=None, upper=None, lower_inclusive=False,
                 upper_inclusive=False, integer=False):
    """Validate a scalar and return it as float (or int when ``integer``)."""
    if isinstance(x, bool) or not isinstance(x, numbers.Real):
        raise ParameterError(f"{name} must be a real number, got {x!r}")
    if integer:
        if isinstance(x, numbers.Integral):
            x = int(x)
        elif float(x).is_integer():
            x = int(x)
        else:
            raise ParameterError(f"{name} must be an integer, got {x!r}")
    else:
        x = float(x)
    if not math.isfinite(x):
        raise ParameterError(f"{name} must be finite, got {x!r}")
    if lower is not None:
        bad = x < lower if lower_inclusive else x <= lower
        if bad:
            op = ">=" if lower_inclusive else ">"
            raise ParameterError(f"{name} must be {op} {lower}, got {x!r}")
    if upper is not None:
        bad = x > upper if upper_inclusive else x >= upper
        if bad:
            op = "<=" if upper_inclusive else "<"
            raise ParameterError(f"{name} must be {op} {upper}, got {x!r}")
    return x


def as_float_array(values, name, *, ndim=None):
    arr = np.asarray(values, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    return arr


def check_nonnegative(values, name):
    arr = np.asarray(values, dtype=float)
    if np.isnan(arr).any() or (arr < 0).any():
        raise ParameterError(f"{name} must be >= 0")
    return arr


def check_length(arr, n, name):
    if arr.shape != (n,):
        raise DimensionError(f"{name} has shape {arr.shape}, expected ({n},)")
    return arr
