"""Input validation helpers shared by the estimators and functionals."""
import math

import numpy as np
from sklearn.utils import check_array

from .exceptions import GridError


def check_points(X, name="X"):
    """Coerce ``X`` to a 1-D float array of evaluation points.

    Accepts a scalar, a 1-D array-like, or a single-column 2-D array-like
    (the scikit-learn ``(n_samples, 1)`` convention).
    """
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    arr = check_array(arr, ensure_2d=False, dtype=float, input_name=name)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValueError(f"{name} must have a single column, got shape {arr.shape}")
        arr = arr[:, 0]
    return arr


def check_grid(grid, name="grid", min_size=2):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < min_size:
        raise GridError(f"{name} must be 1-D with at least {min_size} nodes")
    if not np.all(np.isfinite(grid)):
        raise GridError(f"{name} contains non-finite nodes")
    if np.any(np.diff(grid) <= 0):
        raise GridError(f"{name} must be strictly increasing")
    return grid


def check_nonnegative(value, name):
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be a finite number >= 0, got {value!r}")
    return value


def check_positive(value, name):
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a finite number > 0, got {value!r}")
    return value


def uniform_grid(start, stop, step):
    """Uniform grid from ``start`` to ``stop`` whose spacing is at most ``step``.

    The spacing is shrunk so that ``stop`` is a node.
    """
    n = max(1, math.ceil((stop - start) / step - 1e-9))
    return np.linspace(start, stop, n + 1)
