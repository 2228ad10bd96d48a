"""Two-argument scale functions of a one-dimensional diffusion.

For a base point ``y`` the function ``x -> W^{(q)}(x, y)`` is the
increasing eigenfunction ``psi_y`` solving the Volterra equation

    psi_y(x) = (s(x) - s(y)) + q int_y^x (s(x) - s(u)) psi_y(u) m'(u) du,

normalised by ``d psi_y / ds = 1`` at ``y`` with one global scale function
``s`` (see :class:`~scalekit.models.DiffusionModel`).  The integral is
discretised with the trapezoid rule; because the kernel vanishes on the
diagonal the scheme is explicit and marches left to right with O(h^2)
error.
"""
import math

import numpy as np
from scipy.interpolate import PchipInterpolator
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_grid, check_nonnegative, check_points, uniform_grid
from .exceptions import GridError
from .models import DiffusionModel, derive_scale_speed


def _trapezoid_weights(grid):
    w = np.empty_like(grid)
    w[0] = 0.5 * (grid[1] - grid[0])
    w[-1] = 0.5 * (grid[-1] - grid[-2])
    w[1:-1] = 0.5 * (grid[2:] - grid[:-2])
    return w


def volterra_march(grid, s, dm, q):
    """Solve the Volterra equation for the base ``grid[0]``.

    ``s`` and ``dm`` are the scale function and speed density on ``grid``.
    """
    s = s - s[0]
    psi = s.copy()
    if q == 0:
        return psi
    w = _trapezoid_weights(grid)
    n = grid.size
    acc_a = 0.0  # sum_i w_i psi_i m_i
    acc_b = 0.0  # sum_i w_i s_i psi_i m_i
    # node 0 contributes nothing since psi(base) = 0
    for k in range(1, n):
        psi[k] = s[k] + q * (s[k] * acc_a - acc_b)
        if k < n - 1:
            g = w[k] * psi[k] * dm[k]
            acc_a += g
            acc_b += g * s[k]
    return psi


def volterra_z_profile(grid, s, dm, q):
    """``Z^{(q)}(x_k, grid[0])`` at every node ``x_k``.

    Marches all base points ``grid[j]`` simultaneously; at step ``k`` the
    column ``W(x_k, x_j)``, ``j <= k``, is integrated against ``m'`` by the
    trapezoid rule on ``[grid[0], x_k]``.  Memory is O(n).
    """
    n = grid.size
    z = np.ones(n)
    if q == 0:
        return z
    acc_a = np.zeros(n)
    acc_b = np.zeros(n)
    w_inner = _trapezoid_weights(grid)
    for k in range(1, n):
        col = (s[k] - s[:k]) + q * (s[k] * acc_a[:k] - acc_b[:k])
        # trapezoid over z in [x_0, x_k]; W(x_k, x_k) = 0
        z[k] = 1.0 + q * np.dot(w_inner[:k] * dm[:k], col)
        if k < n - 1:
            g = w_inner[k] * col * dm[k]
            acc_a[:k] += g
            acc_b[:k] += g * s[k]
    return z


class DiffusionScale(BaseEstimator, TransformerMixin):
    """``x -> W^{(q)}(x, base)`` and ``Z^{(q)}(x, base)`` for a diffusion.

    Parameters
    ----------
    model : DiffusionModel
    q : float, default=0.0
    base : float, default=0.0
        The second argument ``y`` of ``W(x, y)``.
    grid : array-like, optional
        Increasing nodes starting at ``base``.  When omitted a uniform grid
        from ``base`` to ``right`` with spacing at most ``step`` is used.
    step : float, default=1e-3
    right : float, optional
        Right end of the default grid.

    Attributes
    ----------
    grid_, psi_, s_, m_density_ : ndarray
        Solver nodes, ``psi_base`` values, ``s - s(base)`` and ``m'``.
    """

    def __init__(self, model=None, q=0.0, base=0.0, grid=None, step=1e-3, right=None):
        self.model = model
        self.q = q
        self.base = base
        self.grid = grid
        self.step = step
        self.right = right

    def fit(self, X=None, y=None):
        if not isinstance(self.model, DiffusionModel):
            raise TypeError("model must be a DiffusionModel")
        q = check_nonnegative(self.q, "q")
        base = float(self.base)
        if self.grid is not None:
            grid = check_grid(self.grid)
            if abs(grid[0] - base) > 1e-12 * max(1.0, abs(base)):
                raise GridError("grid must start at base")
        else:
            if self.right is None or not self.right > base:
                raise GridError("need right > base when no grid is given")
            grid = uniform_grid(base, float(self.right), float(self.step))
        table = derive_scale_speed(self.model, grid[0], grid)
        self.q_ = q
        self.grid_ = grid
        self.s_ = table.s
        self.m_density_ = table.dm
        self.psi_ = volterra_march(grid, table.s, table.dm, q)
        self._interp = PchipInterpolator(grid, self.psi_, extrapolate=False)
        self._z = None
        return self

    @property
    def _snap(self):
        return 1e-9 * float(np.min(np.diff(self.grid_)))

    def _locate(self, x):
        x = check_points(x, "x")
        base, right = self.grid_[0], self.grid_[-1]
        if np.any(x > right + self._snap):
            raise GridError(f"x beyond the solved grid (right end {right})")
        below = x < base - self._snap
        return np.clip(x, base, right), below

    def w(self, x):
        """``W^{(q)}(x, base)``; zero for ``x <= base``."""
        check_is_fitted(self, "psi_")
        scalar = np.ndim(x) == 0
        xc, below = self._locate(x)
        out = self._interp(xc)
        out[below] = 0.0
        out[xc <= self.grid_[0]] = 0.0
        return float(out[0]) if scalar else out

    def z(self, x):
        """``Z^{(q)}(x, base) = 1 + q int_(base, x) W(x, u) m(du)``."""
        check_is_fitted(self, "psi_")
        scalar = np.ndim(x) == 0
        xc, below = self._locate(x)
        if self._z is None:
            zs = volterra_z_profile(self.grid_, self.s_, self.m_density_, self.q_)
            self._z = PchipInterpolator(self.grid_, zs, extrapolate=False)
        out = self._z(xc)
        out[below | (xc <= self.grid_[0])] = 1.0
        return float(out[0]) if scalar else out

    def predict(self, X):
        return self.w(check_points(X))

    def transform(self, X):
        x = check_points(X)
        return np.column_stack([self.w(x), self.z(x)])

    def get_feature_names_out(self, input_features=None):
        return np.array(["W", "Z"], dtype=object)


def solve_psi(model, q, base, grid):
    """Solve for ``psi_base`` on ``grid`` (which must start at ``base``)."""
    return DiffusionScale(model=model, q=q, base=base, grid=grid).fit()


def w_diff(scale, x, y):
    """``W^{(q)}(x, y)`` from a scale solved at base ``y``."""
    _check_base(scale, y)
    return scale.w(x)


def z_diff(scale, x, y):
    _check_base(scale, y)
    return scale.z(x)


def _check_base(scale, y):
    check_is_fitted(scale, "psi_")
    if not math.isclose(float(y), scale.grid_[0], rel_tol=0, abs_tol=scale._snap + 1e-12):
        raise ValueError(f"scale was solved at base {scale.grid_[0]}, not {y}")
