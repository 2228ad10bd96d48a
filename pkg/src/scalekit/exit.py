"""Exit-problem functionals expressed through scale functions.

All functionals take a scale provider exposing ``w(x, y)``, ``z(x, y)``,
``w_column(x, ys)`` (``W(x, .)`` at many second arguments) and
``reference_density(y)``, so the Lévy and diffusion back ends share
one implementation:

* :func:`up_exit`       ``E_x[exp(-q T_a^+); T_a^+ < T_b^-]``
* :func:`down_exit`     ``E_x[exp(-q T_b^-); T_b^- < T_a^+]``
* :func:`green_density` discounted local time at ``y`` before exit
* :func:`killed_resolvent` ``E_x[int_0^exit exp(-q t) f(X_t) dt]``
"""
from dataclasses import dataclass
from functools import lru_cache
import numpy as np
from scipy.integrate import simpson

from ._validation import check_grid, check_nonnegative
from .diffusion import DiffusionScale
from .exceptions import DegenerateWindowError
from .levy import LevyScale
from .models import DiffusionModel, SNLPModel, reflect_model, speed_density


@dataclass(frozen=True)
class ExitSpec:
    """Exit window ``(b, a)``, start ``x`` and killing rate ``q``."""

    b: float
    a: float
    x: float
    q: float = 0.0

    def __post_init__(self):
        if not (self.b < self.x < self.a):
            raise ValueError(f"need b < x < a, got b={self.b}, x={self.x}, a={self.a}")
        check_nonnegative(self.q, "q")

    def with_x(self, x):
        return ExitSpec(self.b, self.a, x, self.q)


class LevyProvider:
    """Scale provider for a Lévy model: ``W(x, y) = W^{(q)}(x - y)``."""

    reference = "lebesgue"

    def __init__(self, model, q, **scale_params):
        self.model = model
        self.q = float(q)
        self.scale = LevyScale(model, q, **scale_params).fit()

    def w(self, x, y):
        return self.scale.w(np.subtract(x, y))

    def z(self, x, y):
        return self.scale.z(np.subtract(x, y))

    def w_column(self, x, ys):
        return np.asarray(self.w(x, np.asarray(ys, dtype=float)), dtype=float)

    def reference_density(self, y):
        return np.ones_like(np.asarray(y, dtype=float))


class DiffusionProvider:
    """Scale provider for a diffusion.

    ``W(., y)`` is solved on a uniform grid from ``y`` to ``right`` with
    spacing at most ``step``; solutions are cached per base point.
    :meth:`w_column` gets ``W(x, .)`` from one solve of the reflected
    model, using ``W(x, y) = W_{-X}(-y, -x)``.
    """

    reference = "speed"

    def __init__(self, model, q, right, step=1e-3, cache_size=4096):
        self.model = model
        self.q = float(q)
        self.right = float(right)
        self.step = float(step)
        self._solve = lru_cache(maxsize=cache_size)(self._solve_uncached)
        self._solve_dual = lru_cache(maxsize=64)(self._solve_dual_uncached)
        self._dual = reflect_model(model)

    def _solve_uncached(self, y):
        return DiffusionScale(self.model, self.q, base=y, step=self.step,
                              right=self.right).fit()

    def _solve_dual_uncached(self, x, right):
        return DiffusionScale(self._dual, self.q, base=-x, step=self.step, right=right).fit()

    def w_column(self, x, ys):
        """``W(x, y)`` for every ``y`` in ``ys`` (zero where ``y >= x``)."""
        x = float(x)
        ys = np.asarray(ys, dtype=float)
        out = np.zeros(ys.shape)
        below = ys < x
        if np.any(below):
            sc = self._solve_dual(x, float(-ys[below].min()))
            out[below] = sc.w(-ys[below])
        return out

    def w(self, x, y):
        return self._eval(x, y, "w", 0.0)

    def z(self, x, y):
        return self._eval(x, y, "z", 1.0)

    def _eval(self, x, y, which, below):
        x_arr, y_arr = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        out = np.full(x_arr.shape, below, dtype=float)
        for idx in np.ndindex(x_arr.shape):
            xv, yv = float(x_arr[idx]), float(y_arr[idx])
            if xv <= yv:
                continue
            sc = self._solve(yv)
            out[idx] = getattr(sc, which)(xv)
        return float(out) if out.ndim == 0 else out

    def reference_density(self, y):
        """Speed density ``m'`` at ``y``."""
        return speed_density(self.model, y)


def scale_provider(model, q, right=None, step=1e-3, **kwargs):
    """Build the provider matching ``model``'s catalog."""
    if isinstance(model, SNLPModel):
        return LevyProvider(model, q, **kwargs)
    if isinstance(model, DiffusionModel):
        if right is None:
            raise ValueError("diffusion provider needs the right end of the window")
        return DiffusionProvider(model, q, right=right, step=step, **kwargs)
    raise TypeError(f"unsupported model type {type(model).__name__}")


def _window_norm(sp, spec):
    wab = sp.w(spec.a, spec.b)
    if not wab > 0:
        raise DegenerateWindowError(f"W(a, b) = {wab!r} for window ({spec.b}, {spec.a})")
    return wab


def up_exit(sp, spec):
    """``W(x, b) / W(a, b)``."""
    return float(sp.w(spec.x, spec.b)) / _window_norm(sp, spec)


def down_exit(sp, spec):
    """``Z(x, b) - W(x, b) Z(a, b) / W(a, b)``."""
    wab = _window_norm(sp, spec)
    ratio = float(sp.w(spec.x, spec.b)) / wab
    return float(sp.z(spec.x, spec.b)) - ratio * float(sp.z(spec.a, spec.b))


def green_density(sp, spec, y):
    """Discounted local time at ``y`` accumulated before exiting ``(b, a)``.

    ``W(x, b) W(a, y) / W(a, b) - W(x, y)``, a density with respect to the
    provider's reference measure.  Vectorised over ``y``.
    """
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr <= spec.b) or np.any(y_arr >= spec.a):
        raise ValueError("y must lie inside (b, a)")
    ratio = float(sp.w(spec.x, spec.b)) / _window_norm(sp, spec)
    flat = y_arr.ravel()
    val = ratio * sp.w_column(spec.a, flat) - sp.w_column(spec.x, flat)
    return float(val[0]) if y_arr.ndim == 0 else val.reshape(y_arr.shape)


def _w_left_limit(sp, x, ys):
    """``W(x, y)`` for ``y <= x``, with ``W(x, x-)`` at ``y = x``."""
    out = sp.w_column(x, ys)
    on = ys >= x
    if np.any(on):
        out[on] = float(sp.w(x, x))
    return out


def killed_resolvent(sp, spec, grid, f, m_density):
    """``int_(b, a) f(y) G(x, y) m'(y) dy`` by composite Simpson on ``grid``.

    ``grid`` spans ``[b, a]``; when ``x`` is a node the rule is applied
    separately on ``[b, x]`` and ``[x, a]`` so the kink (or, for
    bounded-variation Lévy models, the jump) of ``G`` at ``y = x`` does not
    spoil the order.  Without a node at ``x`` the rule is applied across
    the kink and loses accuracy.
    """
    grid = check_grid(grid)
    f = np.asarray(f, dtype=float)
    m_density = np.asarray(m_density, dtype=float)
    if f.shape != grid.shape or m_density.shape != grid.shape:
        raise ValueError("f and m_density must match the grid")
    if np.any(f < 0):
        raise ValueError("f must be non-negative")
    tol = 1e-12 * max(1.0, abs(spec.a) + abs(spec.b))
    if abs(grid[0] - spec.b) > tol or abs(grid[-1] - spec.a) > tol:
        raise ValueError("grid must span [b, a]")
    if not np.any(f):
        return 0.0

    ratio = float(sp.w(spec.x, spec.b)) / _window_norm(sp, spec)
    # y <= x takes the left limit W(x, x-), which is W(0) > 0 for
    # bounded-variation Lévy models; G need not vanish at y = a either
    g = ratio * sp.w_column(spec.a, grid)
    left = grid <= spec.x
    g[left] -= _w_left_limit(sp, spec.x, grid[left])
    integrand = f * g * m_density

    hits = np.flatnonzero(np.abs(grid - spec.x) <= tol)
    if hits.size == 0:
        return float(simpson(integrand, x=grid))
    k = int(hits[0])
    # right piece starts with the right limit W(x, x+) = 0
    right_integrand = integrand[k:].copy()
    right_integrand[0] = f[k] * ratio * float(sp.w(spec.a, spec.x)) * m_density[k]
    total = 0.0
    if k >= 1:
        total += simpson(integrand[: k + 1], x=grid[: k + 1])
    if grid.size - k >= 2:
        total += simpson(right_integrand, x=grid[k:])
    return float(total)


def expected_discounted_exit(sp, spec, n=2001):
    """``E_x[int_0^exit exp(-q t) dt]`` on an ``n``-node grid through ``x``."""
    n_left = max(2, int(round((n - 1) * (spec.x - spec.b) / (spec.a - spec.b))) + 1)
    n_right = max(2, n - n_left + 1)
    grid = np.concatenate([np.linspace(spec.b, spec.x, n_left),
                           np.linspace(spec.x, spec.a, n_right)[1:]])
    dens = sp.reference_density(grid)
    return killed_resolvent(sp, spec, grid, np.ones_like(grid), dens)


def exit_summary(sp, spec, n=2001):
    """Dictionary with ``up_exit``, ``down_exit`` and ``mean_discounted_occupation``."""
    return {
        "up_exit": up_exit(sp, spec),
        "down_exit": down_exit(sp, spec),
        "mean_discounted_occupation": expected_discounted_exit(sp, spec, n),
    }


def band_average(sp, spec, y, halfwidth, n=401):
    """Reference-measure average of ``G(x, .)`` over ``(y - h, y + h]``.

    This is what an occupation estimator with that band converges to as the
    time step goes to zero; its distance from ``G(x, y)`` is the smoothing
    bias.
    """
    lo, hi = float(y) - halfwidth, float(y) + halfwidth
    if not (spec.b < lo and hi < spec.a):
        raise ValueError("band must lie inside (b, a)")
    n += (n + 1) % 2  # odd, so y is a node
    pts = np.linspace(lo, hi, n)
    pts = np.union1d(pts, [spec.x]) if lo < spec.x < hi else pts
    g = np.asarray(green_density(sp, spec, pts), dtype=float)
    dens = np.asarray(sp.reference_density(pts), dtype=float)
    # split at x, where G has a kink
    k = np.searchsorted(pts, spec.x)
    pieces = [(0, k + 1), (k, pts.size)] if 0 < k < pts.size - 1 and pts[k] == spec.x else [
        (0, pts.size)]
    num = sum(simpson(g[i:j] * dens[i:j], x=pts[i:j]) for i, j in pieces)
    mass = sum(simpson(dens[i:j], x=pts[i:j]) for i, j in pieces)
    return float(num / mass)


def band_average_bias(sp, spec, y, halfwidth, n=401):
    """``|band_average - G(x, y)|``."""
    return abs(band_average(sp, spec, y, halfwidth, n) - green_density(sp, spec, y))


__all__ = [
    "ExitSpec", "LevyProvider", "DiffusionProvider", "scale_provider", "up_exit",
    "down_exit", "green_density", "killed_resolvent", "expected_discounted_exit",
    "exit_summary", "band_average", "band_average_bias",
]
