"""Model catalogs: spectrally negative Lévy processes and 1-D diffusions.

A spectrally negative Lévy process here is

    X_t = x + c t + sigma B_t - (compound Poisson sum of positive magnitudes),

with Laplace exponent ``psi(lam) = log E[exp(lam X_1)]`` and right inverse
``phi(q)``.  A diffusion is given by its SDE coefficients ``mu`` and
``sigma``; its scale function ``s`` and speed density ``m'`` are derived
numerically by :func:`derive_scale_speed`.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.integrate import cumulative_simpson

from ._validation import check_grid, check_nonnegative
from .exceptions import GridError, ModelError, QuadratureError, RootBracketError


# ---------------------------------------------------------------------------
# jump laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExponentialJumps:
    """Downward jumps with exponentially distributed magnitude."""

    mean: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and self.mean > 0):
            raise ModelError(f"exponential jump mean must be > 0, got {self.mean!r}")

    @property
    def rate(self):
        return 1.0 / self.mean

    def laplace(self, lam):
        # E[exp(-lam * xi)]; lam may be complex
        rho = self.rate
        return rho / (rho + lam)

    def laplace_derivative(self, lam):
        rho = self.rate
        return -rho / (rho + lam) ** 2


@dataclass(frozen=True)
class FixedJumps:
    """Downward jumps of a fixed magnitude."""

    size: float

    def __post_init__(self):
        if not (math.isfinite(self.size) and self.size > 0):
            raise ModelError(f"fixed jump size must be > 0, got {self.size!r}")

    @property
    def mean(self):
        return self.size

    def laplace(self, lam):
        return np.exp(-lam * self.size)

    def laplace_derivative(self, lam):
        return -self.size * np.exp(-lam * self.size)


# ---------------------------------------------------------------------------
# spectrally negative Lévy processes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SNLPModel:
    """Brownian motion with drift plus compound-Poisson negative jumps.

    Parameters
    ----------
    drift : float
        Linear drift ``c``.
    gaussian : float
        Brownian coefficient ``sigma >= 0``.
    jump_rate : float
        Poisson intensity of the downward jumps.
    jump_law : ExponentialJumps or FixedJumps, optional
        Law of the jump magnitudes; ignored when ``jump_rate == 0``.
    """

    drift: float
    gaussian: float = 0.0
    jump_rate: float = 0.0
    jump_law: "ExponentialJumps | FixedJumps | None" = None

    def __post_init__(self):
        for name in ("drift", "gaussian", "jump_rate"):
            if not math.isfinite(getattr(self, name)):
                raise ModelError(f"{name} must be finite")
        if self.gaussian < 0:
            raise ModelError("gaussian coefficient must be >= 0")
        if self.jump_rate < 0:
            raise ModelError("jump_rate must be >= 0")
        if self.jump_rate > 0 and self.jump_law is None:
            raise ModelError("jump_rate > 0 requires a jump_law")
        if self.gaussian == 0 and self.drift <= 0:
            raise ModelError(
                "model has monotone (non-increasing) paths: need gaussian > 0 or drift > 0"
            )

    @property
    def has_jumps(self):
        return self.jump_rate > 0

    @property
    def bounded_variation(self):
        return self.gaussian == 0

    def _psi(self, lam):
        # vectorised, complex-capable; no domain checks
        val = self.drift * lam + 0.5 * self.gaussian**2 * lam * lam
        if self.has_jumps:
            val = val + self.jump_rate * (self.jump_law.laplace(lam) - 1.0)
        return val

    def _psi_prime(self, lam):
        val = self.drift + self.gaussian**2 * lam
        if self.has_jumps:
            val = val + self.jump_rate * self.jump_law.laplace_derivative(lam)
        return val

    def mean_slope(self):
        """Right derivative of psi at 0, i.e. E[X_1]."""
        mean_jump = self.jump_law.mean if self.has_jumps else 0.0
        return self.drift - self.jump_rate * mean_jump


def psi(model, lam):
    """Laplace exponent ``log E_0[exp(lam X_1)]`` for ``lam >= 0``.

    Accepts scalars or arrays.
    """
    arr = np.asarray(lam, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError("psi is defined for finite lam >= 0 only")
    out = model._psi(arr)
    if arr.ndim == 0:
        # psi(0) == 0 exactly
        return 0.0 if arr == 0 else float(out)
    return np.where(arr == 0, 0.0, out)


def psi_prime(model, lam):
    """Derivative of the Laplace exponent (right derivative at 0)."""
    arr = np.asarray(lam, dtype=float)
    if np.any(arr < 0):
        raise ValueError("psi_prime is defined for lam >= 0 only")
    out = model._psi_prime(arr)
    return float(out) if arr.ndim == 0 else out


def _bisect(fun, lo, hi, iters=200):
    flo = fun(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fmid = fun(mid)
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return lo, hi


def phi(model, q):
    """Right inverse of the Laplace exponent: the largest root of psi(lam) = q.

    Bracketing by doubling, bisection to a tight bracket, then Newton
    polishing.  psi is convex with psi(lam) -> inf, so bracketing cannot
    fail for a valid model.
    """
    q = check_nonnegative(q, "q")
    slope0 = model.mean_slope()
    if q == 0 and slope0 >= 0:
        return 0.0

    # psi is increasing to the right of its minimiser
    lo = 0.0
    if slope0 < 0:
        hi = 1.0
        while model._psi_prime(hi) <= 0:
            hi *= 2.0
            if hi > 1e300:
                raise RootBracketError("could not bracket the minimiser of psi")
        lo, _ = _bisect(model._psi_prime, 0.0, hi)

    def excess(lam):
        return model._psi(lam) - q

    hi = max(1.0, 2.0 * lo)
    while excess(hi) <= 0:
        hi *= 2.0
        if hi > 1e300:
            raise RootBracketError(f"could not bracket phi({q})")
    a, b = _bisect(excess, lo, hi, iters=80)
    root = 0.5 * (a + b)
    for _ in range(4):
        d = model._psi_prime(root)
        if d <= 0:
            break
        step = excess(root) / d
        new = root - step
        if not (a <= new <= b):
            break
        root = new
        if abs(step) <= 1e-16 * max(1.0, abs(root)):
            break
    return float(root)


# ---------------------------------------------------------------------------
# diffusions
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Coefficient:
    """A scalar coefficient function of the state.

    ``kind`` is one of

    * ``"constant"`` with ``params=(value,)``,
    * ``"linear"`` with ``params=(intercept, slope)``,
    * ``"table"`` with ``xs``/``ys`` giving a piecewise-linear function,
      held constant outside the table.
    """

    kind: str
    params: tuple = ()
    xs: tuple = ()
    ys: tuple = ()

    def __post_init__(self):
        if self.kind == "constant":
            if len(self.params) != 1:
                raise ModelError("constant coefficient takes one parameter")
        elif self.kind == "linear":
            if len(self.params) != 2:
                raise ModelError("linear coefficient takes (intercept, slope)")
        elif self.kind == "table":
            xs = np.asarray(self.xs, dtype=float)
            ys = np.asarray(self.ys, dtype=float)
            if xs.ndim != 1 or xs.size < 2 or xs.shape != ys.shape:
                raise ModelError("table coefficient needs matching xs/ys with >= 2 entries")
            if np.any(np.diff(xs) <= 0):
                raise ModelError("table abscissae must be strictly increasing")
            object.__setattr__(self, "xs", tuple(map(float, xs)))
            object.__setattr__(self, "ys", tuple(map(float, ys)))
        else:
            raise ModelError(f"unknown coefficient kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(map(float, self.params)))
        if not all(math.isfinite(v) for v in self.params + self.xs + self.ys):
            raise ModelError("coefficient parameters must be finite")

    @classmethod
    def constant(cls, value):
        return cls("constant", (value,))

    @classmethod
    def linear(cls, intercept, slope):
        return cls("linear", (intercept, slope))

    @classmethod
    def table(cls, xs, ys):
        return cls("table", (), tuple(xs), tuple(ys))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.params[0])
        if self.kind == "linear":
            return self.params[0] + self.params[1] * x
        return np.interp(x, self.xs, self.ys)

    def reflected(self, sign):
        """Coefficient of ``u -> sign * f(-u)``."""
        if self.kind == "constant":
            return Coefficient.constant(sign * self.params[0])
        if self.kind == "linear":
            a, b = self.params
            return Coefficient.linear(sign * a, -sign * b)
        xs = [-v for v in reversed(self.xs)]
        ys = [sign * v for v in reversed(self.ys)]
        return Coefficient.table(xs, ys)

    def __eq__(self, other):
        if not isinstance(other, Coefficient):
            return NotImplemented
        return (self.kind, self.params, self.xs, self.ys) == (
            other.kind, other.params, other.xs, other.ys)

    def __hash__(self):
        return hash((self.kind, self.params, self.xs, self.ys))


@dataclass(frozen=True)
class DiffusionModel:
    """A regular diffusion ``dX = mu(X) dt + sigma(X) dB`` on an interval.

    ``reference`` is the point where the scale density is normalised to one,
    so ``s'(x) = exp(-int_reference^x 2 mu / sigma^2)``.  It fixes the
    speed measure ``m'(x) = 2 / (sigma(x)^2 s'(x))`` once and for all, which
    in turn fixes the normalisation of local times.
    """

    mu: Coefficient
    sigma: Coefficient
    interval: tuple = (-math.inf, math.inf)
    reference: float = 0.0
    boundary_behavior: str = "natural"

    def __post_init__(self):
        left, right = (float(v) for v in self.interval)
        if not left < right:
            raise ModelError(f"interval must satisfy left < right, got {self.interval}")
        object.__setattr__(self, "interval", (left, right))
        if not (left < self.reference < right):
            raise ModelError("reference point must lie inside the interval")
        if self.sigma.kind == "constant" and self.sigma.params[0] <= 0:
            raise ModelError("sigma must be > 0")
        if self.sigma.kind == "table" and min(self.sigma.ys) <= 0:
            raise ModelError("sigma table must be > 0")

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return (x > self.interval[0]) & (x < self.interval[1])


@dataclass(frozen=True)
class ScaleSpeed:
    """Scale function ``s``, its density ``ds`` and speed density ``dm`` on a grid."""

    grid: np.ndarray
    s: np.ndarray
    ds: np.ndarray
    dm: np.ndarray
    anchor: float = field(default=0.0)


_REFINE = 4


def _refine(grid, factor=_REFINE):
    steps = np.linspace(0.0, 1.0, factor + 1)[:-1]
    fine = (grid[:-1, None] + np.diff(grid)[:, None] * steps).ravel()
    return np.append(fine, grid[-1])


def _log_scale_integrand(model, x):
    sig = model.sigma(x)
    if np.any(sig <= 0):
        bad = np.asarray(x)[np.argmax(sig <= 0)]
        raise ModelError(f"sigma must be > 0 inside the interval; sigma({bad}) <= 0")
    return 2.0 * model.mu(x) / sig**2


def derive_scale_speed(model, anchor, grid):
    """Tabulate ``s``, ``s'`` and ``m'`` of a diffusion on ``grid``.

    ``s(anchor) = 0``; ``s'`` is normalised at ``model.reference``.
    Composite Simpson on the grid refined four times.

    Raises
    ------
    GridError
        If the grid leaves the interval interior or ``anchor`` is not a node.
    QuadratureError
        If a tabulated value is non-finite (coefficient blow-up).
    """
    grid = check_grid(grid)
    if not np.all(model.contains(grid)):
        raise GridError("grid must lie inside the interval interior")
    idx = np.flatnonzero(np.isclose(grid, anchor, rtol=0, atol=1e-12 * max(1.0, abs(anchor))))
    if idx.size == 0:
        raise GridError(f"anchor {anchor} is not a grid node")
    ia = int(idx[0]) * _REFINE

    fine = _refine(grid)
    g = _log_scale_integrand(model, fine)
    _check_finite(g, fine, "2 mu / sigma^2")
    log_ds = cumulative_simpson(g, x=fine, initial=0.0)
    # shift so that s'(reference) = 1
    offset = -float(log_speed_factor(model, fine[:1])[0])
    log_ds = log_ds - offset
    with np.errstate(over="ignore"):
        ds = np.exp(-log_ds)
    _check_finite(ds, fine, "scale density")
    s = _outward_integral(ds, fine, ia)
    sig = model.sigma(fine)
    with np.errstate(over="ignore", divide="ignore"):
        dm = 2.0 / (sig**2 * ds)
    _check_finite(dm, fine, "speed density")
    _check_finite(s, fine, "scale function")
    if np.any(ds <= 0) or np.any(dm <= 0):
        raise QuadratureError("scale or speed density underflowed to zero")
    sl = slice(None, None, _REFINE)
    return ScaleSpeed(grid=grid, s=s[sl], ds=ds[sl], dm=dm[sl], anchor=float(grid[idx[0]]))


def _cumulative(f, x):
    if x.size < 2:
        return np.zeros(x.size)
    return cumulative_simpson(f, x=x, initial=0.0)


def _outward_integral(f, x, i0):
    """``int_{x[i0]}^{x[j]} f`` for every ``j``, accumulated away from ``x[i0]``.

    Starting at the anchor avoids cancellation when ``f`` spans many orders
    of magnitude across the grid.
    """
    out = np.empty_like(x)
    out[i0:] = _cumulative(f[i0:], x[i0:])
    left = _cumulative(f[: i0 + 1][::-1], -x[: i0 + 1][::-1])
    out[: i0 + 1] = -left[::-1]
    return out


def _check_finite(values, xs, what):
    bad = ~np.isfinite(values)
    if np.any(bad):
        x = float(xs[np.argmax(bad)])
        raise QuadratureError(f"non-finite {what} at x = {x!r}", abscissa=x)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)
_PANEL = 0.05


def _knots(coef):
    return coef.xs if coef.kind == "table" else ()


def log_speed_factor(model, x):
    """``int_reference^x 2 mu / sigma^2`` at each point of ``x``.

    Ten-point Gauss-Legendre on panels no wider than 0.05, broken at the
    points themselves and at table knots, where the integrand has kinks.
    """
    x = np.asarray(x, dtype=float)
    knots = np.asarray(_knots(model.mu) + _knots(model.sigma), dtype=float)
    lo, hi = min(x.min(), model.reference), max(x.max(), model.reference)
    knots = knots[(knots > lo) & (knots < hi)]
    breaks = np.unique(np.concatenate([x.ravel(), [model.reference], knots]))
    if breaks.size == 1:
        return np.zeros_like(x)
    counts = np.maximum(1, np.ceil(np.diff(breaks) / _PANEL).astype(int))
    edges = np.concatenate([np.linspace(breaks[i], breaks[i + 1], c + 1)[:-1]
                            for i, c in enumerate(counts)] + [breaks[-1:]])
    mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
    u = mid[:, None] + half[:, None] * _GL_NODES
    g = _log_scale_integrand(model, u.ravel()).reshape(u.shape)
    cum = np.concatenate([[0.0], np.cumsum(half * (g @ _GL_WEIGHTS))])
    # every point is an edge, so the lookups are exact
    return cum[np.searchsorted(edges, x)] - cum[np.searchsorted(edges, model.reference)]


def speed_density(model, x):
    """Pointwise ``m'(x) = 2 / (sigma(x)^2 s'(x))``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(model.contains(x)):
        raise GridError("points must lie inside the interval interior")
    with np.errstate(over="ignore"):
        out = 2.0 * np.exp(log_speed_factor(model, x)) / model.sigma(x) ** 2
    _check_finite(out, x, "speed density")
    return out


def reflect_model(model):
    """Law of ``-X`` for a diffusion ``X``: drift ``-mu(-u)``, volatility ``sigma(-u)``."""
    if not isinstance(model, DiffusionModel):
        raise TypeError("reflect_model takes a DiffusionModel")
    left, right = model.interval
    return DiffusionModel(
        mu=model.mu.reflected(-1.0),
        sigma=model.sigma.reflected(1.0),
        interval=(-right, -left),
        reference=-model.reference,
        boundary_behavior=model.boundary_behavior,
    )
