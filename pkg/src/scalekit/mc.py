"""Monte Carlo path simulation used as an independent oracle.

Paths of both model catalogs are simulated until they leave ``(b, a)``:

* diffusions by Euler–Maruyama with step ``dt``, optionally with a
  Brownian-bridge crossing test between grid nodes (local ``sigma``);
* Lévy models with a Gaussian part by Brownian-with-drift steps cut at the
  exponential jump epochs, with the same bridge test on the continuous part;
* Lévy models without a Gaussian part exactly: between jumps the path is a
  straight line, so passage times and band occupation times are computed in
  closed form.

Each path draws from its own Philox stream keyed by the seed and indexed by
the path number, and per-path results are reduced in index order, so an
estimate does not depend on the number of worker threads.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
import warnings

import numba as nb
import numpy as np
from scipy.integrate import simpson

from ._validation import check_positive
from .exceptions import ScaleKitError
from .models import (Coefficient, DiffusionModel, ExponentialJumps, FixedJumps, SNLPModel,
                     derive_scale_speed)
from .rng import JUMP_STREAM, philox4x32, split_seed, to_unit

UP, DOWN, TRUNCATED, FAILED = 1, -1, 0, 2
_SIDE_NAMES = {UP: "up", DOWN: "down", TRUNCATED: "truncated"}
_COEF_KIND = {"constant": 0, "linear": 1, "table": 2}
_TWO_PI = 2.0 * math.pi


class SimulationError(ScaleKitError):
    """A simulated path reached a non-finite state."""


@dataclass(frozen=True)
class MCConfig:
    """Simulation settings.

    Parameters
    ----------
    paths : int
    step : float
        Time step ``dt``.
    horizon : float
        Hard cap on simulated time per path.
    seed : int
        64-bit seed.
    band_halfwidth : float, optional
        Half-width of the occupation band used for local times; defaults to
        ``2 sqrt(dt)``.
    bridge_correction : bool, default=True
    workers : int, default=1
        Threads used for simulation; results do not depend on it.
    """

    paths: int
    step: float
    horizon: float
    seed: int = 0
    band_halfwidth: float = None
    bridge_correction: bool = True
    workers: int = 1

    def __post_init__(self):
        if int(self.paths) != self.paths or self.paths < 1:
            raise ValueError("paths must be a positive integer")
        check_positive(self.step, "step")
        check_positive(self.horizon, "horizon")
        split_seed(self.seed)
        if self.band_halfwidth is not None:
            check_positive(self.band_halfwidth, "band_halfwidth")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ValueError("workers must be a positive integer")

    @property
    def epsilon(self):
        if self.band_halfwidth is not None:
            return float(self.band_halfwidth)
        return 2.0 * math.sqrt(self.step)


@dataclass(frozen=True)
class MCEstimate:
    """Sample mean with its standard error.

    ``bias_bound`` bounds the one-sided bias caused by truncated paths.
    """

    mean: float
    std_error: float
    paths_used: int
    truncated_paths: int
    seed: int
    bias_bound: float = 0.0

    def covers(self, value, budget=0.0, k=3.0):
        """Whether ``|mean - value| <= k std_error + bias_bound + budget``."""
        return abs(self.mean - value) <= k * self.std_error + self.bias_bound + budget


@dataclass(frozen=True)
class PathRecord:
    """Outcome of one simulated path."""

    exit_time: float
    exit_side: str
    occupation: np.ndarray = field(repr=False)


# ---------------------------------------------------------------------------
# compiled kernels
# ---------------------------------------------------------------------------

@nb.njit(nogil=True, cache=True)
def _coef(kind, p0, p1, xs, ys, x):
    if kind == 0:
        return p0
    if kind == 1:
        return p0 + p1 * x
    # piecewise linear, constant outside the table
    n = xs.size
    if x <= xs[0]:
        return ys[0]
    if x >= xs[n - 1]:
        return ys[n - 1]
    lo, hi = 0, n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if xs[mid] <= x:
            lo = mid
        else:
            hi = mid
    r = (x - xs[lo]) / (xs[hi] - xs[lo])
    return ys[lo] + r * (ys[hi] - ys[lo])


@nb.njit(nogil=True, cache=True)
def _normal(w0, w1):
    u0 = to_unit(w0)
    u1 = to_unit(w1)
    return math.sqrt(-2.0 * math.log(u0)) * math.cos(_TWO_PI * u1)


@nb.njit(nogil=True, cache=True)
def _crossed(dist0, dist1, var, u):
    # bridge probability of touching a level between two nodes on one side of
    # it; exp(-23.5) is below the smallest uniform, so far steps skip the exp
    arg = 2.0 * dist0 * dist1 / var
    return arg < 23.5 and u < math.exp(-arg)


@nb.njit(nogil=True, cache=True)
def _add_band_time(occ, p, x, t, h, qs, lo, hi):
    for kb in range(lo.size):
        if lo[kb] < x <= hi[kb]:
            for jq in range(qs.size):
                occ[p, jq, kb] += math.exp(-qs[jq] * t) * h


@nb.njit(nogil=True, cache=True)
def _diffusion_kernel(mu_kind, mu_p0, mu_p1, mu_xs, mu_ys, sg_kind, sg_p0, sg_p1, sg_xs, sg_ys, x0, b, a, dt, horizon,
                      bridge, k0, k1, qs, lo, hi, start, stop, t_out, side_out, occ):
    n_max = int(math.ceil(horizon / dt - 1e-9))
    sq = math.sqrt(dt)
    for p in range(start, stop):
        pw0 = np.uint32(p & 0xFFFFFFFF)
        pw1 = np.uint32(p >> 32)
        x = x0
        side = TRUNCATED
        t_exit = math.inf
        for n in range(n_max):
            t = n * dt
            _add_band_time(occ, p, x, t, dt, qs, lo, hi)
            w0, w1, w2, w3 = philox4x32(np.uint32(n), np.uint32(0), pw0, pw1, k0, k1)
            m = _coef(mu_kind, mu_p0, mu_p1, mu_xs, mu_ys, x)
            s = _coef(sg_kind, sg_p0, sg_p1, sg_xs, sg_ys, x)
            xn = x + m * dt + s * sq * _normal(w0, w1)
            if not math.isfinite(xn):
                side = FAILED
                t_exit = t
                break
            if xn >= a:
                side = UP
            elif xn <= b:
                side = DOWN
            elif bridge:
                var = s * s * dt
                if _crossed(a - x, a - xn, var, to_unit(w2)):
                    side = UP
                elif _crossed(x - b, xn - b, var, to_unit(w3)):
                    side = DOWN
            x = xn
            if side != TRUNCATED:
                t_exit = (n + 1) * dt
                break
        t_out[p] = t_exit
        side_out[p] = side


@nb.njit(nogil=True, cache=True)
def _jump_draw(j, pw0, pw1, k0, k1, rate, jump_kind, jump_param):
    w0, w1, _, _ = philox4x32(np.uint32(j), np.uint32(0), pw0, pw1 | JUMP_STREAM, k0, k1)
    wait = -math.log(to_unit(w0)) / rate
    if jump_kind == 1:
        size = -jump_param * math.log(to_unit(w1))
    else:
        size = jump_param
    return wait, size


@nb.njit(nogil=True, cache=True)
def _levy_kernel(c, sigma, rate, jump_kind, jump_param, x0, b, a, dt, horizon, bridge,
                 k0, k1, qs, lo, hi, start, stop, t_out, side_out, occ):
    for p in range(start, stop):
        pw0 = np.uint32(p & 0xFFFFFFFF)
        pw1 = np.uint32(p >> 32)
        x = x0
        t = 0.0
        side = TRUNCATED
        t_exit = math.inf
        j = 0
        next_jump = math.inf
        size = 0.0
        if rate > 0:
            wait, size = _jump_draw(j, pw0, pw1, k0, k1, rate, jump_kind, jump_param)
            next_jump = wait
        n = 0
        while t < horizon:
            at_jump = next_jump - t <= dt
            h = next_jump - t if at_jump else dt
            _add_band_time(occ, p, x, t, h, qs, lo, hi)
            w0, w1, w2, w3 = philox4x32(np.uint32(n), np.uint32(0), pw0, pw1, k0, k1)
            n += 1
            xn = x + c * h + sigma * math.sqrt(h) * _normal(w0, w1)
            if xn >= a:
                side = UP
            elif xn <= b:
                side = DOWN
            elif bridge:
                var = sigma * sigma * h
                if _crossed(a - x, a - xn, var, to_unit(w2)):
                    side = UP
                elif _crossed(x - b, xn - b, var, to_unit(w3)):
                    side = DOWN
            t = next_jump if at_jump else t + h
            x = xn
            if side != TRUNCATED:
                t_exit = t
                break
            if at_jump:
                x -= size
                if x <= b:
                    side = DOWN
                    t_exit = t
                    break
                j += 1
                wait, size = _jump_draw(j, pw0, pw1, k0, k1, rate, jump_kind, jump_param)
                next_jump = t + wait
        t_out[p] = t_exit
        side_out[p] = side


@nb.njit(nogil=True, cache=True)
def _discounted_time(q, s1, s2):
    if q == 0.0:
        return s2 - s1
    return math.exp(-q * s1) * -math.expm1(-q * (s2 - s1)) / q


@nb.njit(nogil=True, cache=True)
def _linear_kernel(c, rate, jump_kind, jump_param, x0, b, a, horizon, k0, k1, qs, lo, hi,
                   start, stop, t_out, side_out, occ):
    # no Gaussian part: the path rises at speed c > 0 between jumps
    for p in range(start, stop):
        pw0 = np.uint32(p & 0xFFFFFFFF)
        pw1 = np.uint32(p >> 32)
        x = x0
        t = 0.0
        side = TRUNCATED
        t_exit = math.inf
        j = 0
        next_jump = math.inf
        size = 0.0
        if rate > 0:
            wait, size = _jump_draw(j, pw0, pw1, k0, k1, rate, jump_kind, jump_param)
            next_jump = wait
        while True:
            t_end = min(next_jump, horizon)
            t_hit = t + (a - x) / c
            if t_hit <= t_end:
                t_end = t_hit
                side = UP
            for kb in range(lo.size):
                s1 = max(t, t + (lo[kb] - x) / c)
                s2 = min(t_end, t + (hi[kb] - x) / c)
                if s2 > s1:
                    for jq in range(qs.size):
                        occ[p, jq, kb] += _discounted_time(qs[jq], s1, s2)
            if side == UP:
                t_exit = t_end
                break
            if next_jump > horizon:
                break
            x += c * (next_jump - t) - size
            t = next_jump
            if x <= b:
                side = DOWN
                t_exit = t
                break
            j += 1
            wait, size = _jump_draw(j, pw0, pw1, k0, k1, rate, jump_kind, jump_param)
            next_jump = t + wait
        t_out[p] = t_exit
        side_out[p] = side


# ---------------------------------------------------------------------------
# Python drivers
# ---------------------------------------------------------------------------

def _coef_arrays(coef):
    if not isinstance(coef, Coefficient):
        raise TypeError("diffusion coefficients must be Coefficient instances")
    p = list(coef.params) + [0.0, 0.0]
    xs = np.asarray(coef.xs if coef.kind == "table" else (0.0, 1.0), dtype=float)
    ys = np.asarray(coef.ys if coef.kind == "table" else (0.0, 0.0), dtype=float)
    return _COEF_KIND[coef.kind], float(p[0]), float(p[1]), xs, ys


def _jump_params(model):
    if not model.has_jumps:
        return 0.0, 0, 0.0
    law = model.jump_law
    if isinstance(law, ExponentialJumps):
        return float(model.jump_rate), 1, float(law.mean)
    if isinstance(law, FixedJumps):
        return float(model.jump_rate), 2, float(law.size)
    raise TypeError(f"unsupported jump law {type(law).__name__}")


def _make_runner(model, x0, b, a, cfg, qs, lo, hi, out):
    k0, k1 = split_seed(cfg.seed)
    t_out, side_out, occ = out
    args_tail = (qs, lo, hi)
    if isinstance(model, DiffusionModel):
        mu = _coef_arrays(model.mu)
        sg = _coef_arrays(model.sigma)

        def run(start, stop):
            _diffusion_kernel(*mu, *sg, x0, b, a, cfg.step, cfg.horizon,
                              bool(cfg.bridge_correction), k0, k1, *args_tail,
                              start, stop, t_out, side_out, occ)
        return run
    if isinstance(model, SNLPModel):
        rate, kind, param = _jump_params(model)
        if model.gaussian == 0:
            def run(start, stop):
                _linear_kernel(float(model.drift), rate, kind, param, x0, b, a, cfg.horizon,
                               k0, k1, *args_tail, start, stop, t_out, side_out, occ)
        else:
            def run(start, stop):
                _levy_kernel(float(model.drift), float(model.gaussian), rate, kind, param,
                             x0, b, a, cfg.step, cfg.horizon, bool(cfg.bridge_correction),
                             k0, k1, *args_tail, start, stop, t_out, side_out, occ)
        return run
    raise TypeError(f"unsupported model type {type(model).__name__}")


def _check_window(model, x0, b, a):
    if not (b < x0 < a):
        raise ValueError(f"need b < x0 < a, got b={b}, x0={x0}, a={a}")
    if isinstance(model, DiffusionModel) and not np.all(model.contains([b, a])):
        raise ValueError("window must lie inside the diffusion's interval")


def _band_edges(bands, b, a):
    bands = np.asarray(bands, dtype=float).reshape(-1, 2)
    if np.any(bands[:, 0] >= bands[:, 1]):
        raise ValueError("bands must have lower < upper")
    if np.any(bands[:, 0] < b) or np.any(bands[:, 1] > a):
        raise ValueError("occupation band must lie inside the window (b, a)")
    return np.ascontiguousarray(bands[:, 0]), np.ascontiguousarray(bands[:, 1])


def _simulate(model, x0, b, a, cfg, qs, bands, start, stop):
    x0, b, a = float(x0), float(b), float(a)
    _check_window(model, x0, b, a)
    qs = np.ascontiguousarray(np.atleast_1d(np.asarray(qs, dtype=float)))
    if np.any(qs < 0) or not np.all(np.isfinite(qs)):
        raise ValueError("discount rates must be finite and >= 0")
    lo, hi = _band_edges(bands, b, a)
    t_out = np.empty(stop)
    side_out = np.empty(stop, dtype=np.int64)
    occ = np.zeros((stop, qs.size, lo.size))
    run = _make_runner(model, x0, b, a, cfg, qs, lo, hi, (t_out, side_out, occ))
    chunk = max(1, -(-(stop - start) // (4 * cfg.workers)))
    bounds = [(s, min(stop, s + chunk)) for s in range(start, stop, chunk)]
    if cfg.workers == 1:
        for s, e in bounds:
            run(s, e)
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            list(pool.map(lambda se: run(*se), bounds))
    t_out, side_out, occ = t_out[start:], side_out[start:], occ[start:]
    failed = np.flatnonzero(side_out == FAILED)
    if failed.size:
        raise SimulationError(f"non-finite state on path {start + int(failed[0])}")
    return t_out, side_out, occ


def simulate_to_exit(model, x0, b, a, cfg, path_index, qs=(0.0,), bands=()):
    """Simulate path ``path_index`` of the stream defined by ``cfg.seed``.

    Returns a :class:`PathRecord` whose ``occupation[j, k]`` is the time
    spent in ``bands[k]`` before exit, discounted at ``qs[j]``.
    """
    path_index = int(path_index)
    if path_index < 0 or path_index >= 2**63:
        raise ValueError("path_index must be in [0, 2**63)")
    t, side, occ = _simulate(model, x0, b, a, cfg, qs, bands, path_index, path_index + 1)
    return PathRecord(float(t[0]), _SIDE_NAMES[int(side[0])], occ[0])


@dataclass(frozen=True)
class PathBatch:
    """Exit times, exit sides and band occupations of ``cfg.paths`` paths."""

    model: object
    x0: float
    b: float
    a: float
    cfg: MCConfig
    qs: np.ndarray = field(repr=False)
    bands: np.ndarray = field(repr=False)
    exit_time: np.ndarray = field(repr=False)
    exit_side: np.ndarray = field(repr=False)
    occupation: np.ndarray = field(repr=False)

    @property
    def truncated(self):
        return int(np.count_nonzero(self.exit_side == TRUNCATED))

    def _estimate(self, values, bias):
        n = values.size
        std = float(np.std(values, ddof=1)) / math.sqrt(n) if n > 1 else math.inf
        return MCEstimate(float(np.mean(values)), std, n, self.truncated, int(self.cfg.seed),
                          float(bias))

    def exit_estimate(self, side, q):
        """``E[exp(-q T); side]`` with truncated paths counted as zero."""
        code = {"up": UP, "down": DOWN}[side]
        q = float(q)
        hit = self.exit_side == code
        values = np.zeros(self.exit_time.size)
        values[hit] = np.exp(-q * self.exit_time[hit])
        bias = self.truncated / values.size * math.exp(-q * self.cfg.horizon)
        return self._estimate(values, bias)

    def band_index(self, q, band):
        jq = np.flatnonzero(np.isclose(self.qs, q, rtol=0, atol=1e-15))
        jb = np.flatnonzero(np.all(np.isclose(self.bands, band, rtol=0, atol=1e-15), axis=1))
        if jq.size == 0 or jb.size == 0:
            raise KeyError(f"(q={q}, band={tuple(band)}) was not recorded")
        return int(jq[0]), int(jb[0])

    def occupation_estimate(self, q, band, band_mass):
        """Discounted band occupation divided by ``band_mass``.

        Truncated paths keep the occupation collected up to the horizon; the
        missing remainder is unbounded a priori, so the bias bound is
        infinite whenever a path was truncated.
        """
        jq, jb = self.band_index(q, band)
        values = self.occupation[:, jq, jb] / band_mass
        return self._estimate(values, math.inf if self.truncated else 0.0)


def _warn_truncation(batch):
    frac = batch.truncated / batch.exit_time.size
    if frac > 1e-3:
        warnings.warn(f"{frac:.2%} of paths hit the horizon {batch.cfg.horizon}; "
                      "increase it", RuntimeWarning, stacklevel=3)


def simulate_paths(model, x0, b, a, cfg, qs=(0.0,), bands=()):
    """Simulate ``cfg.paths`` paths from ``x0`` until they leave ``(b, a)``."""
    t, side, occ = _simulate(model, x0, b, a, cfg, qs, bands, 0, int(cfg.paths))
    qs = np.atleast_1d(np.asarray(qs, dtype=float))
    bands = np.asarray(bands, dtype=float).reshape(-1, 2)
    batch = PathBatch(model, float(x0), float(b), float(a), cfg, qs, bands, t, side, occ)
    _warn_truncation(batch)
    return batch


def band_mass(model, lo, hi, n=201):
    """Reference measure of the band ``(lo, hi]``.

    Lebesgue for Lévy models and the speed measure for diffusions.
    """
    if isinstance(model, SNLPModel):
        return float(hi - lo)
    grid = np.linspace(lo, hi, n)
    table = derive_scale_speed(model, grid[0], grid)
    return float(simpson(table.dm, x=grid))


def estimate_up_exit(model, spec, cfg):
    """MC estimate of ``E_x[exp(-q T_a^+); T_a^+ < T_b^-]``."""
    batch = simulate_paths(model, spec.x, spec.b, spec.a, cfg, qs=(spec.q,))
    return batch.exit_estimate("up", spec.q)


def estimate_down_exit(model, spec, cfg):
    """MC estimate of ``E_x[exp(-q T_b^-); T_b^- < T_a^+]``."""
    batch = simulate_paths(model, spec.x, spec.b, spec.a, cfg, qs=(spec.q,))
    return batch.exit_estimate("down", spec.q)


def estimate_green_density(model, spec, y, cfg):
    """Band estimator of the discounted local time at ``y`` before exit."""
    eps = cfg.epsilon
    band = (float(y) - eps, float(y) + eps)
    if not (spec.b < band[0] and band[1] < spec.a):
        raise ValueError(f"band {band} is not inside the window ({spec.b}, {spec.a})")
    batch = simulate_paths(model, spec.x, spec.b, spec.a, cfg, qs=(spec.q,), bands=[band])
    return batch.occupation_estimate(spec.q, band, band_mass(model, *band))


__all__ = [
    "MCConfig", "MCEstimate", "PathRecord", "PathBatch", "SimulationError",
    "simulate_to_exit", "simulate_paths", "band_mass", "estimate_up_exit",
    "estimate_down_exit", "estimate_green_density",
]
