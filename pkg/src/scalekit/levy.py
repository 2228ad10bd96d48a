"""q-scale functions of spectrally negative Lévy processes.

``W^{(q)}`` vanishes on the negative half-line and has Laplace transform
``1 / (psi(beta) - q)`` for ``beta > phi(q)``.  When that transform is a
rational function (no jumps, or exponential jumps) ``W`` is a finite sum
of exponentials obtained by partial fractions.  Otherwise ``W`` is
recovered by Euler inversion of the exponentially tilted function
``exp(-phi(q) x) W(x)``, which is at most linearly growing.
"""
import math
import warnings

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.integrate import quad
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import laplace
from ._validation import check_nonnegative, check_points
from .models import ExponentialJumps, FixedJumps, SNLPModel, phi, psi, psi_prime

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)
_Z_PANEL = 0.5


def _rational_transform(model, q):
    """Numerator and denominator coefficients (ascending) of 1/(psi - q).

    Returns None when the transform is not rational.
    """
    c, sig, lam = model.drift, model.gaussian, model.jump_rate
    quad_part = np.array([-q, c, 0.5 * sig**2])
    if not model.has_jumps:
        return np.array([1.0]), P.polytrim(quad_part)
    if not isinstance(model.jump_law, ExponentialJumps):
        return None
    rho = model.jump_law.rate
    # (psi - q)(rho + beta) = quad_part*(rho + beta) - lam*beta
    den = P.polysub(P.polymul(quad_part, [rho, 1.0]), [0.0, lam])
    return np.array([rho, 1.0]), P.polytrim(den)


def _partial_fractions(num, den):
    """Exponential-polynomial terms of the inverse transform of num/den.

    Returns a list of ``(root, c0, c1)`` meaning ``(c0 + c1 x) exp(root x)``.
    Roots are treated as double when they coincide to ``1e-9``.
    """
    lead = den[-1]
    roots = np.roots(den[::-1]).astype(complex)
    dden = P.polyder(den)
    # Newton polish
    for _ in range(3):
        pv = P.polyval(roots, den)
        dv = P.polyval(roots, dden)
        ok = np.abs(dv) > 1e-300
        roots = np.where(ok, roots - pv / np.where(ok, dv, 1.0), roots)
    terms = []
    used = np.zeros(roots.size, bool)
    for i, r in enumerate(roots):
        if used[i]:
            continue
        close = [j for j in range(i + 1, roots.size)
                 if not used[j] and abs(roots[j] - r) <= 1e-9 * max(1.0, abs(r))]
        if not close:
            terms.append((r, P.polyval(r, num) / P.polyval(r, dden), 0.0))
            used[i] = True
            continue
        if len(close) > 1:
            raise ArithmeticError("triple root in scale-function transform")
        j = close[0]
        r0 = 0.5 * (r + roots[j])
        used[i] = used[j] = True
        others = [roots[k] for k in range(roots.size) if k not in (i, j)]
        qpoly = lead * (P.polyfromroots(others) if others else np.array([1.0]))
        qv, dq = P.polyval(r0, qpoly), P.polyval(r0, P.polyder(qpoly)) if others else 0.0
        nv, dn = P.polyval(r0, num), P.polyval(r0, P.polyder(num))
        c1 = nv / qv
        c0 = dn / qv - nv * dq / qv**2
        terms.append((r0, c0, c1))
    return terms


def _eval_terms(terms, x):
    out = np.zeros(x.shape, dtype=complex)
    for r, c0, c1 in terms:
        out += (c0 + c1 * x) * np.exp(r * x)
    return out.real


def _integrate_terms(terms, x):
    """Antiderivative from 0 of the exponential-polynomial sum."""
    out = np.zeros(x.shape, dtype=complex)
    for r, c0, c1 in terms:
        rx = r * x
        small = np.abs(rx) < 1e-4
        # int_0^x e^{ru} du and int_0^x u e^{ru} du; Taylor series near r x = 0
        # where expm1(rx) / r^2 would lose everything (or divide by zero)
        i0 = x * (1 + rx / 2 + rx**2 / 6 + rx**3 / 24)
        i1 = x * x * (0.5 + rx / 3 + rx**2 / 8 + rx**3 / 30)
        if not np.all(small):
            with np.errstate(all="ignore"):
                big0 = np.expm1(rx) / r
                big1 = (x * np.exp(rx) - big0) / r
            i0 = np.where(small, i0, big0)
            i1 = np.where(small, i1, big1)
        out += c0 * i0 + c1 * i1
    return out.real


class _FixedJumpSeries:
    """Exact ``W^{(q)}`` for jumps of fixed size ``k``.

    Expanding ``1/(psi - q)`` in powers of ``exp(-beta k)`` gives

        W(x) = sum_n (-lam)^n g_n(x - n k),   n k < x,

    where ``g_n`` inverts ``1 / (psi_0(beta) - q)^(n+1)`` and ``psi_0`` is
    the exponent without the jump transform.  Each ``g_n`` is an
    exponential polynomial, so the sum is exact and free of the kinks at
    multiples of ``k`` that defeat contour inversion.
    """

    def __init__(self, model, q):
        self.k = model.jump_law.size
        self.lam = model.jump_rate
        c, sig = model.drift, model.gaussian
        self.c, self.half_var = c, 0.5 * sig**2
        if sig == 0:
            self.roots = ((self.lam + q) / c,)
        else:
            d = math.sqrt(c * c + 4.0 * self.half_var * (self.lam + q))
            self.roots = ((-c + d) / (2 * self.half_var), (-c - d) / (2 * self.half_var))

    # beyond these the alternating sum cancels too much; callers fall back
    # to contour inversion, which is accurate once the kinks have smoothed
    max_terms = 60
    max_amplification = 1e6

    def _g(self, n, x):
        m = n + 1
        if len(self.roots) == 1:
            (r,) = self.roots
            return x**n * np.exp(r * x) / (self.c**m * math.factorial(n))
        a, b = self.roots
        out = np.zeros_like(x)
        for j in range(1, m + 1):
            coef = (-1) ** (m - j) * math.comb(2 * m - j - 1, m - j) / math.factorial(j - 1)
            p = float(2 * m - j)
            out += coef * x ** (j - 1) * (np.exp(a * x) / np.power(a - b, p)
                                          + np.exp(b * x) / np.power(b - a, p))
        return out / self.half_var**m

    def __call__(self, x):
        """Series value and a mask of points where it is trustworthy."""
        out = np.zeros_like(x)
        size = np.zeros_like(x)
        ok = x <= self.max_terms * self.k
        with np.errstate(over="ignore", invalid="ignore"):
            for n in range(self.max_terms + 1):
                u = x - n * self.k
                live = ok & ((u >= 0) if n == 0 else (u > 0))
                if not np.any(live):
                    break
                term = (-self.lam) ** n * self._g(n, u[live])
                out[live] += term
                size[live] += np.abs(term)
        ok &= np.isfinite(out) & (size <= self.max_amplification * np.maximum(1.0, np.abs(out)))
        return out, ok


class LevyScale(BaseEstimator, TransformerMixin):
    """q-scale functions ``W^{(q)}`` and ``Z^{(q)}`` of a Lévy model.

    Parameters
    ----------
    model : SNLPModel
    q : float, default=0.0
        Killing rate, ``q >= 0``.
    method : {"auto", "closed_form", "laplace_inversion"}
        ``"auto"`` uses partial fractions when the transform is rational.
    n_terms, check_terms : int
        Euler truncation levels used by the inversion path; their
        discrepancy is the a posteriori error estimate.
    rtol : float
        Inversion results whose error estimate exceeds ``rtol * max(1, W)``
        raise :class:`~scalekit.exceptions.InversionError`.

    Attributes
    ----------
    phi_q_ : float
        ``phi(q)``.
    method_ : str
        The method actually used.
    w0_ : float
        ``W(0)``: zero with a Gaussian part, ``1/drift`` otherwise.

    Examples
    --------
    >>> sc = LevyScale(SNLPModel(drift=0.0, gaussian=1.0), q=0.0).fit()
    >>> float(sc.w(1.0))
    2.0
    """

    def __init__(self, model=None, q=0.0, method="auto", n_terms=laplace.DEFAULT_TERMS,
                 check_terms=laplace.CHECK_TERMS, rtol=1e-7):
        self.model = model
        self.q = q
        self.method = method
        self.n_terms = n_terms
        self.check_terms = check_terms
        self.rtol = rtol

    def fit(self, X=None, y=None):
        if not isinstance(self.model, SNLPModel):
            raise TypeError("model must be an SNLPModel")
        q = check_nonnegative(self.q, "q")
        if self.method not in ("auto", "closed_form", "laplace_inversion"):
            raise ValueError(f"unknown method {self.method!r}")
        self.q_ = q
        self.phi_q_ = phi(self.model, q)
        self.w0_ = 0.0 if self.model.gaussian > 0 else 1.0 / self.model.drift
        self.terms_ = None
        self._series = None
        if self.method != "laplace_inversion":
            if self.model.has_jumps and isinstance(self.model.jump_law, FixedJumps):
                self._series = _FixedJumpSeries(self.model, q)
            else:
                try:
                    self.terms_ = _partial_fractions(*_rational_transform(self.model, q))
                except ArithmeticError:
                    if self.method == "closed_form":
                        raise
        closed = self.terms_ is not None or self._series is not None
        self.method_ = "closed_form" if closed else "laplace_inversion"
        return self

    # -- evaluation ---------------------------------------------------------

    def _tilted_transform(self, beta):
        return 1.0 / (self.model._psi(beta + self.phi_q_) - self.q_)

    def _tilted(self, x):
        """``exp(-phi(q) x) W(x)`` for scalar ``x > 0`` without overflow."""
        x = np.asarray([x], dtype=float)
        if self.terms_ is not None:
            shifted = [(r - self.phi_q_, c0, c1) for r, c0, c1 in self.terms_]
            return float(_eval_terms(shifted, x)[0])
        if self._series is not None:
            val, ok = self._series(x)
            if ok[0]:
                return float(val[0] * np.exp(-self.phi_q_ * x[0]))
        val, _ = laplace.euler_invert_checked(
            self._tilted_transform, x, self.n_terms, self.check_terms, self.rtol)
        return float(val[0])

    def _w_positive(self, x):
        if self.terms_ is not None:
            return _eval_terms(self.terms_, x)
        out = np.empty_like(x)
        todo = np.ones(x.shape, bool)
        if self._series is not None:
            val, ok = self._series(x)
            out[ok] = val[ok]
            todo = ~ok
        if np.any(todo):
            tilted, _ = laplace.euler_invert_checked(
                self._tilted_transform, x[todo], self.n_terms, self.check_terms, self.rtol)
            out[todo] = tilted * np.exp(self.phi_q_ * x[todo])
        return out

    def w(self, x):
        """``W^{(q)}(x)``; zero for ``x < 0`` and the right limit at ``x = 0``."""
        check_is_fitted(self, "method_")
        scalar = np.ndim(x) == 0
        x = check_points(x, "x")
        out = np.zeros_like(x)
        out[x == 0] = self.w0_
        pos = x > 0
        if np.any(pos):
            out[pos] = self._w_positive(x[pos])
        return float(out[0]) if scalar else out

    def z(self, x):
        """``Z^{(q)}(x) = 1 + q int_0^x W^{(q)}(u) du``; one for ``x <= 0``."""
        check_is_fitted(self, "method_")
        scalar = np.ndim(x) == 0
        x = check_points(x, "x")
        out = np.ones_like(x)
        pos = x > 0
        if self.q_ > 0 and np.any(pos):
            if self.terms_ is not None:
                out[pos] = 1.0 + self.q_ * _integrate_terms(self.terms_, x[pos])
            else:
                out[pos] = 1.0 + self.q_ * np.array([self._integral_w(v) for v in x[pos]])
        return float(out[0]) if scalar else out

    def _integral_w(self, x):
        # composite Gauss-Legendre; W is smooth between jump-size multiples
        breaks = [0.0]
        if self._series is not None:
            k = self._series.k
            breaks += [v for v in k * np.arange(1, math.floor(x / k) + 1) if v < x]
        breaks.append(x)
        edges = []
        for lo, hi in zip(breaks[:-1], breaks[1:]):
            n = max(1, math.ceil((hi - lo) / _Z_PANEL))
            edges.extend(np.linspace(lo, hi, n + 1)[:-1])
        edges = np.append(edges, x)
        half = 0.5 * np.diff(edges)
        mids = 0.5 * (edges[1:] + edges[:-1])
        nodes = (mids[:, None] + half[:, None] * _GL_NODES).ravel()
        weights = (half[:, None] * _GL_WEIGHTS).ravel()
        return float(np.dot(weights, self._w_positive(nodes)))

    def phi_derivative(self):
        """``phi'(q)`` by central differences (a one-sided stencil near ``q = 0``).

        Cross-checked against ``1 / psi'(phi(q))``; a disagreement above
        ``1e-8`` emits a RuntimeWarning.  Recurrent models (``psi'(phi(0)) = 0``)
        have ``phi'(0) = inf`` and raise ``ValueError``.
        """
        check_is_fitted(self, "method_")
        q = self.q_
        slope = psi_prime(self.model, self.phi_q_)
        if not slope > 1e-12:
            raise ValueError("phi'(q) is infinite: the model is recurrent and q = 0")
        implicit = 1.0 / slope
        h = 1e-5 * max(1.0, q)
        if q >= h:
            central = (phi(self.model, q + h) - phi(self.model, q - h)) / (2.0 * h)
        else:
            # fourth-order one-sided stencil; a wider step keeps roundoff down
            h = 1e-4
            f = [phi(self.model, q + k * h) for k in range(5)]
            central = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
        if abs(central - implicit) > 1e-8 * max(1.0, abs(implicit)):
            warnings.warn(
                f"phi'(q) finite difference {central!r} disagrees with 1/psi'(phi(q)) "
                f"{implicit!r}", RuntimeWarning, stacklevel=2)
        return central

    def resolvent_density(self, x):
        """Potential density ``r^{(q)}(x)`` of the unkilled process from 0.

        ``x = 0`` returns the right limit ``r(0+) = phi'(q)``.
        """
        check_is_fitted(self, "method_")
        scalar = np.ndim(x) == 0
        x = check_points(x, "x")
        r0 = self.phi_derivative()
        out = np.empty_like(x)
        up = x >= 0
        out[up] = np.exp(-self.phi_q_ * x[up]) * r0
        down = ~up
        if np.any(down):
            u = -x[down]
            out[down] = np.exp(self.phi_q_ * u) * r0 - self.w(u)
        return float(out[0]) if scalar else out

    def laplace_check(self, beta, tail_tol=1e-10):
        """Both sides of the transform identity at ``beta``.

        Returns
        -------
        lhs : float
            ``int_0^M exp(-beta x) W(x) dx`` by adaptive quadrature, with
            ``M`` chosen so the analytic tail bound is below ``tail_tol``.
        rhs : float
            ``1 / (psi(beta) - q)``.
        """
        check_is_fitted(self, "method_")
        beta = float(beta)
        gap = beta - self.phi_q_
        if not gap > 0:
            raise ValueError(f"beta must exceed phi(q) = {self.phi_q_!r}")
        upper = 1.0
        # the tilted function grows at most linearly, so its tail integral
        # beyond M is below w~(M) exp(-gap M) (1/gap + 1/(gap^2 M))
        while (self._tilted(upper) * math.exp(-gap * upper)
               * (1.0 / gap + 1.0 / (gap * gap * upper))) >= tail_tol:
            upper *= 2.0
        # split at a few decay lengths so quad sees the bulk
        cuts = sorted({0.0, min(upper, 1.0 / beta), min(upper, 5.0 / beta),
                       min(upper, 20.0 / beta), upper})
        lhs = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            if hi > lo:
                # tilted form: exp(-beta u) W(u) overflows in pieces for large u
                val, _ = quad(lambda u: math.exp(-gap * u) * self._tilted(u), lo, hi,
                              epsabs=0.0, epsrel=1e-12, limit=200)
                lhs += val
        rhs = 1.0 / (psi(self.model, beta) - self.q_)
        return lhs, rhs

    # -- scikit-learn surface --------------------------------------------------

    def predict(self, X):
        """``W^{(q)}`` at the points ``X``."""
        return self.w(check_points(X))

    def transform(self, X):
        """Columns ``[W^{(q)}(x), Z^{(q)}(x)]``."""
        x = check_points(X)
        return np.column_stack([self.w(x), self.z(x)])

    def get_feature_names_out(self, input_features=None):
        return np.array(["W", "Z"], dtype=object)


def w(scale, x):
    return scale.w(x)


def z(scale, x):
    return scale.z(x)


def resolvent_density(scale, x):
    return scale.resolvent_density(x)


def laplace_check(scale, beta):
    return scale.laplace_check(beta)
