"""Numerical inversion of Laplace transforms along the Bromwich contour.

Euler summation of the trapezoidal Bromwich sum (Abate & Whitt's
"Euler" algorithm).  With ``M`` terms the discretisation error is about
``10**(-M/3)`` in exact arithmetic; in double precision the binomial
averaging amplifies roundoff, so accuracy peaks near ``M = 18``.
"""
from functools import lru_cache

import numpy as np
from scipy.special import comb

from .exceptions import InversionError

DEFAULT_TERMS = 18
CHECK_TERMS = 14


@lru_cache(maxsize=None)
def euler_nodes(M):
    """Contour nodes ``beta_k`` and weights ``eta_k``, ``k = 0..2M``."""
    xi = np.zeros(2 * M + 1)
    xi[0] = 0.5
    xi[1 : M + 1] = 1.0
    xi[2 * M] = 2.0**-M
    for k in range(1, M):
        xi[2 * M - k] = xi[2 * M - k + 1] + 2.0**-M * comb(M, k, exact=True)
    k = np.arange(2 * M + 1)
    eta = np.where(k % 2 == 0, 1.0, -1.0) * xi
    beta = M * np.log(10.0) / 3.0 + 1j * np.pi * k
    eta.flags.writeable = False
    beta.flags.writeable = False
    return beta, eta


def euler_invert(transform, t, M=DEFAULT_TERMS):
    """Invert ``transform`` at times ``t > 0``.

    ``transform`` must accept a complex ndarray and return values of the
    same shape.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("Euler inversion needs t > 0")
    beta, eta = euler_nodes(M)
    vals = transform(beta / t[..., None]).real
    return 10.0 ** (M / 3.0) / t * np.sum(eta * vals, axis=-1)


def euler_invert_checked(transform, t, M=DEFAULT_TERMS, M_check=CHECK_TERMS, rtol=1e-7):
    """Invert with an a posteriori error estimate.

    The result at ``M`` terms is compared with the result at ``M_check``
    terms; a discrepancy above ``rtol * max(1, |f|)`` raises
    :class:`InversionError`.

    Returns
    -------
    values, error_estimate : ndarray
    """
    f = euler_invert(transform, t, M)
    g = euler_invert(transform, t, M_check)
    err = np.abs(f - g)
    scale = np.maximum(1.0, np.abs(f))
    if not np.all(np.isfinite(f)):
        raise InversionError("Laplace inversion produced non-finite values")
    bad = err > rtol * scale
    if np.any(bad):
        where = np.asarray(t).reshape(-1)[np.argmax(bad.reshape(-1))] if np.ndim(t) else t
        raise InversionError(
            f"Laplace inversion did not converge at t = {float(where)!r}: "
            f"truncation levels {M} and {M_check} differ by {float(err.max()):.3g}"
        )
    return f, err
