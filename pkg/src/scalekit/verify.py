"""Analytic-versus-oracle checks producing :class:`VerificationRow` objects."""
from .exit import (ExitSpec, band_average_bias, down_exit, expected_discounted_exit,
                   green_density, scale_provider, up_exit)
from .mc import band_mass, simulate_paths
from .models import SNLPModel
from .report import VerificationRow

# Euler bias allowance, in units of the time step
DT_BIAS_FACTOR = 10.0


def dt_budget(value, cfg):
    return DT_BIAS_FACTOR * cfg.step * max(1.0, abs(value))


def chain_tolerance(model, step=1e-3):
    """Tolerance of ``up + down + q R = 1``.

    ``1e-8`` for Lévy models; diffusions carry the O(h^2) error of the
    solver, so ``max(1e-8, h^2)``.
    """
    if isinstance(model, SNLPModel):
        return 1e-8
    return max(1e-8, float(step) ** 2)


def verify_exit_identities(model, b, a, x, qs, cfg, ys=(), step=1e-3, k=3.0):
    """MC rows for the up/down exit functionals and the green density.

    One path batch serves every ``q`` and every band.  A row passes when
    ``|analytic - MC| <= k se + truncation bound + 10 dt max(1, |value|)``
    (plus the band-smoothing bias for densities).
    """
    qs = [float(q) for q in qs]
    eps = cfg.epsilon
    bands = [(y - eps, y + eps) for y in ys]
    batch = simulate_paths(model, x, b, a, cfg, qs=qs, bands=bands)
    rows = []
    for q in qs:
        spec = ExitSpec(b, a, x, q)
        sp = scale_provider(model, q, right=a, step=step)
        for side, fn, anchor in (
            ("up", up_exit, "E_x[e^{-qT_a^+}; T_a^+ < T_b^-] = W(x,b)/W(a,b)"),
            ("down", down_exit,
             "E_x[e^{-qT_b^-}; T_b^- < T_a^+] = Z(x,b) - W(x,b)Z(a,b)/W(a,b)"),
        ):
            value = fn(sp, spec)
            est = batch.exit_estimate(side, q)
            budget = k * est.std_error + est.bias_bound + dt_budget(value, cfg)
            rows.append(VerificationRow.judge(
                f"{side}_exit b={b!r} a={a!r} x={x!r} q={q!r}", anchor, value, est.mean, budget))
        for y, band in zip(ys, bands):
            value = green_density(sp, spec, y)
            est = batch.occupation_estimate(q, band, band_mass(model, *band))
            budget = (k * est.std_error + est.bias_bound + dt_budget(value, cfg)
                      + band_average_bias(sp, spec, y, eps))
            rows.append(VerificationRow.judge(
                f"green_density b={b!r} a={a!r} x={x!r} y={y!r} q={q!r}",
                "E_x[int e^{-qt} dL^y] = W(x,b)W(a,y)/W(a,b) - W(x,y)",
                value, est.mean, budget))
    return rows


def verify_exit_chain(model, b, a, x, q, step=1e-3, n=2001):
    """Analytic row for ``up + down + q R(f = 1) = 1``."""
    spec = ExitSpec(b, a, x, q)
    sp = scale_provider(model, q, right=a, step=step)
    total = up_exit(sp, spec) + down_exit(sp, spec) + q * expected_discounted_exit(sp, spec, n)
    return VerificationRow.judge(
        f"exit chain b={b!r} a={a!r} x={x!r} q={q!r}",
        "up_exit + down_exit + q int G(x,y) m(dy) = 1",
        1.0, total, chain_tolerance(model, step))


def verify_laplace(scale, betas, rtol=1e-6):
    """Rows comparing ``int e^{-beta x} W(x) dx`` with ``1 / (Psi(beta) - q)``."""
    rows = []
    for beta in betas:
        lhs, rhs = scale.laplace_check(beta)
        rows.append(VerificationRow.judge(
            f"laplace q={scale.q_!r} beta={float(beta)!r}",
            "int_0^inf e^{-beta x} W(x) dx = 1/(Psi(beta) - q)",
            rhs, lhs, rtol * abs(rhs)))
    return rows


__all__ = ["dt_budget", "chain_tolerance", "verify_exit_identities", "verify_exit_chain",
           "verify_laplace"]
