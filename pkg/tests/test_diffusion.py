import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from oracles import bm_w, bm_z
from scalekit import Coefficient, DiffusionModel, DiffusionScale, GridError, solve_psi, w_diff, z_diff


def sinh_w(q, x, y):
    r = math.sqrt(2 * q)
    return np.sinh(r * (np.asarray(x) - y)) / r


class TestBrownian:
    @pytest.mark.parametrize("q", [0.2, 0.5, 2.0])
    def test_sinh_and_cosh(self, bm_diffusion, q):
        sc = DiffusionScale(bm_diffusion, q, base=-0.5, right=1.5).fit()
        x = np.linspace(-0.5, 1.5, 41)
        np.testing.assert_allclose(sc.w(x), sinh_w(q, x, -0.5), rtol=3e-6, atol=1e-12)
        np.testing.assert_allclose(sc.z(x), np.cosh(math.sqrt(2 * q) * (x + 0.5)), rtol=3e-6)

    def test_documented_value(self, bm_diffusion):
        # W(1, 0) = sinh(1) for q = 1/2, reference 0
        sc = DiffusionScale(bm_diffusion, 0.5, right=1.0).fit()
        assert sc.w(1.0) == pytest.approx(math.sinh(1.0), rel=1e-6)

    def test_q_zero_is_scale_difference(self, bm_diffusion):
        sc = DiffusionScale(bm_diffusion, 0.0, base=0.2, right=2.0).fit()
        np.testing.assert_allclose(sc.w([0.7, 2.0]), [0.5, 1.8], rtol=1e-12)
        assert sc.z(1.3) == 1.0

    def test_second_order(self, bm_diffusion):
        errs = []
        for h in (4e-3, 2e-3, 1e-3):
            sc = DiffusionScale(bm_diffusion, 2.0, step=h, right=2.0).fit()
            errs.append(abs(sc.w(2.0) - sinh_w(2.0, 2.0, 0.0)))
        ratios = np.array(errs[:-1]) / np.array(errs[1:])
        assert np.all((ratios > 3.5) & (ratios < 4.5))


class TestDrifted:
    @pytest.mark.parametrize("mu", [-1.0, 0.7])
    @pytest.mark.parametrize("y", [-0.4, 0.0, 0.3])
    def test_against_levy_form(self, mu, y):
        # with reference 0, s'(y) = e^{-2 mu y}; W_diff(x, y) = s'(y) W_levy(x - y) / 2
        q = 0.8
        model = DiffusionModel(Coefficient.constant(mu), Coefficient.constant(1.0))
        sc = DiffusionScale(model, q, base=y, right=y + 2.0).fit()
        x = np.linspace(y, y + 2.0, 21)
        ref = math.exp(-2 * mu * y) * bm_w(mu, 1.0, q, x - y) / 2
        np.testing.assert_allclose(sc.w(x), ref, rtol=1e-6, atol=1e-12)
        np.testing.assert_allclose(sc.z(x), bm_z(mu, 1.0, q, x - y), rtol=1e-6)

    def test_variable_coefficients_solve_ode(self):
        # (sigma^2/2) W'' + mu W' = q W checked by finite differences
        model = DiffusionModel(Coefficient.linear(0.3, -0.8),
                               Coefficient.table([-1.0, 0.0, 2.0], [0.8, 1.0, 1.4]))
        sc = DiffusionScale(model, 1.0, base=-0.5, step=5e-4, right=1.5).fit()
        h = 1e-2
        x = np.array([0.2, 0.6, 1.1])
        w0, wp, wm = sc.w(x), sc.w(x + h), sc.w(x - h)
        d2 = (wp - 2 * w0 + wm) / h**2
        d1 = (wp - wm) / (2 * h)
        lhs = 0.5 * model.sigma(x)**2 * d2 + model.mu(x) * d1
        np.testing.assert_allclose(lhs, 1.0 * w0, rtol=2e-3)


class TestInterface:
    def test_below_base(self, bm_diffusion):
        sc = DiffusionScale(bm_diffusion, 1.0, base=0.0, right=1.0).fit()
        assert sc.w(-0.3) == 0.0 and sc.w(0.0) == 0.0
        assert sc.z(-0.3) == 1.0

    def test_beyond_grid(self, bm_diffusion):
        sc = DiffusionScale(bm_diffusion, 1.0, right=1.0).fit()
        with pytest.raises(GridError):
            sc.w(1.5)

    def test_grid_must_start_at_base(self, bm_diffusion):
        with pytest.raises(GridError):
            DiffusionScale(bm_diffusion, 1.0, base=0.0, grid=[0.1, 0.5, 1.0]).fit()
        with pytest.raises(GridError):
            DiffusionScale(bm_diffusion, 1.0).fit()

    def test_explicit_grid(self, bm_diffusion):
        grid = np.linspace(0, 1, 2001)
        sc = solve_psi(bm_diffusion, 0.5, 0.0, grid)
        assert w_diff(sc, 1.0, 0.0) == pytest.approx(math.sinh(1.0), rel=1e-6)
        assert z_diff(sc, 1.0, 0.0) == pytest.approx(math.cosh(1.0), rel=1e-6)
        with pytest.raises(ValueError):
            w_diff(sc, 1.0, 0.2)

    def test_model_type(self, bm):
        with pytest.raises(TypeError):
            DiffusionScale(bm, 1.0, right=1.0).fit()

    def test_estimator_api(self, bm_diffusion):
        sc = clone(DiffusionScale(bm_diffusion, 0.5, right=1.0)).fit()
        out = sc.transform([0.5, 1.0])
        assert out.shape == (2, 2)
        np.testing.assert_allclose(out[:, 0], sc.predict([0.5, 1.0]))


@given(st.floats(-1, 1), st.floats(0, 3))
def test_w_increasing_z_at_least_one(mu, q):
    model = DiffusionModel(Coefficient.constant(mu), Coefficient.constant(1.0))
    sc = DiffusionScale(model, q, step=5e-3, right=2.0).fit()
    x = np.linspace(0, 2, 41)
    assert np.all(np.diff(sc.w(x)) > 0)
    assert np.all(sc.z(x) >= 1.0) and np.all(np.diff(sc.z(x)) >= 0)
