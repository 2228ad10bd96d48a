import numpy as np
import pytest

from scalekit import (Coefficient, DiffusionModel, DualPair, ExitSpec, MCConfig,
                      check_local_time_duality, check_scale_symmetry, green_density,
                      reflect_model, scale_provider)
from scalekit.duality import dual_spec


def grid_points(b, a, n=10):
    g = np.linspace(b, a, n + 2)[1:-1]
    return [(x, y) for x in g for y in g if y < x]


class TestReflection:
    def test_constant_drift(self, drifted_diffusion):
        r = reflect_model(drifted_diffusion)
        assert r.mu(0.3) == 1.0 and r.sigma(0.3) == 1.0

    def test_table_and_interval(self):
        m = DiffusionModel(Coefficient.linear(0.5, 2.0),
                           Coefficient.table([0.0, 1.0, 2.0], [1.0, 2.0, 1.5]),
                           interval=(-1.0, 3.0), reference=0.5)
        r = reflect_model(m)
        u = np.array([-2.5, -1.2, 0.3])
        np.testing.assert_allclose(r.mu(u), -m.mu(-u))
        np.testing.assert_allclose(r.sigma(u), m.sigma(-u))
        assert r.interval == (-3.0, 1.0) and r.reference == -0.5
        assert reflect_model(r) == m

    def test_levy_rejected(self, bm):
        with pytest.raises(TypeError):
            reflect_model(bm)


class TestPair:
    def test_levy_self_dual(self, cl):
        pair = DualPair.from_model(cl)
        assert pair.backward is cl and pair.reference_measure == "lebesgue"

    def test_mixed_measures_rejected(self, cl, bm_diffusion):
        with pytest.raises(ValueError):
            DualPair(cl, bm_diffusion, "lebesgue")
        with pytest.raises(ValueError):
            DualPair(bm_diffusion, bm_diffusion, "lebesgue")


class TestScaleSymmetry:
    def test_levy_exact(self, cl):
        assert check_scale_symmetry(DualPair.from_model(cl), 0.5, grid_points(-1, 2)) == 0.0

    @pytest.mark.parametrize("model", [
        DiffusionModel(Coefficient.constant(-1.0), Coefficient.constant(1.0)),
        DiffusionModel(Coefficient.linear(0.3, -0.6),
                       Coefficient.table([-1.0, 0.0, 1.0], [0.9, 1.1, 1.3])),
    ])
    def test_diffusion(self, model):
        pair = DualPair.from_model(model)
        assert check_scale_symmetry(pair, 0.7, grid_points(-1.0, 1.0)) <= 1e-5

    def test_needs_y_below_x(self, cl):
        with pytest.raises(ValueError):
            check_scale_symmetry(DualPair.from_model(cl), 0.5, [(0.0, 1.0)])

    def test_green_symmetry_relative_to_speed(self, drifted_diffusion):
        # G(x, y) w.r.t. m is symmetric for a diffusion
        sp = scale_provider(drifted_diffusion, 0.4, right=1.0)
        g1 = green_density(sp, ExitSpec(-1.0, 1.0, 0.2, 0.4), -0.5)
        g2 = green_density(sp, ExitSpec(-1.0, 1.0, -0.5, 0.4), 0.2)
        assert g1 == pytest.approx(g2, rel=1e-6)

    def test_green_duality_analytic(self, drifted_diffusion):
        spec = ExitSpec(-1.0, 1.0, 0.2, 0.4)
        pair = DualPair.from_model(drifted_diffusion)
        fwd = scale_provider(pair.forward, 0.4, right=1.0)
        bwd = scale_provider(pair.backward, 0.4, right=1.0)
        dspec = dual_spec(spec, -0.5)
        assert green_density(fwd, spec, -0.5) == pytest.approx(
            green_density(bwd, dspec, -0.2), rel=1e-6)


class TestLocalTime:
    def test_small_run(self, drifted_diffusion):
        cfg = MCConfig(paths=4000, step=1e-3, horizon=50.0, seed=7, band_halfwidth=0.05)
        row = check_local_time_duality(DualPair.from_model(drifted_diffusion),
                                       ExitSpec(-1.0, 1.0, 0.2, 0.5), -0.3, cfg)
        assert row.passed, row

    def test_levy_pair(self, cl):
        cfg = MCConfig(paths=4000, step=1e-3, horizon=100.0, seed=7, band_halfwidth=0.05)
        row = check_local_time_duality(DualPair.from_model(cl), ExitSpec(-2.0, 1.0, 0.0, 0.5),
                                       0.4, cfg)
        assert row.passed, row

    def test_y_outside(self, drifted_diffusion):
        cfg = MCConfig(paths=10, step=1e-3, horizon=5.0)
        with pytest.raises(ValueError):
            check_local_time_duality(DualPair.from_model(drifted_diffusion),
                                     ExitSpec(-1.0, 1.0, 0.2), 1.0, cfg)
