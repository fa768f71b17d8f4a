import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import norm

from krrtune.discretize import (GridCapExceeded, GridConfig, distortion_constant, gaussian_log_ratio_max,
                                grid_size, lengthscale_grid, mean_grid, nearest_grid_index, round_params,
                                round_spec, sm_grid)
from krrtune.kernel import GaussianComponent, KernelSpec, RkhsSignal, signal_eval
from krrtune.regression import operator_ridge_min

class TestMeanGrid:
    def test_example(self):
        assert mean_grid(GridConfig(2.0, 1.0, 4.0, rho=0.5)) == pytest.approx([0, 0.5, 1.0, 1.5, 2.0])

    def test_zero_width(self):
        assert mean_grid(GridConfig(0.0, 1.0, 2.0)) == [0.0]

    @given(st.floats(0.01, 20), st.floats(0.05, 2), st.floats(0.05, 1))
    def test_covering_radius(self, W, m, rho):
        cfg = GridConfig(W, m, m * 2, rho=rho)
        pts = np.array(mean_grid(cfg))
        assert pts[0] == 0 and pts[-1] == W and np.all(np.diff(pts) > 0)
        assert np.max(np.diff(pts)) <= 2 * rho * m * (1 + 1e-12)
        scan = np.linspace(0, W, 2001)
        radius = np.max(np.min(np.abs(scan[:, None] - pts[None, :]), axis=1))
        assert radius <= rho * m * (1 + 1e-12)
        assert len(pts) <= 2 * W / (rho * m) + 2


class TestLengthscaleGrid:
    def test_example(self):
        assert lengthscale_grid(GridConfig(1.0, 1.0, 4.0, gamma=0.5)) == pytest.approx(
            [1.5, 2.25, 3.375, 5.0625, 7.59375])

    @pytest.mark.parametrize("s_hat", [1.0, 2.0, 4.0])
    def test_bracketing_examples(self, s_hat):
        cfg = GridConfig(1.0, 1.0, 4.0, gamma=0.5)
        _, s = round_params(0.0, s_hat, cfg)
        assert 1.5 * s_hat <= s <= 2.25 * s_hat
        if s_hat == 4.0:
            assert s == pytest.approx(7.59375)

    def test_degenerate_range(self):
        assert len(lengthscale_grid(GridConfig(1.0, 0.7, 0.7))) <= 2

    @given(st.floats(0.05, 2), st.floats(1.0, 50), st.floats(0.05, 1))
    def test_bracketing_scan(self, m, ratio, gamma):
        cfg = GridConfig(1.0, m, m * ratio, gamma=gamma)
        grid = lengthscale_grid(cfg)
        assert len(grid) <= math.log(ratio) / math.log1p(gamma) + 3
        r = 1 + gamma
        for s_hat in np.linspace(cfg.m, cfg.M, 1000):
            _, s = round_params(0.0, s_hat, cfg)
            assert s_hat * r * (1 - 1e-12) <= s <= s_hat * r * r * (1 + 1e-12)


class TestSmGrid:
    cfg = GridConfig(2.0, 1.0, 4.0, rho=0.5, gamma=0.5)

    def test_product_count(self):
        specs = sm_grid(self.cfg)
        assert len(specs) == 25 == grid_size(self.cfg)
        assert all(sp.symmetric and len(sp.components) == 1 and sp.components[0].w == 1.0 for sp in specs)

    def test_multiset_count(self):
        cfg = GridConfig(2.0, 1.0, 4.0, rho=0.5, gamma=0.5, q=2)
        specs = sm_grid(cfg)
        assert len(specs) == math.comb(26, 2) == 325
        keys = {tuple(sorted((c.c, c.sigma) for c in sp.components)) for sp in specs}
        assert len(keys) == 325

    def test_cap(self):
        with pytest.raises(GridCapExceeded) as exc:
            sm_grid(GridConfig(2.0, 1.0, 4.0, rho=0.5, gamma=0.5, q=3, cap=1000))
        assert exc.value.required == math.comb(27, 3)

    def test_config_validation(self):
        for bad in (dict(W=-1, m=1, M=2), dict(W=1, m=2, M=1), dict(W=1, m=1, M=2, rho=0),
                    dict(W=1, m=1, M=2, gamma=1.5), dict(W=1, m=1, M=2, q=0)):
            with pytest.raises(ValueError):
                GridConfig(**bad)

    def test_presets(self):
        assert GridConfig.main_text(1, 1, 2).rho == GridConfig.main_text(1, 1, 2).gamma == 1.0
        assert GridConfig.from_dict(GridConfig.fine(3, 0.5, 2).to_dict()) == GridConfig.fine(3, 0.5, 2)


class TestRounding:
    cfg = GridConfig(3.0, 0.5, 2.0)

    def test_grid_mean_is_fixed(self):
        for c in mean_grid(self.cfg):
            assert round_params(c, 1.0, self.cfg)[0] == c

    def test_smallest_lengthscale(self):
        assert round_params(1.0, 0.5, self.cfg)[1] == pytest.approx(0.75)

    def test_random_inequalities(self, rng):
        r = 1 + self.cfg.gamma
        for _ in range(1000):
            c, s = rng.uniform(0, 3), rng.uniform(0.5, 2)
            ct, st_ = round_params(c, s, self.cfg)
            assert abs(ct - c) <= self.cfg.rho * self.cfg.m
            assert s * r <= st_ <= s * r * r * (1 + 1e-12)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            round_params(3.5, 1.0, self.cfg)
        with pytest.raises(ValueError):
            round_params(1.0, 0.1, self.cfg)

    def test_round_spec_lands_on_grid(self, rng):
        specs = sm_grid(GridConfig(3.0, 0.5, 2.0, q=2))
        spec = KernelSpec.from_params([2.2, 0.4], [0.6, 1.9])
        idx = nearest_grid_index(spec, GridConfig(3.0, 0.5, 2.0, q=2), specs)
        assert specs[idx] == round_spec(spec, GridConfig(3.0, 0.5, 2.0, q=2))


class TestDistortion:
    def test_fine_grid_value(self):
        assert distortion_constant(0.5, 0.5) == pytest.approx(2.8178, abs=5e-4)

    def test_grows_with_gamma(self):
        assert distortion_constant(0.5, 2.0) > distortion_constant(0.5, 0.5)

    def test_zero_step_limit(self):
        assert distortion_constant(0.0, 0.3) == pytest.approx(1.3 ** 2)

    def test_main_text_below_eight(self):
        assert distortion_constant(1.0, 1.0) < 8

    @pytest.mark.parametrize("rho,gamma", [(0.5, 0.5), (1.0, 1.0), (0.3, 0.8)])
    def test_density_ratio_bound(self, rng, rho, gamma):
        cfg = GridConfig(4.0, 0.5, 3.0, rho=rho, gamma=gamma)
        C = distortion_constant(rho, gamma)
        for _ in range(1000):
            c, s = rng.uniform(0, 4), rng.uniform(0.5, 3)
            ct, st_ = round_params(c, s, cfg)
            xi = rng.uniform(c - 6 * s, c + 6 * s)
            ratio = norm.pdf(xi, c, s) / norm.pdf(xi, ct, st_)
            assert ratio <= C + 1e-9
            assert math.log(ratio) <= gaussian_log_ratio_max(c, s, ct, st_) + 1e-9


def _transfer_rate(cfg, factor, trials, seed, T=4.0, eps=1e-2):
    rng = np.random.default_rng(seed)
    specs = sm_grid(cfg)
    wins = 0
    for _ in range(trials):
        truth = KernelSpec((GaussianComponent(rng.uniform(0, cfg.W), math.exp(rng.uniform(math.log(cfg.m),
                                                                                          math.log(cfg.M)))),))
        sig = RkhsSignal(rng.uniform(0, T, 6), rng.standard_normal(6))
        target = lambda t: signal_eval(sig, truth, t) + 0.3 * np.cos(2 * math.pi * 7.0 * t)
        off = KernelSpec((GaussianComponent(rng.uniform(0, cfg.W), math.exp(rng.uniform(math.log(cfg.m),
                                                                                        math.log(cfg.M)))),))
        ref = operator_ridge_min(off, target, T, eps, 256)
        best = min(operator_ridge_min(sp, target, T, eps, 256) for sp in specs)
        wins += best <= factor * ref
    return wins / trials


class TestObjectiveTransfer:
    def test_main_text_grid(self):
        assert _transfer_rate(GridConfig.main_text(2.0, 0.5, 1.5), 8.0, 15, 1) >= 0.9

    def test_fine_grid(self):
        assert _transfer_rate(GridConfig.fine(2.0, 0.5, 1.5), 3.0, 15, 2) >= 0.9
