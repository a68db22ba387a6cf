import io
import json
import math

import numpy as np
import pytest

from msfcev.errors import DomainError
from msfcev.pricing import (MarketEnv, ModelSpec, call_price,
                            driver_variance, black_scholes_call,
                            transition_density)
from msfcev.verify import (FpeGrid, McConfig, McResult, mc_price_cev_classical,
                           mc_price_msfbs, quadrature_price, solve_fpe,
                           write_density_csv)


def fpe_l1(model, env, maturity, grid):
    sol = solve_fpe(model, env, maturity, grid)
    keep = sol.s > 1e-9
    closed = transition_density(model, env, maturity, sol.s[keep])
    return float(np.trapezoid(np.abs(sol.density_s[keep] - closed),
                              sol.s[keep])), sol


class TestFpe:
    def test_classical_alpha_one(self, env100):
        m = ModelSpec.make("cev", sigma=0.3, alpha=1.0)
        l1, sol = fpe_l1(m, env100, 1.0,
                         FpeGrid(x_min=0.0, x_max=450.0, n_space=2400,
                                 n_time=600))
        assert l1 <= 1e-2
        assert sol.conservation_drift <= 1e-3
        assert sol.mass + sol.absorbed == pytest.approx(1.0, abs=1e-3)

    def test_msfcev_short_maturity(self, env100):
        m = ModelSpec.make("msfcev", sigma=0.3, alpha=1.5, hurst=0.7)
        l1, sol = fpe_l1(m, env100, 0.25,
                         FpeGrid(x_min=0.0, x_max=14.0, n_space=1400,
                                 n_time=500))
        assert l1 <= 1e-2
        assert sol.conservation_drift <= 1e-3

    def test_first_order_refinement(self, env100):
        m = ModelSpec.make("cev", sigma=0.3, alpha=1.0)
        coarse, _ = fpe_l1(m, env100, 1.0,
                           FpeGrid(x_min=0.0, x_max=450.0, n_space=1200,
                                   n_time=600))
        fine, _ = fpe_l1(m, env100, 1.0,
                         FpeGrid(x_min=0.0, x_max=450.0, n_space=2400,
                                 n_time=600))
        assert coarse / fine >= 1.8

    def test_grid_must_cover_initial_condition(self, env100):
        m = ModelSpec.make("cev", sigma=0.3, alpha=1.0)
        with pytest.raises(DomainError):
            solve_fpe(m, env100, 1.0,
                      FpeGrid(x_min=0.0, x_max=50.0, n_space=200, n_time=100))

    def test_grid_validation(self):
        with pytest.raises(DomainError):
            FpeGrid(x_min=-1.0, x_max=10.0, n_space=100, n_time=100)
        with pytest.raises(DomainError):
            FpeGrid(x_min=0.0, x_max=10.0, n_space=10, n_time=100)

    def test_bs_family_rejected(self, env100):
        with pytest.raises(DomainError):
            solve_fpe(ModelSpec.make("bs", sigma=0.3), env100, 1.0,
                      FpeGrid(x_min=0.0, x_max=400.0, n_space=100, n_time=100))


class TestMcMsfbs:
    def closed(self, model, env, t, e):
        v = model.sigma ** 2 * driver_variance(model.driver,
                                               model.driver_params, t)
        return black_scholes_call(env.spot, e, env.rate, t, v)

    def test_classical_three_se(self):
        env = MarketEnv(rate=0.0, spot=100.0)
        m = ModelSpec.make("bs", sigma=0.3)
        mc = mc_price_msfbs(m, env, 1.0, 100.0, McConfig(n_paths=300_000, seed=5))
        assert abs(mc.price - self.closed(m, env, 1.0, 100.0)) <= 3.0 * mc.se

    def test_msfbs_three_se(self, env100):
        m = ModelSpec.make("msfbs", sigma=0.3, hurst=0.7)
        mc = mc_price_msfbs(m, env100, 1.0, 100.0,
                            McConfig(n_paths=300_000, seed=6))
        assert abs(mc.price - self.closed(m, env100, 1.0, 100.0)) <= 3.0 * mc.se

    def test_antithetic_consistency(self, env100):
        m = ModelSpec.make("bs", sigma=0.3)
        plain = mc_price_msfbs(m, env100, 1.0, 100.0,
                               McConfig(n_paths=200_000, seed=7))
        anti = mc_price_msfbs(m, env100, 1.0, 100.0,
                              McConfig(n_paths=200_000, seed=8, antithetic=True))
        combined = math.hypot(plain.se, anti.se)
        assert abs(plain.price - anti.price) <= 3.0 * combined
        assert anti.se < plain.se  # variance reduction at the money

    def test_determinism(self, env100):
        m = ModelSpec.make("msfbs", sigma=0.3, hurst=0.8)
        a = mc_price_msfbs(m, env100, 0.5, 105.0, McConfig(n_paths=50_000, seed=3))
        b = mc_price_msfbs(m, env100, 0.5, 105.0, McConfig(n_paths=50_000, seed=3))
        assert a == b

    def test_unbiasedness_z_scores(self, env100):
        m = ModelSpec.make("msfbs", sigma=0.3, hurst=0.7)
        closed = self.closed(m, env100, 1.0, 100.0)
        inside = 0
        for rep in range(100):
            mc = mc_price_msfbs(m, env100, 1.0, 100.0,
                                McConfig(n_paths=100_000, seed=2000 + rep))
            inside += abs(mc.price - closed) <= 3.0 * mc.se
        assert inside >= 95

    def test_family_gate(self, env100):
        with pytest.raises(DomainError):
            mc_price_msfbs(ModelSpec.make("msfcev", sigma=0.3, hurst=0.7),
                           env100, 1.0, 100.0, McConfig(n_paths=10_000, seed=0))


class TestMcCevClassical:
    def test_zero_vol_limit(self, env100):
        # deterministic forward, up to the O(dt) drift compounding error
        m = ModelSpec.make("cev", sigma=1e-8, alpha=1.0)
        mc = mc_price_cev_classical(m, env100, 1.0, 90.0,
                                    McConfig(n_paths=10_000, n_steps=1000, seed=1))
        intrinsic = 100.0 - 90.0 * math.exp(-0.05)
        assert mc.price == pytest.approx(intrinsic, rel=1e-4)
        assert mc.se == pytest.approx(0.0, abs=1e-6)

    def test_absolute_vol_against_closed_form(self, env100):
        m = ModelSpec.make("cev", sigma=3.0, alpha=1.0)
        closed = call_price(m, env100, 1.0, 100.0)
        mc = mc_price_cev_classical(m, env100, 1.0, 100.0,
                                    McConfig(n_paths=60_000, n_steps=200, seed=21))
        assert abs(mc.price - closed) <= 3.0 * mc.se

    def test_near_lognormal_limit(self, env100):
        alpha = 1.999
        m = ModelSpec.make("cev", sigma=0.3, alpha=alpha)
        v = (0.3 * 100.0 ** (alpha / 2.0 - 1.0)) ** 2
        bs = black_scholes_call(100.0, 100.0, 0.05, 1.0, v)
        mc = mc_price_cev_classical(m, env100, 1.0, 100.0,
                                    McConfig(n_paths=60_000, n_steps=200, seed=2))
        assert abs(mc.price - bs) <= 3.0 * mc.se

    def test_step_guidance_warning(self, env100):
        m = ModelSpec.make("cev", sigma=0.3, alpha=1.0)
        with pytest.warns(RuntimeWarning, match="n_steps"):
            mc_price_cev_classical(m, env100, 1.0, 100.0,
                                   McConfig(n_paths=2_000, n_steps=50, seed=1))

    def test_driver_gate(self, env100):
        with pytest.raises(DomainError):
            mc_price_cev_classical(ModelSpec.make("msfcev", sigma=0.3, hurst=0.7),
                                   env100, 1.0, 100.0,
                                   McConfig(n_paths=10_000, n_steps=200, seed=0))

    def test_config_validation(self):
        with pytest.raises(DomainError):
            McConfig(n_paths=10, n_steps=200, seed=0)
        with pytest.raises(DomainError):
            McConfig(n_paths=10_000, n_steps=5, seed=0)


class TestQuadraturePrice:
    @pytest.mark.parametrize("name,alpha,h,t", [
        ("msfcev", 0.5, 0.7, 0.25), ("msfcev", 1.0, 0.9, 1.0),
        ("mfcev", 1.5, 0.7, 2.0), ("cev", 1.0, 0.5, 1.0),
    ])
    def test_matches_closed_form(self, env100, name, alpha, h, t):
        m = ModelSpec.make(name, sigma=0.3, alpha=alpha, hurst=h)
        quad = quadrature_price(m, env100, t, 100.0)
        closed = call_price(m, env100, t, 100.0)
        assert quad == pytest.approx(closed, rel=1e-6)

    def test_zero_strike_recovers_spot(self, env100):
        m = ModelSpec.make("msfcev", sigma=0.3, alpha=1.2, hurst=0.75)
        value = quadrature_price(m, env100, 1.0, 0.0)
        assert value == pytest.approx(100.0, rel=1e-6)

    def test_deep_otm_bound(self, env100):
        m = ModelSpec.make("msfcev", sigma=0.3, alpha=1.2, hurst=0.75)
        value = quadrature_price(m, env100, 0.5, 1000.0)
        assert 0.0 <= value <= 1e-3 * 100.0

    def test_family_gate(self, env100):
        with pytest.raises(DomainError):
            quadrature_price(ModelSpec.make("bs", sigma=0.3), env100, 1.0, 100.0)


class TestExports:
    def test_density_csv(self):
        buf = io.StringIO()
        write_density_csv([90.0, 100.0], [0.01, 0.02], buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "S_T,density"
        assert lines[1].startswith("90,")

    def test_mc_result_json(self):
        res = McResult(price=1.25, se=0.01, n_paths=1000, seed=42)
        data = json.loads(res.to_json())
        assert data == {"price": 1.25, "se": 0.01, "n_paths": 1000, "seed": 42}
