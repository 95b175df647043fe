import numpy as np
import pytest

from kacbc.lattice import KacKernel, Torus, build_kac_kernel
from kacbc.scaling import (Regime, critical_beta, mean_field_coefficients,
                           phi4_cubic_coefficient, phi6_series,
                           renormalization_constant, tune_phi4, tune_phi6)


class TestMeanFieldCoefficients:
    def test_tricritical_point(self):
        co = mean_field_coefficients(0.25, 3.0)
        assert abs(co.a_lin) <= 1e-12
        assert abs(co.b_cub) <= 1e-12
        assert abs(co.c_qui + 9.0 / 20.0) <= 1e-12

    def test_critical_curve_point(self):
        assert abs(mean_field_coefficients(1.0, 1.5).a_lin) <= 1e-14

    def test_ising_limit(self):
        # a -> infinity recovers the two-spin coefficients
        co = mean_field_coefficients(1e6, 1.0)
        assert abs(co.a_lin - (1.0 - 1.0)) <= 1e-5
        assert abs(co.b_cub + 1.0 / 3.0) <= 1e-5

    def test_linear_vanishes_on_curve(self, rng):
        a = np.exp(rng.uniform(np.log(0.01), np.log(100.0), size=1000))
        for ai in a:
            assert abs(mean_field_coefficients(ai, critical_beta(ai)).a_lin) <= 1e-14

    def test_cubic_sign_flips_at_quarter(self, rng):
        for ai in rng.uniform(0.01, 100.0, size=200):
            b = rng.uniform(0.1, 5.0)
            co = mean_field_coefficients(ai, b)
            if ai > 0.25:
                assert co.b_cub < 0
            elif ai < 0.25:
                assert co.b_cub > 0


class TestCriticalBeta:
    def test_values(self):
        assert critical_beta(0.25) == 3.0
        assert critical_beta(1.0) == 1.5

    def test_large_a_limit(self):
        assert abs(critical_beta(1e12) - 1.0) <= 1e-11


class TestRegime:
    def test_torus_sizes(self):
        assert Regime("phi4").torus_n(0.1) == 100
        assert Regime("phi4").torus_n(0.2) == 25
        assert Regime("phi6").torus_n(0.2) == 125
        assert Regime("phi6").torus_n(0.3) == 37

    def test_exponent_conventions(self):
        r4, r6 = Regime("phi4"), Regime("phi6")
        assert (r4.b_time, r4.b_freq) == (2, 1)
        assert (r6.b_time, r6.b_freq) == (4, 2)

    def test_c_gamma2_near_one(self):
        for kind in ("phi4", "phi6"):
            r = Regime(kind)
            for g in (0.2, 0.1, 0.05) if kind == "phi4" else (0.3, 0.25, 0.2):
                assert abs(r.c_gamma2(g) - 1.0) <= 1.5 * g * g

    def test_unknown_regime(self):
        with pytest.raises(ValueError):
            Regime("phi8")


class TestRenormalizationConstant:
    def test_zero_transfer_gives_zero(self):
        torus = Torus(10)
        khat = np.zeros((21, 21))
        khat[0, 0] = 1.0
        kern = KacKernel(torus, 0.2, np.zeros((21, 21)), khat)
        c, _ = renormalization_constant(kern, Regime("phi4"), 1.5)
        assert c == 0.0

    def test_difference_bounded_over_sweep(self, mother):
        diffs = []
        for g in (0.2, 0.1, 0.05):
            t = Torus(Regime("phi4").torus_n(g))
            k = build_kac_kernel(g, t, mother)
            _, rep = renormalization_constant(k, Regime("phi4"), critical_beta(1.0))
            diffs.append(rep["difference"])
        assert np.max(np.abs(diffs)) < 1.0
        assert np.max(np.abs(np.diff(diffs))) < 0.1

    def test_log_growth(self, mother):
        # c_gamma = A log(1/gamma) + B: consecutive-halving slopes stable
        cs = []
        for g in (0.2, 0.1, 0.05):
            t = Torus(Regime("phi4").torus_n(g))
            k = build_kac_kernel(g, t, mother)
            c, _ = renormalization_constant(k, Regime("phi4"), critical_beta(1.0))
            cs.append(c)
        s1 = (cs[1] - cs[0]) / np.log(2.0)
        s2 = (cs[2] - cs[1]) / np.log(2.0)
        assert s1 > 0 and s2 > 0
        assert abs(s2 - s1) <= 0.30 * abs(s1)

    def test_rejects_degenerate_gap(self):
        torus = Torus(10)
        khat = np.ones((21, 21))
        kern = KacKernel(torus, 0.2, np.zeros((21, 21)), khat)
        with pytest.raises(ValueError):
            renormalization_constant(kern, Regime("phi4"), 1.5)


class TestTunePhi4:
    def test_residual(self):
        p = tune_phi4(0.1, 1.0, 0.7, 0.35)
        assert abs(p.tuning_residuals()[0]) <= 1e-12

    def test_beta_to_critical_as_gamma_vanishes(self):
        p = tune_phi4(1e-8, 1.0, 0.7, 0.35)
        assert abs(p.beta - critical_beta(1.0)) <= 1e-12

    def test_quarter_anchor_drops_renormalization(self):
        # at a_c = 1/4 the 4a_c-1 factor kills the c_gamma term
        pa = tune_phi4(0.1, 0.25, 0.7, 0.35)
        pb = tune_phi4(0.1, 0.25, 0.7, 99.0)
        assert pa.beta == pb.beta

    def test_theta_is_log_a(self):
        p = tune_phi4(0.1, 2.0, 0.0, 0.3)
        assert p.theta == np.log(2.0)


class TestTunePhi6:
    def test_gamma_zero_is_tricritical(self):
        p = tune_phi6(0.0, 0.5, 0.7, 0.35)
        assert abs(p.a - 0.25) <= 1e-12
        assert abs(p.beta - 3.0) <= 1e-12

    def test_residuals(self):
        p = tune_phi6(0.1, 0.5, 0.7, 0.35)
        r1, r2 = p.tuning_residuals()
        assert abs(r1) <= 1e-12 and abs(r2) <= 1e-12

    def test_matches_series_through_fourth_order(self):
        # Newton solution minus truncated series vanishes faster than gamma^4.5
        gaps = []
        gs = (0.1, 0.05, 0.025)
        for g in gs:
            p = tune_phi6(g, 0.5, 0.7, 0.35)
            a_s, b_s = phi6_series(g, 0.5, 0.7, 0.35)
            gaps.append(abs(p.a - a_s) + abs(p.beta - b_s))
        slope = np.polyfit(np.log(gs), np.log(gaps), 1)[0]
        assert slope >= 4.5

    def test_a_below_quarter_for_positive_correction(self):
        p = tune_phi6(0.05, 0.0, 0.1, 0.3)   # 9c/2 + a3 > 0
        assert p.a < 0.25


class TestTheoremCoefficients:
    def test_phi4_cubic_at_one(self):
        assert abs(phi4_cubic_coefficient(1.0) + 3.0 / 8.0) <= 1e-12

    def test_phi4_cubic_is_mean_field_cubic_at_critical(self, rng):
        for a in rng.uniform(0.3, 5.0, size=50):
            co = mean_field_coefficients(a, critical_beta(a))
            assert abs(phi4_cubic_coefficient(a) - co.b_cub) <= 1e-12
