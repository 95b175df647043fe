import math

import numpy as np
import pytest

from kacbc.glauber.rates import (average_rate_function, average_rate_ptilde_mean,
                                 detailed_balance_check, drift_function,
                                 jump_rates, ptilde, rate_sum_function,
                                 taylor_coefficients)
from kacbc.scaling import critical_beta, mean_field_coefficients


class TestJumpRates:
    def test_symmetric_point(self):
        pm, pz, pp = jump_rates(0.0, 1.0, 0.0)
        np.testing.assert_allclose([pm, pz, pp], [1 / 3] * 3, rtol=0, atol=1e-15)

    def test_tricritical_zero_field(self):
        pm, pz, pp = jump_rates(0.0, 3.0, math.log(0.25))
        np.testing.assert_allclose([pm, pz, pp], [1 / 6, 2 / 3, 1 / 6], atol=1e-15)

    def test_sum_to_one_and_range(self, rng):
        h = rng.uniform(-1, 1, size=10**6)
        beta = rng.uniform(0, 5, size=10**6)
        theta = rng.uniform(-5, 5, size=10**6)
        pm, pz, pp = jump_rates(h, beta, theta)
        s = pm + pz + pp
        # one rounding in each of the three divisions: within a ulp of 1
        assert np.max(np.abs(s - 1.0)) <= 5e-16
        for p in (pm, pz, pp):
            assert np.all(p > 0) and np.all(p < 1)

    def test_field_reflection_swaps(self, rng):
        for _ in range(200):
            h = rng.uniform(-1, 1)
            beta = rng.uniform(0, 4)
            theta = rng.uniform(-3, 3)
            a = jump_rates(h, beta, theta)
            b = jump_rates(-h, beta, theta)
            assert a[0] == b[2] and a[1] == b[1] and a[2] == b[0]

    def test_extreme_arguments_stable(self):
        pm, pz, pp = jump_rates(1.0, 500.0, 200.0)
        assert np.isfinite(pm) and np.isfinite(pz) and np.isfinite(pp)
        assert abs(pm + pz + pp - 1.0) <= 1e-12


def rate_of_sbar(x, theta, sbar):
    """p(sbar) as a function of x = beta*h; scalar helper for oracles."""
    num = math.exp(sbar * x + sbar * sbar * theta)
    den = math.exp(-x + theta) + 1.0 + math.exp(x + theta)
    return num / den


def poly_fit_derivative(f, order, half_width=0.35, n_nodes=121, degree=16):
    """Chebyshev-fit oracle for the order-th Taylor coefficient of f at 0."""
    from numpy.polynomial import chebyshev
    x = np.cos(np.pi * (np.arange(n_nodes) + 0.5) / n_nodes) * half_width
    y = np.array([f(v) for v in x])
    ch = chebyshev.Chebyshev.fit(x, y, degree)
    return ch.convert(kind=np.polynomial.Polynomial).coef[order]


class TestTaylorCoefficients:
    def test_first_coefficient_symmetric(self):
        assert abs(taylor_coefficients(0.0, 1, 1) - 1.0 / 3.0) <= 1e-15

    def test_third_coefficient_vanishes_at_tricritical(self):
        assert abs(taylor_coefficients(math.log(0.25), 1, 3)) <= 1e-15

    def test_even_orders_rejected(self):
        for n in (0, 2, 4, 6, 7):
            with pytest.raises(ValueError):
                taylor_coefficients(0.0, 1, n)

    def test_against_series_fit(self, rng):
        # independent oracle: polynomial fit of x -> p(sbar) around x=0
        for theta in (-1.0, 0.0, math.log(0.25), 0.7):
            for sbar in (-1, 0, 1):
                for order in (1, 3, 5):
                    want = poly_fit_derivative(
                        lambda x: rate_of_sbar(x, theta, sbar), order)
                    got = taylor_coefficients(theta, sbar, order)
                    if sbar == 0:
                        assert abs(got) <= 1e-12  # odd coefficients vanish
                    assert abs(got - want) <= 1e-6 * max(abs(want), 1e-3)

    def test_drift_identity_with_linear_coefficient(self, rng):
        # sum_sbar sbar*c1(sbar) * beta reproduces 2 a beta/(2a+1)
        for theta in rng.uniform(-2, 2, size=20):
            s = sum(sb * taylor_coefficients(theta, sb, 1) for sb in (-1, 0, 1))
            a = math.exp(theta)
            assert abs(s - 2 * a / (1 + 2 * a)) <= 1e-14


class TestDriftExpansion:
    def test_odd_series_matches_mean_field(self, rng):
        # |D(h) - (A+1)h - B h^3 - C h^5| = O(|beta h|^7)
        beta, theta = 2.1, -0.4
        a = math.exp(theta)
        co = mean_field_coefficients(a, beta)
        hs = np.geomspace(0.02, 0.3, 12) / beta
        errs = []
        for h in hs:
            d = drift_function(h, beta, theta)
            approx = (co.a_lin + 1.0) * h + co.b_cub * h**3 + co.c_qui * h**5
            errs.append(abs(d - approx))
        slope = np.polyfit(np.log(beta * hs), np.log(errs), 1)[0]
        assert slope >= 6.5

    def test_drift_function_is_rate_difference(self, rng):
        h = rng.uniform(-1, 1, size=100)
        pm, _, pp = jump_rates(h, 1.7, 0.3)
        np.testing.assert_allclose(drift_function(h, 1.7, 0.3), pp - pm, atol=1e-16)


class TestDetailedBalance:
    def test_residual_random(self, rng):
        for _ in range(500):
            h = rng.uniform(-1, 1)
            beta = rng.uniform(0, 4)
            theta = rng.uniform(-3, 3)
            s, sp = rng.choice([-1, 0, 1], size=2, replace=False)
            assert detailed_balance_check(h, beta, theta, int(s), int(sp)) <= 1e-12

    def test_zero_at_symmetric_point(self):
        assert detailed_balance_check(0.0, 1.0, 0.0, 1, -1) == 0.0

    def test_equal_spins_rejected(self):
        with pytest.raises(ValueError):
            detailed_balance_check(0.1, 1.0, 0.0, 1, 1)


class TestAverageRateFunction:
    def test_tricritical_values(self):
        th = math.log(0.25)
        assert abs(average_rate_function(0, th) - 1.0 / 3.0) <= 1e-15
        assert abs(average_rate_function(1, th) - 4.0 / 3.0) <= 1e-15
        assert abs(average_rate_ptilde_mean(th) - 2.0 / 3.0) <= 1e-15

    def test_ising_limit(self):
        # theta -> infinity: A(+-1) -> 2 and the mean -> 2; A(0) -> 1 (from a
        # neutral site both unit jumps stay available, each at rate 1/2)
        assert abs(average_rate_function(1, 40.0) - 2.0) <= 1e-12
        assert abs(average_rate_function(0, 40.0) - 1.0) <= 1e-12
        assert abs(average_rate_ptilde_mean(40.0) - 2.0) <= 1e-12

    def test_average_equals_two_over_beta_c(self, rng):
        for th in rng.uniform(-4, 4, size=100):
            pm, pz, pp = ptilde(th)
            avg = (pm * average_rate_function(-1, th)
                   + pz * average_rate_function(0, th)
                   + pp * average_rate_function(1, th))
            assert abs(avg - average_rate_ptilde_mean(th)) <= 1e-14
            assert abs(avg - 2.0 / critical_beta(math.exp(th))) <= 1e-14

    def test_rate_sum_consistency(self, rng):
        # A(sigma) is the fixed-rate limit of the configuration rate sum
        th = math.log(0.25)
        for s in (-1, 0, 1):
            got = rate_sum_function(s, 0.0, 3.0, th)
            assert abs(got - average_rate_function(s, th)) <= 1e-14

    def test_rate_sum_bounded_by_five(self, rng):
        s = rng.choice([-1, 0, 1], size=1000)
        h = rng.uniform(-1, 1, size=1000)
        w = rate_sum_function(s, h, 3.0, -1.0)
        assert np.all(w >= 0.0) and np.all(w <= 5.0)
