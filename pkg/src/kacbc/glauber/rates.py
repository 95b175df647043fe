"""Single-site jump rates of the spin-1 Glauber dynamics and their expansions.

A ring at site j resamples the spin from the three-point distribution

    p(sbar) = exp(sbar*beta*h + sbar^2*theta) / N(h),
    N(h) = e^{-beta h + theta} + 1 + e^{beta h + theta},

which sums to one, so every site rings at total rate exactly 1.  The odd
Taylor coefficients of p in beta*h drive the mean-field drift expansion;
even ones cancel by the (h, sbar) -> (-h, -sbar) symmetry.
"""

import math

import numpy as np


def jump_rates(h, beta, theta):
    """Probabilities (p_minus, p_zero, p_plus); numerically stable, vectorizable."""
    h = np.asarray(h, dtype=np.float64)
    x = beta * h
    # subtract the max exponent among {-x+theta, 0, x+theta}
    m = np.maximum(np.abs(x) + theta, 0.0)
    em = np.exp(-x + theta - m)
    e0 = np.exp(-m)
    ep = np.exp(x + theta - m)
    n = (em + ep) + e0   # symmetric grouping: h -> -h swaps the rates bitwise
    return em / n, e0 / n, ep / n


def drift_function(h, beta, theta):
    """Expected new spin D(h) = sum_sbar sbar * p(sbar) = 2 e^theta sinh(beta h)/N."""
    pm, _, pp = jump_rates(h, beta, theta)
    return pp - pm


def rate_sum_function(sigma, h, beta, theta):
    """sum_sbar (sbar - sigma)^2 p(sbar): jump-variance rate at a site (in [0, 5])."""
    pm, pz, pp = jump_rates(h, beta, theta)
    sigma = np.asarray(sigma, dtype=np.float64)
    return (-1.0 - sigma) ** 2 * pm + sigma**2 * pz + (1.0 - sigma) ** 2 * pp


def taylor_coefficients(theta, sigma_bar, n):
    """Closed-form coefficient c_n of p(sbar) as a series in (beta*h)^n.

    Only the odd coefficients n in {1, 3, 5} are exposed: even-order terms
    drop out of the drift by symmetry and are rejected here.
    """
    if n not in (1, 3, 5):
        raise ValueError("only n in {1, 3, 5}; even coefficients vanish in the drift")
    if sigma_bar not in (-1, 0, 1):
        raise ValueError("sigma_bar must be in {-1, 0, +1}")
    s = float(sigma_bar)
    e = math.exp(theta)
    es = math.exp(s * s * theta)
    if n == 1:
        return s * es / (1.0 + 2.0 * e)
    if n == 3:
        return s * es * (s * s + 2.0 * (s * s - 3.0) * e) / (6.0 * (1.0 + 2.0 * e) ** 2)
    return (
        s * es * (4.0 * (s * s - 5.0) ** 2 * e * e - 2.0 * (8.0 * s * s + 5.0) * e + s * s)
        / (120.0 * (1.0 + 2.0 * e) ** 3)
    )


def detailed_balance_check(h, beta, theta, s, s_prime):
    """Residual of p(s') e^{s beta h + s^2 theta} = p(s) e^{s' beta h + s'^2 theta}.

    Exact because the kernel vanishes at the origin, so h at a site does not
    involve the site's own spin.
    """
    if s == s_prime:
        raise ValueError("detailed balance compares two distinct spin values")
    for v in (s, s_prime):
        if v not in (-1, 0, 1):
            raise ValueError("spins must be in {-1, 0, +1}")
    rates = jump_rates(h, beta, theta)
    idx = {-1: 0, 0: 1, 1: 2}
    lhs = rates[idx[s_prime]] * math.exp(s * beta * h + s * s * theta)
    rhs = rates[idx[s]] * math.exp(s_prime * beta * h + s_prime * s_prime * theta)
    return abs(lhs - rhs)


def ptilde(theta_c):
    """Fixed update distribution (p_minus, p_zero, p_plus) of the auxiliary process."""
    e = math.exp(theta_c)
    n = 1.0 + 2.0 * e
    return e / n, 1.0 / n, e / n


def average_rate_function(sigma_value, theta_c):
    """Jump-variance rate A(sigma) under the fixed update distribution."""
    e = math.exp(theta_c)
    n = 1.0 + 2.0 * e
    if sigma_value == 0:
        return 2.0 * e / n
    if sigma_value in (-1, 1):
        return (4.0 * e + 1.0) / n
    raise ValueError("sigma_value must be in {-1, 0, +1}")


def average_rate_ptilde_mean(theta_c):
    """Mean of A(sigma) over the fixed distribution: 4 e^theta/(1+2 e^theta)."""
    e = math.exp(theta_c)
    return 4.0 * e / (1.0 + 2.0 * e)
