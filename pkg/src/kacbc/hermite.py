"""Hermite polynomials H_m(x, c) with variance parameter c.

Defined by H_0 = 1 and H_m = x H_{m-1} - c d/dx H_{m-1}, so H_2 = x^2 - c,
H_3 = x^3 - 3cx, H_5 = x^5 - 10cx^3 + 15c^2 x.  For x ~ N(0, c) they are
orthogonal with E[H_m H_n] = delta_{mn} m! c^m.
"""

import math

import numpy as np


def hermite_value(x, c, m):
    """Evaluate H_m(x, c) by the recursion; x may be an array."""
    x = np.asarray(x, dtype=np.float64)
    if m < 0:
        raise ValueError("order must be >= 0")
    hm1 = np.ones_like(x)
    if m == 0:
        return hm1
    h = x.copy()
    for k in range(2, m + 1):
        h, hm1 = x * h - c * (k - 1) * hm1, h
    return h


def hermite_coefficients(m, c):
    """Monomial coefficients of H_m(x, c), lowest degree first (length m+1)."""
    coeffs = np.zeros(m + 1)
    prev = np.zeros(m + 1)
    prev[0] = 1.0
    if m == 0:
        return prev
    cur = np.zeros(m + 1)
    cur[1] = 1.0
    for k in range(2, m + 1):
        nxt = np.zeros(m + 1)
        nxt[1:] += cur[:-1]              # x * H_{k-1}
        dcur = cur[1:] * np.arange(1, m + 1)   # d/dx H_{k-1}
        nxt[:-1] -= c * dcur             # - c H'_{k-1}
        prev, cur = cur, nxt
    return cur


def odd_combination_to_monomials(a_odd, c):
    """Monomial coefficients of sum_k a_odd[k] H_{2k+1}(x, c).

    a_odd[k] multiplies H_{2k+1}; returns a vector of length 2*len(a_odd).
    """
    n = len(a_odd)
    out = np.zeros(2 * n)
    for k, a in enumerate(a_odd):
        h = hermite_coefficients(2 * k + 1, c)
        out[: len(h)] += a * h
    return out


def reexpand_odd(a_odd, c_old, c_new):
    """Coefficients b with sum a_k H_{2k+1}(x, c_old) = sum b_k H_{2k+1}(x, c_new).

    Solved by matching monomial coefficients from the top degree down; the
    representation is unique because odd Hermite polynomials of degrees
    1, 3, .., 2n-1 form a basis of odd polynomials.
    """
    n = len(a_odd)
    target = odd_combination_to_monomials(a_odd, c_old)
    b = np.zeros(n)
    residual = target.copy()
    for k in range(n - 1, -1, -1):
        deg = 2 * k + 1
        h = hermite_coefficients(deg, c_new)
        b[k] = residual[deg] / h[deg]    # h[deg] == 1, kept for clarity
        residual[: deg + 1] -= b[k] * h
    return b


def hermite_orthogonality_mc(m, n, c, n_samples, rng):
    """Monte Carlo E[H_m H_n] for x ~ N(0, c); oracle for orthogonality tests."""
    x = rng.normal(0.0, math.sqrt(c), size=n_samples)
    vals = hermite_value(x, c, m) * hermite_value(x, c, n)
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(n_samples))
    return mean, se
