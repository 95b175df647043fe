"""Scaling regimes, mean-field coefficients, critical curve and parameter tuning.

The two regimes fix how the lattice size, time scale and field scale are
driven by the interaction range gamma:

    quartic regime:  N = floor(gamma^-2), alpha = gamma^2, delta = gamma
    sextic  regime:  N = floor(gamma^-3), alpha = gamma^4, delta = gamma

Both keep eps = 2/(2N+1), so c2 = eps/gamma^2 (resp. eps/gamma^3) is within
O(gamma^2) of 1.  The inverse temperature is tuned a logarithmically
divergent distance above the mean-field critical curve; the divergence is
carried by the lattice renormalization constant computed from the kernel's
transfer function.
"""

import math
from dataclasses import dataclass

import numpy as np

from .fourier import freq_sq
from .lattice import Torus, build_kac_kernel, build_mother_kernel


@dataclass(frozen=True)
class Regime:
    """Scaling regime: 'phi4' (quartic limit) or 'phi6' (sextic limit)."""

    kind: str

    def __post_init__(self):
        if self.kind not in ("phi4", "phi6"):
            raise ValueError(f"unknown regime {self.kind!r}")

    @property
    def space_exponent(self):
        return 2 if self.kind == "phi4" else 3

    @property
    def b_time(self):
        return 2 if self.kind == "phi4" else 4

    @property
    def b_freq(self):
        return 1 if self.kind == "phi4" else 2

    def torus_n(self, gamma):
        # nudge before floor: gamma^-2 for decimal gamma often lands at
        # 99.999... in binary floating point
        return int(math.floor(gamma ** (-self.space_exponent) + 1e-9))

    def alpha(self, gamma):
        return gamma**2 if self.kind == "phi4" else gamma**4

    def delta(self, gamma):
        return gamma

    def c_gamma2(self, gamma):
        """eps/gamma^2 (quartic) or eps/gamma^3 (sextic); close to 1."""
        torus = Torus(self.torus_n(gamma))
        return torus.eps / gamma**self.space_exponent


@dataclass(frozen=True)
class MeanFieldCoefficients:
    a_lin: float   # coefficient of the linear term, zero on the critical curve
    b_cub: float   # cubic coefficient, zero additionally at the tricritical point
    c_qui: float   # quintic coefficient


def mean_field_coefficients(a, beta):
    """Closed-form drift-expansion coefficients (a = e^theta)."""
    a_lin = 2.0 * a * beta / (2.0 * a + 1.0) - 1.0
    b_cub = -a * (4.0 * a - 1.0) * beta**3 / (3.0 * (2.0 * a + 1.0) ** 2)
    c_qui = a * (64.0 * a * a - 26.0 * a + 1.0) * beta**5 / (60.0 * (1.0 + 2.0 * a) ** 3)
    return MeanFieldCoefficients(a_lin, b_cub, c_qui)


def critical_beta(a):
    """The unique beta with vanishing linear coefficient at given a."""
    return (2.0 * a + 1.0) / (2.0 * a)


def phi4_cubic_coefficient(a_c):
    """Leading (cubic) coefficient of the quartic-regime limit equation."""
    beta_c = critical_beta(a_c)
    return -a_c * (4.0 * a_c - 1.0) * beta_c**3 / (3.0 * (2.0 * a_c + 1.0) ** 2)


PHI6_QUINTIC_COEFFICIENT = -9.0 / 20.0  # value of the quintic coefficient at (1/4, 3)


@dataclass(frozen=True)
class ModelParams:
    """Tuned microscopic parameters for one gamma in one regime."""

    regime: Regime
    gamma: float
    a: float
    beta: float
    frak_a1: float
    frak_a3: float          # nan in the quartic regime
    c_gamma_renorm: float
    a_c: float              # critical-curve anchor (1/4 in the sextic regime)

    @property
    def theta(self):
        return math.log(self.a)

    @property
    def beta_c(self):
        return critical_beta(self.a_c)

    def coefficients(self):
        return mean_field_coefficients(self.a, self.beta)

    def tuning_residuals(self):
        g = self.gamma
        c = self.c_gamma_renorm
        co = self.coefficients()
        if self.regime.kind == "phi4":
            ac, bc = self.a_c, self.beta_c
            rhs = g * g * (ac * (4 * ac - 1) * bc**3 * c / (2 * ac + 1) ** 2 + self.frak_a1)
            return (co.a_lin - rhs,)
        r1 = co.b_cub - g * g * (4.5 * c + self.frak_a3)
        r2 = co.a_lin - g**4 * (-3 * c * self.frak_a3 - 6.75 * c * c + self.frak_a1)
        return (r1, r2)


def renormalization_constant(kernel, regime, beta_c):
    """Lattice renormalization constant and its comparison against the log sum.

    Returns (c_gamma, report) where the report carries the raw sum
    sum_{0<|w|<1/gamma} 1/(4 pi^2 |w|^2) and the difference beta_c*c_gamma
    minus that sum (bounded in gamma).
    """
    khat = kernel.khat
    gap = 1.0 - khat
    mask = np.ones_like(khat, dtype=bool)
    mask[0, 0] = False
    if np.any(gap[mask] <= 0.0):
        raise ValueError("transfer function reaches 1 away from the origin")
    gb = kernel.gamma ** (-regime.b_time)
    c_gamma = float(np.sum(khat[mask] ** 2 / (gb * gap[mask])) / (4.0 * beta_c))

    wsq = freq_sq(khat.shape[0])
    comp_mask = (wsq > 0) & (wsq < kernel.gamma ** (-2.0))
    comparison = float(np.sum(1.0 / (4.0 * np.pi**2 * wsq[comp_mask])))
    report = {
        "c_gamma": c_gamma,
        "comparison_sum": comparison,
        "difference": beta_c * c_gamma - comparison,
        "log_ratio": c_gamma / math.log(1.0 / kernel.gamma),
    }
    return c_gamma, report


def tune_phi4(gamma, a_c, frak_a1, c_gamma, regime=Regime("phi4")):
    """Quartic-regime tuning: a held at a_c, beta solved in closed form."""
    if a_c <= 0:
        raise ValueError("a_c must be positive")
    beta_c = critical_beta(a_c)
    rhs = gamma * gamma * (
        a_c * (4.0 * a_c - 1.0) * beta_c**3 * c_gamma / (2.0 * a_c + 1.0) ** 2 + frak_a1
    )
    a = a_c
    beta = (2.0 * a + 1.0) * (1.0 + rhs) / (2.0 * a)
    return ModelParams(regime, gamma, a, beta, frak_a1, float("nan"), c_gamma, a_c)


def phi6_series(gamma, frak_a1, frak_a3, c_gamma):
    """Power-series tuning through O(gamma^4), used to seed the exact solve."""
    g2, g4 = gamma**2, gamma**4
    c, a3 = c_gamma, frak_a3
    a = 0.25 - g2 * (9.0 * c / 8.0 + a3 / 4.0) \
        + g4 * (5.0 / 48.0) * (81.0 * c * c + 36.0 * c * a3 + 4.0 * a3 * a3)
    beta = 3.0 + g2 * (9.0 * c + 2.0 * a3) \
        + g4 * (-189.0 * c * c / 4.0 + 3.0 * frak_a1 - 21.0 * c * a3 - 4.0 * a3 * a3 / 3.0)
    return a, beta


def tune_phi6(gamma, frak_a1, frak_a3, c_gamma, regime=Regime("phi6"),
              tol=1e-13, max_iter=50):
    """Sextic-regime tuning: damped Newton on the two coupled conditions."""
    rhs1 = gamma**2 * (4.5 * c_gamma + frak_a3)
    rhs2 = gamma**4 * (-3.0 * c_gamma * frak_a3 - 6.75 * c_gamma**2 + frak_a1)

    def residual(a, beta):
        f1 = -a * (4 * a - 1) * beta**3 / (3 * (2 * a + 1) ** 2) - rhs1
        f2 = 2 * a * beta / (2 * a + 1) - 1.0 - rhs2
        return np.array([f1, f2])

    def jacobian(a, beta):
        j11 = -beta**3 * (10 * a - 1) / (3 * (2 * a + 1) ** 3)
        j12 = -a * (4 * a - 1) * beta**2 / (2 * a + 1) ** 2
        j21 = 2 * beta / (2 * a + 1) ** 2
        j22 = 2 * a / (2 * a + 1)
        return np.array([[j11, j12], [j21, j22]])

    a, beta = phi6_series(gamma, frak_a1, frak_a3, c_gamma)
    f = residual(a, beta)
    for _ in range(max_iter):
        if np.max(np.abs(f)) < tol:
            break
        step = np.linalg.solve(jacobian(a, beta), f)
        lam = 1.0
        for _ in range(30):
            a_new, beta_new = a - lam * step[0], beta - lam * step[1]
            f_new = residual(a_new, beta_new)
            if np.linalg.norm(f_new) < np.linalg.norm(f) or lam < 1e-8:
                break
            lam *= 0.5
        a, beta, f = a_new, beta_new, f_new
    if np.max(np.abs(f)) > 1e-12:
        raise RuntimeError(
            f"tricritical tuning did not converge: residual {np.max(np.abs(f)):.2e}"
        )
    return ModelParams(regime, gamma, float(a), float(beta), frak_a1, frak_a3,
                       c_gamma, 0.25)


def build_tuned_model(regime_kind, gamma, a_c=1.0, frak_a1=0.0, frak_a3=0.0,
                      profile_id="poly_ring", mother=None):
    """Torus + kernel + tuned parameters for one (regime, gamma) in one call."""
    regime = Regime(regime_kind)
    torus = Torus(regime.torus_n(gamma))
    if mother is None:
        mother = build_mother_kernel(profile_id)
    kernel = build_kac_kernel(gamma, torus, mother)
    if regime.kind == "phi4":
        beta_c = critical_beta(a_c)
        c_gamma, _ = renormalization_constant(kernel, regime, beta_c)
        params = tune_phi4(gamma, a_c, frak_a1, c_gamma, regime)
    else:
        c_gamma, _ = renormalization_constant(kernel, regime, critical_beta(0.25))
        params = tune_phi6(gamma, frak_a1, frak_a3, c_gamma, regime)
    return torus, kernel, params
