"""Discrete torus, Kac interaction kernel, FFT convolution and kernel estimates.

The microscopic lattice is Z^2/(2N+1)Z^2.  The interaction kernel is built
from a rotation-invariant C^2 mother profile with unit mass and second
moment 4, sampled at spacing gamma and normalized to total mass one with a
zero at the origin (no self-interaction).  The frequency-side objects
(transfer function, heat semigroup, appendix-style estimates) all live on
integer frequencies {-N..N}^2; see `fourier` for conventions.

Two exponent conventions coexist and are stored explicitly per regime:
`b_freq` (1 or 2) sets the frequency scale |w| <= gamma^{-b_freq} at which
the transfer function behaves like 1 - pi^2 gamma^{2 b_freq} |w|^2, while
`b_time` = 2*b_freq (2 or 4) sets the time scale of the semigroup factor
exp(t gamma^{-b_time} (khat - 1)).
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .fourier import freq_axis, freq_sq, transfer_of_kernel

SUPPORT_RADIUS = 3.0  # mother profile must vanish outside this ball


@dataclass(frozen=True)
class Torus:
    """Discrete torus of side 2N+1 identified with the macroscopic grid step eps."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("torus half-width N must be >= 1")

    @property
    def side(self):
        return 2 * self.n + 1

    @property
    def eps(self):
        return 2.0 / self.side

    @property
    def n_sites(self):
        return self.side * self.side


# ---------------------------------------------------------------------------
# Mother profile
# ---------------------------------------------------------------------------

def _bump(u2, sharpness):
    """exp(-s/(1-u^2)) on u^2<1, extended by 0; C-infinity and compactly supported."""
    out = np.zeros_like(u2)
    inside = u2 < 1.0
    out[inside] = np.exp(-sharpness / (1.0 - u2[inside]))
    return out

def _poly_ring(u2, q, p):
    """u^{2q} (1-u^2)^p on the unit disk: C^{p-1} across the edge."""
    u2 = np.asarray(u2, dtype=np.float64)
    return np.where(u2 < 1.0, u2**q * np.clip(1.0 - u2, 0.0, None) ** p, 0.0)

# Registered radial profiles on the unit disk (before moment-matching rescale).
# Matching mass 1 and second moment 4 inside the radius-3 ball requires a
# root-mean-square radius of at least 2/3 of the support radius.  The default
# is the polynomial ring u^8 (1-u^2)^4 (rms ratio 1/sqrt(2), C^3 across the
# edge, so the fixed 256^2 tensor quadrature resolves both moments to well
# below 1e-8).  The near-uniform exponential bump also satisfies the ratio
# but its steep edge costs quadrature accuracy; the classic sharpness-1 bump
# concentrates too much mass near the center (rms ratio 0.51) and is kept
# only to exercise the rejection path.
PROFILES = {
    "poly_ring": lambda u2: _poly_ring(u2, 4, 4),
    "poly_ring_c2": lambda u2: _poly_ring(u2, 3, 3),
    "flat_bump": lambda u2: _bump(u2, 0.02),
    "classic_bump": lambda u2: _bump(u2, 1.0),
}


@dataclass(frozen=True)
class MotherKernel:
    """Moment-matched rotation-invariant profile: K(x) = c1 * phi((c2*|x|)^2)."""

    profile_id: str
    c1: float
    c2: float
    support: float  # = 1/c2, radius outside which the profile vanishes
    mass: float
    second_moment: float

    def __call__(self, x):
        """Evaluate at points of shape (..., 2)."""
        x = np.asarray(x, dtype=np.float64)
        r2 = np.sum(x * x, axis=-1)
        return self.radial_sq(r2)

    def radial_sq(self, r2):
        """Evaluate as a function of |x|^2."""
        u2 = np.asarray(r2, dtype=np.float64) * (self.c2 * self.c2)
        return self.c1 * PROFILES[self.profile_id](u2)


def _tensor_gauss(npts, radius):
    """Tensor Gauss-Legendre nodes/weights on [-radius, radius]^2."""
    x, w = leggauss(npts)
    x = x * radius
    w = w * radius
    xx, yy = np.meshgrid(x, x, indexing="ij")
    ww = np.outer(w, w)
    return xx, yy, ww


def _moments(profile, c1, c2, quad):
    xx, yy, ww = quad
    r2 = xx * xx + yy * yy
    vals = c1 * profile(r2 * (c2 * c2))
    m0 = float(np.sum(ww * vals))
    m2 = float(np.sum(ww * vals * r2))
    return m0, m2


def build_mother_kernel(profile_id="poly_ring", quad_points=256, tol=1e-10):
    """Moment-match a registered profile to mass 1 and second moment 4.

    Newton iteration in (c1, c2) on the two moment constraints, with tensor
    Gauss-Legendre quadrature; raises if the matched profile fails either
    constraint or spills outside the radius-3 ball.
    """
    if profile_id not in PROFILES:
        raise ValueError(f"unknown mother-kernel profile {profile_id!r}")
    profile = PROFILES[profile_id]
    quad = _tensor_gauss(quad_points, SUPPORT_RADIUS)

    # Closed-form seed from the two base-profile moments:
    #   mass = c1/c2^2 * I0,  second moment = c1/c2^4 * I2
    xx, yy, ww = _tensor_gauss(quad_points, 1.0)
    r2 = xx * xx + yy * yy
    base = profile(r2)
    i0 = float(np.sum(ww * base))
    i2 = float(np.sum(ww * base * r2))
    c2 = np.sqrt(i2 / (4.0 * i0))
    c1 = c2 * c2 / i0

    if 1.0 / c2 > SUPPORT_RADIUS:
        raise ValueError(
            f"profile {profile_id!r}: moment matching needs support radius "
            f"{1.0 / c2:.3f} > {SUPPORT_RADIUS}; profile rejected"
        )

    for _ in range(50):
        m0, m2 = _moments(profile, c1, c2, quad)
        f = np.array([m0 - 1.0, m2 - 4.0])
        if np.max(np.abs(f)) < tol:
            break
        # Analytic-in-c1 column; c2 column by central difference.
        dc2 = 1e-6 * c2
        m0p, m2p = _moments(profile, c1, c2 + dc2, quad)
        m0m, m2m = _moments(profile, c1, c2 - dc2, quad)
        jac = np.array(
            [
                [m0 / c1, (m0p - m0m) / (2 * dc2)],
                [m2 / c1, (m2p - m2m) / (2 * dc2)],
            ]
        )
        step = np.linalg.solve(jac, f)
        c1, c2 = c1 - step[0], c2 - step[1]
    else:
        raise ValueError(f"profile {profile_id!r}: moment matching did not converge")

    m0, m2 = _moments(profile, c1, c2, quad)
    if abs(m0 - 1.0) > 1e-8 or abs(m2 - 4.0) > 1e-8:
        raise ValueError(
            f"profile {profile_id!r}: quadrature residuals mass={m0 - 1:.2e} "
            f"second={m2 - 4:.2e} exceed 1e-8; profile rejected"
        )
    return MotherKernel(profile_id, float(c1), float(c2), 1.0 / float(c2), m0, m2)


# ---------------------------------------------------------------------------
# Kac kernel on the torus
# ---------------------------------------------------------------------------

@dataclass
class KacKernel:
    """Normalized interaction kernel kappa on the torus, with transfer function.

    `values` is in FFT layout: values[i, j] = kappa(k) for the centered offset
    k = (signed(i), signed(j)).  `khat` is its (real) transfer function on
    integer frequencies, khat[0,0] = 1.
    """

    torus: Torus
    gamma: float
    values: np.ndarray
    khat: np.ndarray
    profile_id: str = "custom"
    raw_sum: float = float("nan")  # sum gamma^2 K(gamma k) before normalization

    @property
    def support_offsets(self):
        """Centered offsets (dy, dx) with nonzero kappa, row-major by dy."""
        side = self.torus.side
        sig = freq_axis(side)
        iy, ix = np.nonzero(self.values)
        return np.stack([sig[iy], sig[ix]], axis=1)


def build_kac_kernel(gamma, torus, mother=None, strict=True):
    """Sample and normalize the mother profile at spacing gamma on the torus.

    strict=True enforces 0 < gamma < 1/3 and that the support radius 3/gamma
    fits within the torus half-width N (no wrap past half the torus).
    """
    if strict:
        if not (0.0 < gamma < 1.0 / 3.0):
            raise ValueError(f"gamma={gamma} outside (0, 1/3)")
        if SUPPORT_RADIUS / gamma > torus.n:
            raise ValueError(
                f"kernel support radius {SUPPORT_RADIUS / gamma:.1f} exceeds torus "
                f"half-width N={torus.n}"
            )
    if mother is None:
        mother = build_mother_kernel()
    side = torus.side
    sig = freq_axis(side).astype(np.float64)
    ky, kx = np.meshgrid(sig, sig, indexing="ij")
    r2 = (gamma * ky) ** 2 + (gamma * kx) ** 2
    vals = gamma * gamma * mother.radial_sq(r2)
    vals[0, 0] = 0.0
    raw = float(vals.sum())
    if raw <= 0.0:
        raise ValueError("kernel has no support on this torus")
    vals /= raw
    khat = transfer_of_kernel(vals)
    resid = float(np.max(np.abs(khat.imag)))
    if resid > 1e-12:
        raise ValueError(f"kernel transfer function not real: imag residue {resid:.2e}")
    return KacKernel(torus, gamma, vals, khat.real, mother.profile_id, raw)


def kernel_from_values(torus, values, gamma=float("nan")):
    """Build a KacKernel from raw nonnegative values (normalized, center zeroed).

    Unvalidated constructor for tests and synthetic kernels on small toruses
    where the gamma-range preconditions cannot hold.
    """
    vals = np.array(values, dtype=np.float64)
    vals[0, 0] = 0.0
    vals /= vals.sum()
    khat = transfer_of_kernel(vals)
    if np.max(np.abs(khat.imag)) < 1e-12:  # even kernels have a real transfer
        khat = khat.real
    return KacKernel(torus, gamma, vals, khat)


def convolve(field, kernel):
    """Cyclic convolution kappa * field over the torus, via FFT."""
    field = np.asarray(field, dtype=np.float64)
    if field.shape != kernel.values.shape:
        raise ValueError(f"field shape {field.shape} != kernel shape {kernel.values.shape}")
    return np.real(np.fft.ifft2(np.fft.fft2(field) * kernel.khat))


def convolve_direct(field, kernel):
    """O(n^2) reference convolution (oracle for the FFT path)."""
    side = kernel.torus.side
    out = np.zeros_like(field, dtype=np.float64)
    vals = kernel.values
    for dy in range(side):
        for dx in range(side):
            w = vals[dy, dx]
            if w != 0.0:
                out += w * np.roll(np.roll(field, dy, axis=0), dx, axis=1)
    return out


# ---------------------------------------------------------------------------
# Heat semigroup in Fourier space
# ---------------------------------------------------------------------------

@dataclass
class SemigroupKernel:
    """Fourier multiplier exp(t gamma^{-b_time} (khat - 1)) of the lattice heat flow."""

    kernel: KacKernel
    b_time: int

    def factor(self, t):
        if t < 0:
            raise ValueError("semigroup time must be >= 0")
        gam = self.kernel.gamma
        return np.exp(t * gam ** (-self.b_time) * (self.kernel.khat - 1.0))


def semigroup_apply(fourier, t, semi):
    """Apply the semigroup multiplier to a Fourier-layout array; exact in t."""
    return fourier * semi.factor(t)


# ---------------------------------------------------------------------------
# Appendix-style kernel estimates (numerical verification)
# ---------------------------------------------------------------------------

def _weighted_transfer(kernel, weight):
    """Transfer function of kappa(k)*weight(k) for a centered weight grid."""
    out = np.fft.fft2(kernel.values * weight)
    return out


def verify_kernel_estimates(kernel, b_freq, t_grid=(0.05, 0.2, 1.0)):
    """Fitted constants for the transfer-function and semigroup estimates.

    Returns a dict of suprema of the natural ratios: quadratic approximation
    of 1-khat and its first two derivatives below the frequency scale
    gamma^{-b_freq}, high-frequency decay above it, the uniform lower bound
    on 1-khat, and the on-diagonal semigroup bound sup_x |P_t * K(x)|.
    Pure diagnostic; nothing is asserted here.
    """
    gam = kernel.gamma
    side = kernel.torus.side
    eps = kernel.torus.eps
    khat = kernel.khat
    sig = freq_axis(side).astype(np.float64)
    ky, kx = np.meshgrid(sig, sig, indexing="ij")
    absw = np.sqrt(freq_sq(side))
    gb = gam**b_freq

    # d/dw_j khat and d^2/dw_j^2 khat as weighted transforms (j = first axis)
    d1 = _weighted_transfer(kernel, -1j * np.pi * eps * ky).real
    d2 = _weighted_transfer(kernel, -((np.pi * eps * ky) ** 2)).real

    low = (absw <= gb ** (-1.0)) & (absw > 0)
    hi = absw > 0
    report = {
        "gamma": gam,
        "b_freq": b_freq,
        "quadratic_ratio": float(
            np.max(np.abs(gb ** (-2.0) * (1.0 - khat[low]) - np.pi**2 * absw[low] ** 2)
                   / (gb * absw[low] ** 3))
        ),
        "grad_ratio": float(
            np.max(np.abs(-gb ** (-2.0) * d1[low] - 2 * np.pi**2 * ky[low])
                   / (gb * absw[low] ** 2))
        ),
        "hess_ratio": float(
            np.max(np.abs(-gb ** (-2.0) * d2[low] - 2 * np.pi**2) / (gb * absw[low]))
        ),
        "decay_khat": float(np.max((gb * absw[hi]) ** 2 * np.abs(khat[hi]))),
        "decay_grad": float(np.max((gb * absw[hi]) ** 2 * np.abs(d1[hi]) / gb)),
        "decay_hess": float(np.max((gb * absw[hi]) ** 2 * np.abs(d2[hi]) / gb**2)),
        "gap_lower_bound": float(
            np.min((1.0 - khat[hi]) / np.minimum((gb * absw[hi]) ** 2, 1.0))
        ),
        "bound_khat_leq_1": float(np.max(np.abs(khat))),
        "raw_sum": kernel.raw_sum,
    }

    # sup_x |P_t * K(x)| against min(t^{-1} log^2, gamma^{-2b} log); semigroup
    # time scale is b_time = 2*b_freq.
    semi = SemigroupKernel(kernel, 2 * b_freq)
    log_inv = np.log(1.0 / gam)
    heat = {}
    for t in t_grid:
        # P_t * K has transfer exp(...)*khat; grid values via inverse transform
        pk = np.fft.ifft2(semi.factor(t) * khat).real * (side * side) / 4.0
        supval = float(np.max(np.abs(pk)))
        bound = min(log_inv**2 / t, gb ** (-2.0) * log_inv)
        heat[t] = {"sup": supval, "bound_shape": bound, "constant": supval / bound}
    report["heat_kernel"] = heat
    return report
