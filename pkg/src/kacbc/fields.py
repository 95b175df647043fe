"""Rescaled-field snapshots: trigonometric extension, dyadic decomposition,
negative-regularity norm estimation, high/low splitting and Wick powers.

A FieldSnapshot stores the orthonormal Fourier coefficients of the unique
trigonometric polynomial of degree <= N agreeing with the grid field (see
`fourier`).  Everything here is a pure transform of immutable snapshots.
"""

import math
from dataclasses import dataclass

import numpy as np

from .fourier import (coeff_to_grid, evaluate_modes_at, freq_sq, grid_to_coeff,
                      to_centered, from_centered)
from .hermite import hermite_value


@dataclass
class FieldSnapshot:
    fourier: np.ndarray          # FFT layout, complex, (side, side)
    macro_time: float = 0.0
    gamma: float = float("nan")
    regime: str = ""
    delta: float = float("nan")

    @property
    def side(self):
        return self.fourier.shape[0]

    @property
    def n(self):
        return (self.side - 1) // 2

    @property
    def eps(self):
        return 2.0 / self.side

    @classmethod
    def from_grid(cls, grid, **kw):
        return cls(grid_to_coeff(np.asarray(grid, dtype=np.float64)), **kw)

    def grid(self):
        return coeff_to_grid(self.fourier).real

    def conjugate_defect(self):
        """Max deviation from the conjugate symmetry of a real field."""
        side = self.side
        idx = (-np.arange(side)) % side
        return float(np.max(np.abs(self.fourier - np.conj(self.fourier[idx][:, idx]))))

    def mode(self, w1, w2):
        return self.fourier[w1 % self.side, w2 % self.side]


def rescale_field(state, params, micro_time=None):
    """Snapshot of the rescaled field delta^{-1} h at the current clock."""
    side = state.torus.side
    delta = params.regime.delta(params.gamma)
    if micro_time is None:
        micro_time = 0.0
    return FieldSnapshot(
        grid_to_coeff(state.h.reshape(side, side)) / delta,
        macro_time=params.regime.alpha(params.gamma) * micro_time,
        gamma=params.gamma, regime=params.regime.kind, delta=delta)


def extend_to_torus(snapshot, points):
    """Evaluate the degree-<=N trigonometric extension at arbitrary points."""
    vals = evaluate_modes_at(snapshot.fourier, points)
    return vals.real if vals.shape != () else float(vals.real)


# ---------------------------------------------------------------------------
# Dyadic (Littlewood-Paley style) decomposition
# ---------------------------------------------------------------------------

def _smoothstep(x):
    """C-infinity monotone step: 0 for x<=0, 1 for x>=1."""
    x = np.clip(x, 0.0, 1.0)
    def f(t):
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-1.0 / t[pos])
        return out
    a = f(x)
    b = f(1.0 - x)
    return a / (a + b)


def _rho(r):
    """Smooth radial cutoff: 1 on [0,1], 0 on [2,inf)."""
    return 1.0 - _smoothstep(np.asarray(r, dtype=np.float64) - 1.0)


def dyadic_multipliers(side, k_max=None):
    """Partition of unity on the lattice frequencies: blocks k = -1, 0, 1, ...

    Block -1 is rho(|w|); block k >= 0 is rho(|w|/2^{k+1}) - rho(|w|/2^k),
    supported in the annulus [2^k, 2^{k+2}].  The blocks telescope exactly
    to 1 on every mode present, so any grouping of blocks is an exact
    splitting.  At most two consecutive blocks overlap.
    """
    absw = np.sqrt(freq_sq(side))
    top = absw.max()
    if k_max is None:
        k_max = max(0, int(math.ceil(math.log2(max(top, 1.0)))))
    mults = [(-1, _rho(absw))]
    for k in range(0, k_max + 1):
        mults.append((k, _rho(absw / 2.0 ** (k + 1)) - _rho(absw / 2.0**k)))
    return mults


@dataclass
class BesovEstimate:
    nu: float
    block_norms: list            # (k, 2^{-nu k} * sup-norm of block k)
    value: float
    overlap_constant: int = 2    # consecutive blocks overlapping at any mode


def _block_sup(coeff, oversample=4):
    """Sup norm of a trigonometric polynomial on an oversampled grid."""
    side = coeff.shape[0]
    m = oversample * side
    big = np.zeros((m, m), dtype=np.complex128)
    cen = to_centered(coeff)
    n = (side - 1) // 2
    lo = m // 2 - n
    big[lo:lo + side, lo:lo + side] = cen
    grid = np.fft.ifft2(from_centered(big)) * (m * m / 2.0)
    return float(np.max(np.abs(grid.real)))


def besov_norm(snapshot, nu, oversample=4):
    """Estimate of the regularity -nu Besov sup-norm: max_k 2^{-nu k}||d_k f||_inf."""
    if nu <= 0:
        raise ValueError("nu must be positive (negative-regularity estimate)")
    mults = dyadic_multipliers(snapshot.side)
    norms = []
    for k, m in mults:
        masked = snapshot.fourier * m
        if not np.any(m):
            continue
        norms.append((k, 2.0 ** (-nu * k) * _block_sup(masked, oversample)))
    value = max(v for _, v in norms) if norms else 0.0
    return BesovEstimate(nu, norms, value)


def split_high_low(snapshot, threshold_divisor=20.0):
    """Split into blocks 2^k < N/threshold and the rest; exact partition."""
    n = snapshot.n
    mults = dyadic_multipliers(snapshot.side)
    low = np.zeros_like(snapshot.fourier)
    high = np.zeros_like(snapshot.fourier)
    for k, m in mults:
        part = snapshot.fourier * m
        if k < 0 or 2.0**k < n / threshold_divisor:
            low += part
        else:
            high += part
    mk = dict(macro_time=snapshot.macro_time, gamma=snapshot.gamma,
              regime=snapshot.regime, delta=snapshot.delta)
    return FieldSnapshot(low, **mk), FieldSnapshot(high, **mk)


# ---------------------------------------------------------------------------
# Wick powers
# ---------------------------------------------------------------------------

@dataclass
class WickPowerSet:
    base: FieldSnapshot
    powers: dict                 # m -> FieldSnapshot, coefficients truncated to N
    truncation_energy: dict      # m -> discarded squared coefficient mass


def wick_powers(snapshot, bracket, m_max):
    """Renormalized powers H_m(Z(x), c(x)) for m <= m_max (<= 5).

    bracket: scalar or grid array of the variance-type constant c.  Powers
    are evaluated pointwise on a grid fine enough that the retained modes
    |w| <= N carry no aliasing; the discarded high-degree energy is recorded.
    """
    if m_max > 5:
        raise ValueError("orders above 5 are not used")
    side = snapshot.side
    n = snapshot.n
    out, energy = {}, {}
    c = bracket if np.isscalar(bracket) else np.asarray(bracket, dtype=np.float64)
    for m in range(1, m_max + 1):
        factor = m + 1
        big = factor * side
        cen = to_centered(snapshot.fourier)
        lo = big // 2 - n
        pad = np.zeros((big, big), dtype=np.complex128)
        pad[lo:lo + side, lo:lo + side] = cen
        zgrid = np.fft.ifft2(from_centered(pad)).real * (big * big / 2.0)
        if np.isscalar(c):
            cfine = c
        else:
            cpad = np.zeros((big, big), dtype=np.complex128)
            cc = to_centered(grid_to_coeff(c))
            cpad[lo:lo + side, lo:lo + side] = cc
            cfine = np.fft.ifft2(from_centered(cpad)).real * (big * big / 2.0)
        hgrid = hermite_value(zgrid, cfine, m)
        chat = np.fft.fft2(hgrid) * (2.0 / (big * big))
        ccen = to_centered(chat)
        kept = ccen[lo:lo + side, lo:lo + side]
        total = float(np.sum(np.abs(ccen) ** 2))
        kept_en = float(np.sum(np.abs(kept) ** 2))
        energy[m] = max(total - kept_en, 0.0)
        out[m] = FieldSnapshot(from_centered(kept), macro_time=snapshot.macro_time,
                               gamma=snapshot.gamma, regime=snapshot.regime,
                               delta=snapshot.delta)
    return WickPowerSet(snapshot, out, energy)


# ---------------------------------------------------------------------------
# Iterated stochastic integrals of a scalar jump-plus-drift path
# ---------------------------------------------------------------------------

def iterated_integral_path(events, m_max, drift_slope=0.0, t_end=None):
    """Iterated integrals I_m(s) = m int I_{m-1}(r-) dR(r) of a scalar path.

    events: sequence of (time, jump) pairs in increasing time; between jumps
    the path moves at the continuous (finite-variation) rate drift_slope.
    Jump contributions use left limits; continuous segments use the exact
    trapezoid of the polynomial integrand.  Returns {1: R, 2: I_2, ...} at
    the last event (or at t_end).  Reference implementation; the live
    simulation tracker reproduces this arithmetic per probe.
    """
    i = [0.0] * 6                # i[m] = I_m, with i[1] the path itself
    t_cur = 0.0

    def advance(dt):
        if dt <= 0.0 or drift_slope == 0.0:
            i[1] += drift_slope * max(dt, 0.0)
            return
        dc = drift_slope * dt
        r0 = i[1]
        r1 = r0 + dc
        i2 = i[2] + (r0 + r1) * dc
        i3 = i[3] + 1.5 * (i[2] + i2) * dc
        i4 = i[4] + 2.0 * (i[3] + i3) * dc
        i[5] = i[5] + 2.5 * (i[4] + i4) * dc
        i[1], i[2], i[3], i[4] = r1, i2, i3, i4

    for t, jump in events:
        advance(t - t_cur)
        t_cur = t
        for m in range(5, 1, -1):        # left limits: update top-down
            i[m] += m * i[m - 1] * jump
        i[1] += jump
    if t_end is not None:
        advance(t_end - t_cur)
    return {m: i[m] for m in range(1, m_max + 1)}
