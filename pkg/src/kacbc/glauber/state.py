"""Spin state, initial conditions and the kernel stencil layout."""

import numpy as np

from ..fourier import freq_axis, grid_to_coeff
from ..lattice import convolve
from .rates import ptilde


def build_stencil(kernel):
    """Flatten the kernel support into contiguous rows for the update loop.

    Returns (row_dy, row_x0, row_len, row_koff, kvals): for each row at
    vertical offset dy, the kernel values over the horizontal interval
    [x0, x0+len) in a single flat array.  The center entry kappa(0)=0 is
    kept so rows stay contiguous.
    """
    side = kernel.torus.side
    sig = freq_axis(side)
    centered = np.fft.fftshift(kernel.values)  # index i -> offset i-N
    n = kernel.torus.n
    row_dy, row_x0, row_len, row_koff, kv = [], [], [], [], []
    off = 0
    for iy in range(side):
        row = centered[iy]
        nz = np.nonzero(row)[0]
        if nz.size == 0:
            continue
        lo, hi = nz[0], nz[-1]
        dy = iy - n
        vals = row[lo:hi + 1]
        row_dy.append(dy)
        row_x0.append(lo - n)
        row_len.append(hi - lo + 1)
        row_koff.append(off)
        kv.append(vals)
        off += hi - lo + 1
    return (
        np.array(row_dy, dtype=np.int64),
        np.array(row_x0, dtype=np.int64),
        np.array(row_len, dtype=np.int64),
        np.array(row_koff, dtype=np.int64),
        np.concatenate(kv).astype(np.float64),
    )


def initial_spins(kind, torus, gen, theta_c=None, probs=None, profile=None,
                  delta=None):
    """Draw the initial configuration; consumes the stream only when random.

    kind: 'zero' | 'ptilde' | 'probs' | 'profile'.  'profile' samples iid
    spins whose mean is delta * profile(x) at each grid point.
    """
    n_sites = torus.n_sites
    if kind == "zero":
        return np.zeros(n_sites, dtype=np.int8)
    if kind == "ptilde":
        pm, pz, _ = ptilde(theta_c)
        u = gen.random(n_sites)
        return (np.where(u < pm, -1, np.where(u < pm + pz, 0, 1))).astype(np.int8)
    if kind == "probs":
        pm, pz, pp = probs
        if abs(pm + pz + pp - 1.0) > 1e-12:
            raise ValueError("initial spin probabilities must sum to 1")
        u = gen.random(n_sites)
        return (np.where(u < pm, -1, np.where(u < pm + pz, 0, 1))).astype(np.int8)
    if kind == "profile":
        sig = freq_axis(torus.side).astype(np.float64) * torus.eps
        xx, yy = np.meshgrid(sig, sig, indexing="ij")
        mean = np.clip(delta * profile(xx, yy), -1.0, 1.0).reshape(-1)
        pp = np.maximum(mean, 0.0)
        pm = np.maximum(-mean, 0.0)
        u = gen.random(n_sites)
        return (np.where(u < pm, -1, np.where(u < 1.0 - pp, 0, 1))).astype(np.int8)
    raise ValueError(f"unknown initial condition {kind!r}")


class SpinConfiguration:
    """Microscopic state: spins, cached local field, clocks and counters."""

    def __init__(self, torus, kernel, spins):
        self.torus = torus
        self.kernel = kernel
        self.spins = np.ascontiguousarray(spins, dtype=np.int8)
        self.h = convolve(self.spins.reshape(torus.side, torus.side)
                          .astype(np.float64), kernel).reshape(-1)
        self.h = np.ascontiguousarray(self.h)

    def recomputed_field(self):
        side = self.torus.side
        return convolve(self.spins.reshape(side, side).astype(np.float64),
                        self.kernel).reshape(-1)

    def field_drift(self):
        """Max abs deviation of the cached field from a full recomputation."""
        return float(np.max(np.abs(self.h - self.recomputed_field())))

    def x_coeff(self, delta):
        """Fourier coefficients of the rescaled field delta^{-1} h."""
        side = self.torus.side
        return grid_to_coeff(self.h.reshape(side, side)) / delta
