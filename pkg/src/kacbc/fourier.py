"""Fourier conventions for fields on the torus [-1,1)^2 sampled on an odd grid.

All grids are (side, side) with side = 2N+1 odd, spacing eps = 2/side, and
physical points x = eps*k for k in {-N..N}^2.  Plane waves are e^{i pi w.x}
with integer frequencies w in {-N..N}^2, so the Laplacian acts per mode as
-pi^2|w|^2.

Coefficients are stored in the orthonormal basis e_w(x) = (1/2) e^{i pi w.x}
(the torus has area 4):

    coeff(w) = (eps^2/2) * sum_y f(y) e^{-i pi w.y}
    f(x)     = (1/2)     * sum_w coeff(w) e^{i pi w.x}

With this choice Parseval reads sum_y eps^2 |f(y)|^2 = sum_w |coeff(w)|^2,
and the complex mode variance of the stochastic heat equation driven by
sqrt(2/beta) space-time white noise is exactly
(2/beta)(1 - e^{-2 pi^2 |w|^2 t})/(2 pi^2 |w|^2).

Convolution kernels are a separate concept: the transfer function of a
kernel field g under the discrete convolution (f *_eps g)(x) =
sum_z eps^2 f(x-z) g(z) is ghat(w) = sum_y eps^2 g(y) e^{-i pi w.y}, i.e.
twice the orthonormal coefficient.  For the microscopic kernel kappa this
reduces to the plain DFT of kappa, normalized so ghat(0) = sum kappa.

Arrays use the numpy FFT layout (frequency index 0 first); `to_centered` /
`from_centered` convert to the row-major {-N..N}^2 layout used on disk.
"""

import numpy as np


def freq_axis(side):
    """Integer frequencies in numpy FFT order: 0, 1, .., N, -N, .., -1."""
    n = (side - 1) // 2
    return np.concatenate([np.arange(0, n + 1), np.arange(-n, 0)])


def freq_grids(side):
    """(w1, w2) integer frequency grids in FFT layout, each (side, side)."""
    w = freq_axis(side)
    return np.meshgrid(w, w, indexing="ij")


def freq_sq(side):
    """|w|^2 grid in FFT layout."""
    w1, w2 = freq_grids(side)
    return (w1 * w1 + w2 * w2).astype(np.float64)


def grid_to_coeff(field):
    """Orthonormal-basis Fourier coefficients of a grid field (FFT layout)."""
    side = field.shape[0]
    return np.fft.fft2(field) * (2.0 / (side * side))


def coeff_to_grid(coeff):
    """Inverse of grid_to_coeff; returns a complex array (take .real for real fields)."""
    side = coeff.shape[0]
    return np.fft.ifft2(coeff) * (side * side / 2.0)


def transfer_of_kernel(kernel_micro):
    """Transfer function of a microscopic convolution kernel (sums to its mass at w=0)."""
    return np.fft.fft2(kernel_micro)


def to_centered(a):
    """FFT layout -> row-major over w in {-N..N}^2 (w1 = row index - N)."""
    return np.fft.fftshift(a)


def from_centered(a):
    """Inverse of to_centered."""
    return np.fft.ifftshift(a)


def mode(coeff, w1, w2):
    """Extract coefficient of mode (w1, w2) from an FFT-layout array."""
    side = coeff.shape[0]
    return coeff[w1 % side, w2 % side]


def enforce_conjugate_symmetry(coeff):
    """Project onto the conjugate-symmetric subspace (real fields)."""
    side = coeff.shape[0]
    flipped = np.conj(coeff[(-np.arange(side)) % side][:, (-np.arange(side)) % side])
    return 0.5 * (coeff + flipped)


def grid_points(side):
    """Physical coordinates x = eps*k, k in {-N..N}, as a 1D axis array."""
    n = (side - 1) // 2
    eps = 2.0 / side
    return eps * np.arange(-n, n + 1)


def evaluate_modes_at(coeff, points):
    """Evaluate the trigonometric polynomial at arbitrary points ((M,2) array).

    Direct summation over all modes; meant for off-grid evaluation in tests
    and observables, not for bulk work.
    """
    side = coeff.shape[0]
    w = freq_axis(side)
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    ph1 = np.exp(1j * np.pi * np.outer(points[:, 0], w))
    ph2 = np.exp(1j * np.pi * np.outer(points[:, 1], w))
    # f(x) = (1/2) sum_{w1,w2} c[w1,w2] ph1[x,w1] ph2[x,w2]
    return 0.5 * np.einsum("ij,jk,ik->i", ph1, coeff, ph2)
