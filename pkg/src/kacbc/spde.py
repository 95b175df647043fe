"""Spectral solver for the renormalized quartic/sextic stochastic equations.

The field splits as X = Z + P_t X0 + v: Z is the stochastic convolution,
advanced exactly per mode (Ornstein-Uhlenbeck update with the exact
increment variance); v solves the remainder equation with Wick-power
coefficients and zero initial data, integrated by exponential Euler with
pseudo-spectral products on a dealiased grid.

Noise lives on the modes 0 < |w| < mode_cutoff (strict Euclidean ball), so
the variance E[Z(t,x)^2] equals the explicit mode sum

    c(t) = t/(2 beta) + (1/beta) sum_{0<|w|<cutoff} (1-e^{-2 t pi^2|w|^2})/(4 pi^2 |w|^2)

used as the time-dependent renormalization.  The time-dependent
coefficients compensate so that sum_k a_{2k-1}(t) H_{2k-1}(x, c(t)) stays
the fixed polynomial drift.
"""

import math
from dataclasses import dataclass

import numpy as np

from .fourier import from_centered
from .fields import FieldSnapshot
from .hermite import hermite_value

PHI6_QUINTIC = -9.0 / 20.0


class SpdeBlowup(RuntimeError):
    pass


def _centered_freqs(cutoff):
    w = np.arange(-cutoff, cutoff + 1)
    w1, w2 = np.meshgrid(w, w, indexing="ij")
    return w1, w2


@dataclass
class SpdeConfig:
    n: int                       # 2 (quartic) or 3 (sextic)
    beta_c: float
    a1: float = 0.0
    a3: float = 0.0              # sextic only; for n=2 the cubic coefficient
    a5: float = float("nan")     # fixed to -9/20 for n=3
    mode_cutoff: int = 32
    dt: float = 1e-3
    t_end: float = 1.0
    noise_scale: float = 1.0
    renormalize: bool = True
    schedule_mode: str = "limit"     # 'limit' | 'finite' | 'frozen'
    blowup_bound: float = 1e6
    bar_c_cutoff: int = 512

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValueError("n must be 2 or 3")
        if self.n == 3:
            self.a5 = PHI6_QUINTIC
        if self.leading_coefficient() >= 0:
            raise ValueError("leading coefficient must be negative for global existence")
        if self.mode_cutoff < 2:
            raise ValueError("mode_cutoff must be >= 2")

    def leading_coefficient(self):
        return self.a3 if self.n == 2 else self.a5

    def odd_coefficients(self):
        """(a1, a3[, a5]) of the drift polynomial."""
        if self.n == 2:
            return np.array([self.a1, self.a3])
        return np.array([self.a1, self.a3, self.a5])


class RenormalizationSchedule:
    """Mode sums c, c(t), their limit difference, and the drifting odd
    coefficients that keep the renormalized drift polynomial fixed."""

    def __init__(self, config):
        self.config = config
        self.beta_c = config.beta_c
        cutoff = config.mode_cutoff
        w1, w2 = _centered_freqs(cutoff)
        wsq = (w1 * w1 + w2 * w2).astype(np.float64)
        ball = (wsq > 0) & (wsq < cutoff * cutoff)
        self._wsq_ball = wsq[ball]
        self.c_eps = float(np.sum(1.0 / (4.0 * np.pi**2 * self._wsq_ball))) / self.beta_c

        # lattice radii for the limit series, grouped by |w|^2
        m = config.bar_c_cutoff
        w = np.arange(-m, m + 1)
        sq = (w[:, None] ** 2 + w[None, :] ** 2).reshape(-1)
        sq = sq[(sq > 0) & (sq <= m * m)]
        self._r2, self._r2_count = np.unique(sq, return_counts=True)

    def c_eps_of_t(self, t):
        """E[Z(t,x)^2] at the solver's cutoff (exact mode sum)."""
        if not self.config.renormalize:
            return 0.0
        ws = self._wsq_ball
        s = np.sum((1.0 - np.exp(-2.0 * t * np.pi**2 * ws)) / (4.0 * np.pi**2 * ws))
        return t / (2.0 * self.beta_c) + float(s) / self.beta_c

    def bar_c(self, t):
        """Cutoff-free limit of c(t) - c, with the recorded series tail."""
        if t <= 0:
            raise ValueError("bar_c diverges at t=0")
        e = np.exp(-2.0 * t * np.pi**2 * self._r2)
        series = float(np.sum(self._r2_count * e / (4.0 * self.beta_c * np.pi**2 * self._r2)))
        return t / (2.0 * self.beta_c) - series

    def bar_c_tail_bound(self, t):
        m = self.config.bar_c_cutoff
        x = 2.0 * t * np.pi**2 * m * m
        return math.exp(-x) / (4.0 * self.beta_c * np.pi**2 * m * m) * (2 * np.pi * m) ** 2

    def coefficients_at(self, t):
        """Odd coefficients (a1(t), a3(t)[, a5]) entering the remainder equation."""
        cfg = self.config
        if cfg.schedule_mode == "frozen" or not cfg.renormalize:
            return cfg.odd_coefficients()
        if cfg.schedule_mode == "limit":
            bc = self.bar_c(t) if t > 0 else self.bar_c(min(cfg.dt, 1e-6))
        elif cfg.schedule_mode == "finite":
            bc = self.c_eps_of_t(t) - self.c_eps
        else:
            raise ValueError(f"unknown schedule mode {cfg.schedule_mode!r}")
        if cfg.n == 2:
            return np.array([cfg.a1 + 3.0 * cfg.a3 * bc, cfg.a3])
        a3t = cfg.a3 - 4.5 * bc
        a1t = cfg.a1 + 3.0 * cfg.a3 * bc - 6.75 * bc * bc
        return np.array([a1t, a3t, cfg.a5])

    def wick_constant(self, t):
        return self.c_eps_of_t(t) if self.config.renormalize else 0.0


class SpdeSolver:
    """One trajectory of the renormalized equation at fixed cutoff."""

    def __init__(self, config, seed=0, x0_coeff=None):
        self.config = config
        self.schedule = RenormalizationSchedule(config)
        cutoff = config.mode_cutoff
        self.side = 2 * cutoff + 1
        w1, w2 = _centered_freqs(cutoff)
        wsq = (w1 * w1 + w2 * w2).astype(np.float64)
        self.lam = np.pi**2 * wsq
        self.noise_mask = (wsq > 0) & (wsq < cutoff * cutoff)
        self.zero_mode = (w1 == 0) & (w2 == 0)

        if isinstance(seed, np.random.SeedSequence):
            seq = seed
        else:
            seq = np.random.SeedSequence(seed)
        self.gen = np.random.Generator(np.random.Philox(seq))

        self.zhat = np.zeros((self.side, self.side), dtype=np.complex128)
        self.vhat = np.zeros_like(self.zhat)
        if x0_coeff is None:
            self.x0hat = np.zeros_like(self.zhat)
        else:
            self.x0hat = np.asarray(x0_coeff, dtype=np.complex128).copy()
        self.t = 0.0
        pad = 2 if config.n == 2 else 3
        self.big = pad * self.side
        self._records = []

    # -- pieces -----------------------------------------------------------------

    def _noise_increment(self, dt):
        cfg = self.config
        var = np.zeros_like(self.lam)
        lam = self.lam
        nz = self.noise_mask & (lam > 0)
        var[nz] = (2.0 / cfg.beta_c) * (1.0 - np.exp(-2.0 * lam[nz] * dt)) / (2.0 * lam[nz])
        var[self.zero_mode] = (2.0 / cfg.beta_c) * dt
        var *= cfg.noise_scale**2
        a = self.gen.standard_normal((self.side, self.side))
        b = self.gen.standard_normal((self.side, self.side))
        xi = (a + 1j * b) / math.sqrt(2.0)
        flip = np.flip
        xi = (xi + np.conj(flip(flip(xi, 0), 1))) / math.sqrt(2.0)
        return np.sqrt(var) * xi

    def ou_step(self, dt):
        """Exact per-mode update of the stochastic convolution."""
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.zhat = np.exp(-self.lam * dt) * self.zhat + self._noise_increment(dt)

    def heat_x0(self, t):
        return np.exp(-self.lam * t) * self.x0hat

    def _to_grid(self, coeff_centered):
        big = self.big
        lo = big // 2 - (self.side - 1) // 2
        pad = np.zeros((big, big), dtype=np.complex128)
        pad[lo:lo + self.side, lo:lo + self.side] = coeff_centered
        return np.fft.ifft2(from_centered(pad)).real * (big * big / 2.0)

    def _to_coeff(self, grid):
        big = self.big
        lo = big // 2 - (self.side - 1) // 2
        chat = np.fft.fftshift(np.fft.fft2(grid)) * (2.0 / (big * big))
        return chat[lo:lo + self.side, lo:lo + self.side]

    def wick_tilde_grids(self, t=None):
        """Grids of (Z + P_t X0)^{:m:} for m <= 2n-1 at the current time."""
        if t is None:
            t = self.t
        c = self.schedule.wick_constant(t)
        wt = self._to_grid(self.zhat + self.heat_x0(t))
        return {m: hermite_value(wt, c, m) for m in range(0, 2 * self.config.n)}

    def nonlinearity_grid(self, t, vg, zw):
        """sum_l (sum_k a_{2k-1}(t) C(2k-1,l) Ztilde^{:2k-1-l:}) v^l, pointwise."""
        coeffs = self.schedule.coefficients_at(t)
        nl = np.zeros_like(vg)
        vpow = np.ones_like(vg)
        top = 2 * self.config.n - 1
        for ell in range(0, top + 1):
            acc = np.zeros_like(vg)
            for k in range(1, self.config.n + 1):
                m = 2 * k - 1
                if m >= ell:
                    acc += coeffs[k - 1] * math.comb(m, ell) * zw[m - ell]
            nl += acc * vpow
            if ell < top:
                vpow = vpow * vg
        return nl

    def remainder_step(self, dt):
        """Exponential-Euler step of v at the current time."""
        zw = self.wick_tilde_grids()
        vg = self._to_grid(self.vhat)
        nl = self.nonlinearity_grid(self.t, vg, zw)
        nl_hat = self._to_coeff(nl)
        decay = np.exp(-self.lam * dt)
        self.vhat = decay * (self.vhat + dt * nl_hat)
        sup_v = float(np.max(np.abs(self._to_grid(self.vhat))))
        if not np.isfinite(sup_v) or sup_v > self.config.blowup_bound:
            raise SpdeBlowup(
                f"remainder reached sup {sup_v:.3e} at t={self.t + dt:.4f} "
                f"(bound {self.config.blowup_bound:.1e})")

    def step(self, dt=None, advance_noise=True):
        dt = self.config.dt if dt is None else dt
        self.remainder_step(dt)
        if advance_noise:
            self.ou_step(dt)
        self.t += dt
        t = self.t
        sched = self.schedule
        rec = {"t": t, "c_t": sched.wick_constant(t)}
        if self.config.renormalize and self.config.schedule_mode == "limit":
            rec["bar_c"] = sched.bar_c(max(t, 1e-12))
        co = sched.coefficients_at(max(t, 1e-12))
        rec["a1_t"] = co[0]
        rec["a3_t"] = co[1]
        self._records.append(rec)

    def x_hat(self):
        """Centered coefficients of X = Z + P_t X0 + v."""
        return self.zhat + self.heat_x0(self.t) + self.vhat

    def snapshot(self):
        return FieldSnapshot(from_centered(self.x_hat()), macro_time=self.t,
                             regime="phi4" if self.config.n == 2 else "phi6")

    def schedule_records(self):
        return list(self._records)


def solve(config, seed=0, x0_coeff=None, output_times=(), noise_grid_dt=None):
    """Integrate to t_end; returns snapshots at output_times (and t_end).

    noise_grid_dt, when set, advances the stochastic convolution only at
    multiples of that spacing (holding it frozen in between), so runs with
    different dt but one seed see the same noise path; used by the time-step
    self-convergence check.
    """
    solver = SpdeSolver(config, seed=seed, x0_coeff=x0_coeff)
    times = sorted(set(list(output_times) + [config.t_end]))
    snaps = []
    n_steps = int(round(config.t_end / config.dt))
    next_out = 0
    eps_t = config.dt * 1e-6
    noise_credit = 0.0
    for k in range(n_steps):
        if noise_grid_dt is None:
            solver.step()
        else:
            t_next = solver.t + config.dt
            advance = (math.floor((t_next + eps_t) / noise_grid_dt)
                       > math.floor((solver.t + eps_t) / noise_grid_dt))
            solver.step(advance_noise=False)
            if advance:
                solver.ou_step(noise_grid_dt)
        while next_out < len(times) and solver.t + eps_t >= times[next_out]:
            snaps.append(solver.snapshot())
            next_out += 1
    return solver, snaps
