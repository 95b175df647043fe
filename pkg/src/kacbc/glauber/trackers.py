"""Martingale bookkeeping on top of a running simulation.

ZTracker maintains, on a uniform macroscopic chunk grid, the martingale
decomposition of the rescaled field and the lattice stochastic convolution

    Zhat <- e^{-lam*dt} Zhat + e^{-lam*dt/2} dMhat,

with dMhat = dXhat - Drifthat computed exactly from the event-integrated
spin field (the configuration-rate part of the drift is integrated by the
trapezoid rule on the chunk grid; it vanishes identically in tilde mode).
The half-step factor on dMhat removes the O(lam*dt) bias of attributing a
whole chunk's jumps to its endpoint.

ProbeTracker follows, at <= 16 grid probes and for one fixed horizon t, the
heat-flow martingale R(s,x) = int_0^s P_{t-r} dM(r,x), its square bracket,
its predictable bracket, the iterated integrals of orders 2..5, and the
running sup of |[R]-<R>| and of the Hermite-vs-iterated gaps.  Jumps are
exact (sliding window of semigroup-smoothed kernels, cubic interpolation in
log time-to-horizon); the continuous compensator is integrated through an
incrementally maintained smoothed spin sum, resynced spectrally at chunk
boundaries.  Chunks follow a geometric ladder in time-to-horizon so the
frozen-kernel midpoint error stays second order uniformly.
"""

import math

import numpy as np

from ..fourier import grid_to_coeff
from .rates import average_rate_function, drift_function, rate_sum_function


def heat_rates(kernel, b_time):
    """Per-mode relaxation rates lam(w) = gamma^{-b_time} (1 - khat(w))."""
    return kernel.gamma ** (-b_time) * (1.0 - kernel.khat)


class ZTracker:
    def __init__(self, sim, chunk_dt, probe_sites=None):
        self.sim = sim
        self.chunk_dt = chunk_dt
        self.lam = heat_rates(sim.kernel, sim.params.regime.b_time)
        self.side = sim.torus.side
        self.delta = sim.delta
        self.zhat = np.zeros((self.side, self.side), dtype=np.complex128)
        self.drift_hat = np.zeros_like(self.zhat)
        self.x0_hat = sim.x_coeff()
        self.prev_x_hat = self.x0_hat.copy()
        self.t = 0.0
        self._prev_drift_rate = self._drift_rate_grid()
        sim.flush_spin_integral()
        sim.acc_sigma[:] = 0.0
        # optional: predictable bracket of the rescaled-field martingale at
        # probe sites, trapezoid of c2^2 eps^-2 (kappa^2 * W)
        if probe_sites is not None:
            self.probe_flat = np.asarray(
                [a * self.side + b for a, b in probe_sites], dtype=np.int64)
            self.bracket = np.zeros(len(self.probe_flat))
            self._k2hat = np.fft.fft2(sim.kernel.values ** 2)
            self._c2sq = sim.params.regime.c_gamma2(sim.params.gamma) ** 2
            self._prev_bracket_rate = self._bracket_rate()
        else:
            self.probe_flat = None

    def _drift_rate_grid(self):
        """Configuration part D(h) of the drift, zero under fixed rates."""
        sim = self.sim
        if sim.mode == "tilde" or sim.core.rates_mode == 1:
            return None
        side = self.side
        return drift_function(sim.state.h.reshape(side, side),
                              sim.params.beta, sim.params.theta)

    def _jump_variance_grid(self):
        """Rate sum W(z) = sum (sbar - sigma)^2 p(sbar) for the active rates."""
        sim = self.sim
        spins = sim.state.spins
        if sim.mode == "tilde" or sim.core.rates_mode == 1:
            lut = np.array([average_rate_function(s, sim.theta_c)
                            for s in (-1, 0, 1)])
            return lut[spins.astype(np.int64) + 1].reshape(self.side, self.side)
        return rate_sum_function(
            spins.reshape(self.side, self.side),
            sim.state.h.reshape(self.side, self.side),
            sim.params.beta, sim.params.theta)

    def _bracket_rate(self):
        w = self._jump_variance_grid()
        conv = np.fft.ifft2(self._k2hat * np.fft.fft2(w)).real
        eps = self.sim.torus.eps
        return self._c2sq / (eps * eps) * conv.reshape(-1)[self.probe_flat]

    def _chunk_drift_hat(self, dt_micro):
        """Exact -int sigma plus trapezoid int D(h), as Fourier drift increment."""
        sim = self.sim
        g_int = -sim.take_spin_integral().reshape(self.side, self.side)
        cur = self._drift_rate_grid()
        if cur is not None or self._prev_drift_rate is not None:
            prev = self._prev_drift_rate if self._prev_drift_rate is not None else 0.0
            curv = cur if cur is not None else 0.0
            g_int = g_int + 0.5 * (prev + curv) * dt_micro
        self._prev_drift_rate = cur
        return sim.kernel.khat * grid_to_coeff(g_int) / self.delta

    def advance_to(self, t_target):
        sim = self.sim
        while self.t < t_target - 1e-12:
            t_next = min(self.t + self.chunk_dt, t_target)
            dt = t_next - self.t
            sim.run_to(t_next)
            drift_c = self._chunk_drift_hat(dt / sim.alpha)
            x_hat = sim.x_coeff()
            dm = x_hat - self.prev_x_hat - drift_c
            decay = np.exp(-self.lam * dt)
            self.zhat = decay * self.zhat + np.exp(-self.lam * (0.5 * dt)) * dm
            self.drift_hat += drift_c
            self.prev_x_hat = x_hat
            if self.probe_flat is not None:
                rate = self._bracket_rate()
                self.bracket += 0.5 * (self._prev_bracket_rate + rate) * dt
                self._prev_bracket_rate = rate
            self.t = t_next

    def martingale_hat(self):
        """Mhat(t) = Xhat - Xhat(0) - accumulated drift (identity residual)."""
        return self.prev_x_hat - self.x0_hat - self.drift_hat


def probe_sites(torus, count):
    """Evenly spread grid probes, as (iy, ix) index arrays."""
    k = int(math.ceil(math.sqrt(count)))
    step = torus.side // k
    iy, ix = [], []
    for a in range(k):
        for b in range(k):
            if len(iy) < count:
                iy.append((a * step + step // 2) % torus.side)
                ix.append((b * step + step // 2) % torus.side)
    return np.array(iy, dtype=np.int64), np.array(ix, dtype=np.int64)


class ProbeTracker:
    """Square/angle bracket and iterated-integral diagnostics at probe sites."""

    def __init__(self, sim, horizon, n_probes=8, nodes_per_decade=12,
                 ladder_ratio=0.875):
        if sim.mode != "tilde":
            raise ValueError("probe diagnostics run on the fixed-rate process")
        self.sim = sim
        self.horizon = horizon
        self.kernel = sim.kernel
        self.side = sim.torus.side
        self.lam = heat_rates(sim.kernel, sim.params.regime.b_time)
        self.khat = sim.kernel.khat
        self.alpha = sim.alpha
        self.delta = sim.delta
        self.c2sq = sim.params.regime.c_gamma2(sim.params.gamma) ** 2
        self.beta_c = (2.0 * sim.params.a_c + 1.0) / (2.0 * sim.params.a_c)

        self.n_probes = n_probes
        self.probe_iy, self.probe_ix = probe_sites(sim.torus, n_probes)
        self.probe_flat = self.probe_iy * self.side + self.probe_ix

        # interpolation nodes in time-to-horizon, geometric
        self.u_min = sim.alpha / 64.0
        n_nodes = max(6, int(math.ceil(
            nodes_per_decade * math.log10(horizon / self.u_min))) + 1)
        self.u_nodes = np.geomspace(self.u_min, horizon, n_nodes)
        self.x_nodes = np.log(self.u_nodes)
        self.win = len(self.u_nodes) - 4  # window covers nodes [win, win+3]
        self.gwin = np.empty((4, self.side * self.side))
        for i in range(4):
            self.gwin[i] = self._g_grid(self.u_nodes[self.win + i]).reshape(-1)
        self.gwin_x = self.x_nodes[self.win:self.win + 4].copy()

        # chunk ladder: geometric in time-to-horizon
        rs = [0.0]
        u = horizon
        while u > self.u_min:
            u = max(u * ladder_ratio, self.u_min)
            rs.append(horizon - u)
        rs.append(horizon)
        self.boundaries = np.array(rs)
        self.bi = 0

        p = n_probes
        self.pr_R = np.zeros(p)
        self.pr_iter = np.zeros((4, p))
        self.pr_sqbr = np.zeros(p)
        self.pr_supQ = np.zeros(p)
        self.pr_supgap = np.zeros((4, p))
        self.pr_comp_slope = np.zeros(p)
        self.br0 = np.zeros(p)
        self.br_slope = np.zeros(p)
        self.bracket = np.zeros(p)       # <R> at the current boundary
        self._det_prev = self._det_bracket(0.0)
        self._fluct_prev = self._fluct_rate()

        self._install(first=True)

    # -- spectral helpers -------------------------------------------------------

    def _g_grid(self, u):
        """Semigroup-smoothed microscopic kernel g_u = idft[e^{-lam u} khat]."""
        return np.fft.ifft2(np.exp(-self.lam * u) * self.khat).real

    def _w_field(self):
        """Jump-variance rate field A(sigma) of the fixed-rate process."""
        lut = np.array([average_rate_function(-1, self.sim.theta_c),
                        average_rate_function(0, self.sim.theta_c),
                        average_rate_function(1, self.sim.theta_c)])
        return lut[self.sim.state.spins.astype(np.int64) + 1].reshape(self.side, self.side)

    def _det_bracket(self, s):
        """Deterministic part of <R>(s): mean rate 2/beta_c, exact per mode."""
        u = self.horizon - s
        lam = self.lam
        with np.errstate(divide="ignore", invalid="ignore"):
            t_int = np.where(
                lam > 0,
                (np.exp(-2.0 * lam * u) - np.exp(-2.0 * lam * self.horizon)) / (2.0 * lam),
                s,
            )
        val = self.c2sq * (2.0 / self.beta_c) * 0.25 * np.sum(self.khat**2 * t_int)
        return float(val)

    def _det_rate(self, s):
        """Time derivative of the deterministic bracket part at time s."""
        u = max(self.horizon - s, 0.0)
        return self.c2sq * (2.0 / self.beta_c) * 0.25 * float(
            np.sum(self.khat**2 * np.exp(-2.0 * self.lam * u)))

    def _fluct_rate(self):
        """Probe values of c2^2 eps^-2 sum_j g_u(p-j)^2 (W(j) - 2/beta_c)."""
        u = max(self.horizon - self.sim.t_macro, self.u_min)
        g = self._g_grid(u)
        wf = self._w_field() - 2.0 / self.beta_c
        conv = np.fft.ifft2(np.fft.fft2(g * g) * np.fft.fft2(wf)).real
        eps = self.sim.torus.eps
        return self.c2sq / (eps * eps) * conv.reshape(-1)[self.probe_flat]

    # -- window and chunk management ---------------------------------------------

    def _slide_to(self, u_low):
        x_low = math.log(max(u_low, self.u_min))
        while self.win > 0 and x_low < self.x_nodes[self.win + 1]:
            self.win -= 1
            self.gwin[1:] = self.gwin[:-1].copy()  # core holds views: mutate in place
            self.gwin[0] = self._g_grid(self.u_nodes[self.win]).reshape(-1)
            self.gwin_x[:] = self.x_nodes[self.win:self.win + 4]

    def _smoothed_spin_probe(self, u_mid):
        """(g_{u_mid} * sigma)(probes), the compensator rate kernel sum."""
        spins = self.sim.state.spins.reshape(self.side, self.side).astype(np.float64)
        conv = np.fft.ifft2(np.exp(-self.lam * u_mid) * self.khat
                            * np.fft.fft2(spins)).real
        return conv.reshape(-1)[self.probe_flat]

    def _install(self, first=False):
        """Prepare the core for the next chunk [boundaries[bi], boundaries[bi+1]]."""
        r0 = self.boundaries[self.bi]
        r1 = self.boundaries[self.bi + 1]
        u_mid = max(self.horizon - 0.5 * (r0 + r1), self.u_min)
        self._slide_to(self.horizon - r1)
        s_probe = self._smoothed_spin_probe(u_mid)
        self.pr_comp_slope[:] = -s_probe / (self.alpha * self.delta)
        self.br0[:] = self.bracket
        self.br_slope[:] = self._det_rate(r0) + self._fluct_prev
        core = self.sim.core
        if first:
            core.set_probes(
                self.probe_iy, self.probe_ix, self.gwin, self.gwin_x,
                1.0 / self.delta, self.alpha, self.horizon,
                self.u_min, self.horizon,
                (self.pr_R, self.pr_iter, self.pr_sqbr, self.pr_supQ,
                 self.pr_supgap, self.pr_comp_slope),
                self.br0, self.br_slope, r0)
        else:
            core.set_bracket_interp(self.br0, self.br_slope, r0, self.pr_comp_slope)

    def run(self):
        """Advance the simulation to the horizon, one ladder chunk at a time."""
        sim = self.sim
        while self.bi < len(self.boundaries) - 1:
            r1 = self.boundaries[self.bi + 1]
            sim.run_to(r1)
            sim.core.probe_sync()
            # predictable bracket: exact deterministic part + trapezoid of the
            # mean-zero fluctuation part
            r0 = self.boundaries[self.bi]
            det_now = self._det_bracket(r1)
            self.bi += 1
            fluct_now = self._fluct_rate()
            self.bracket += (det_now - self._det_prev) \
                + 0.5 * (self._fluct_prev + fluct_now) * (r1 - r0)
            self._det_prev = det_now
            self._fluct_prev = fluct_now
            if self.bi < len(self.boundaries) - 1:
                self._install()
        return self.results()

    def results(self):
        herm = self._hermite_final()
        return {
            "sup_Q": self.pr_supQ.copy(),
            "sup_gap": self.pr_supgap.copy(),
            "R_final": self.pr_R.copy(),
            "iterated_final": self.pr_iter.copy(),
            "square_bracket_final": self.pr_sqbr.copy(),
            "angle_bracket_final": self.bracket.copy(),
            "hermite_final": herm,
        }

    def _hermite_final(self):
        r, c = self.pr_R, self.pr_sqbr
        return np.stack([
            r * r - c,
            r**3 - 3 * c * r,
            r**4 - 6 * c * r * r + 3 * c * c,
            r**5 - 10 * c * r**3 + 15 * c * c * r,
        ])
