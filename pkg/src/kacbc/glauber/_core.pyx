# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled event loop for the spin-1 Glauber dynamics.

One ring = one exponential waiting time at total rate n_sites, a uniform
site, and a categorical redraw of that site's spin.  On a real spin change
the cached local field h receives the kernel stencil incrementally (the hot
loop: contiguous row segments with torus wraparound, written in restrict C
so the compiler vectorizes).

The random stream is consumed in a fixed documented order per ring:
waiting time, site, spin draw, then (coupled mode only) coupling coin and,
if the coin fails, the residual draw.  `_core_py` mirrors this exactly, so
compiled and fallback trajectories are bit-identical.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, log1p, fabs
from numpy.random cimport bitgen_t
from cpython.pycapsule cimport PyCapsule_GetPointer

cdef extern from *:
    """
    static void kacbc_row_add(double *restrict h, const double *restrict kv,
                              long n, double ds) {
        for (long i = 0; i < n; i++) h[i] += ds * kv[i];
    }
    """
    void kacbc_row_add(double *h, const double *kv, long n, double ds) nogil


REASON_TIME = 0
REASON_EVENTS = 1


cdef class CoreEngine:
    # spin state
    cdef cnp.int8_t[::1] spins
    cdef cnp.int8_t[::1] tilde
    cdef double[::1] h
    # lazy time-integrals of the spin fields (for the drift accumulator)
    cdef double[::1] acc_sigma
    cdef double[::1] last_t
    cdef double[::1] tilde_acc
    cdef double[::1] tilde_last
    # kernel stencil, row-major over dy
    cdef long[::1] row_dy
    cdef long[::1] row_x0
    cdef long[::1] row_len
    cdef long[::1] row_koff
    cdef double[::1] kvals
    cdef long side, n_sites, nrows
    # parameters
    cdef public double beta, theta
    cdef double pt_m, pt_z
    cdef public int rates_mode          # 0 = configuration rates, 1 = fixed
    cdef public int maintain_h          # keep the stencil updates running
    cdef int coupled, track_acc
    # clocks and counters
    cdef public double t_micro, pending
    cdef public long event_count, flip_count, tilde_flip_count
    cdef public long update_count, mismatch_updates
    cdef public long last_site
    cdef public int last_old, last_new
    # rng
    cdef bitgen_t *rng
    cdef object _bitgen
    # probe tracking (square-bracket, iterated integrals, Q, Hermite gaps)
    cdef int track_probes, n_probes, gwin_n
    cdef long[::1] probe_iy
    cdef long[::1] probe_ix
    cdef double[:, ::1] gwin
    cdef double[::1] gwin_x
    cdef double jump_pref, alpha, horizon, u_lo, u_hi
    cdef double[::1] pr_R
    cdef double[:, ::1] pr_iter
    cdef double[::1] pr_sqbr
    cdef double[::1] pr_supQ
    cdef double[:, ::1] pr_supgap
    cdef double[::1] pr_comp_slope
    cdef double[::1] br0
    cdef double[::1] br_slope
    cdef double chunk_r0, pr_last_r

    def __init__(self, spins, h, stencil, double beta, double theta,
                 ptilde_mz, int rates_mode, int coupled, int track_acc,
                 accumulators, tilde_state, bitgen):
        row_dy, row_x0, row_len, row_koff, kvals = stencil
        self.spins = spins
        self.h = h
        self.row_dy = row_dy
        self.row_x0 = row_x0
        self.row_len = row_len
        self.row_koff = row_koff
        self.kvals = kvals
        self.nrows = row_dy.shape[0]
        self.side = <long>np.sqrt(spins.shape[0] + 0.5)
        self.n_sites = spins.shape[0]
        self.beta = beta
        self.theta = theta
        self.pt_m = ptilde_mz[0]
        self.pt_z = ptilde_mz[1]
        self.rates_mode = rates_mode
        self.maintain_h = 1 if (rates_mode == 0 or coupled) else 0
        self.coupled = coupled
        self.track_acc = track_acc
        self.acc_sigma, self.last_t = accumulators
        if tilde_state is not None:
            self.tilde, self.tilde_acc, self.tilde_last = tilde_state
        else:
            self.tilde = spins  # unused alias
            self.tilde_acc, self.tilde_last = self.acc_sigma, self.last_t
        self._bitgen = bitgen
        self.rng = <bitgen_t *>PyCapsule_GetPointer(bitgen.capsule, "BitGenerator")
        self.t_micro = 0.0
        self.pending = -1.0
        self.event_count = 0
        self.flip_count = 0
        self.tilde_flip_count = 0
        self.update_count = 0
        self.mismatch_updates = 0
        self.track_probes = 0
        self.n_probes = 0
        self.last_site = -1
        self.last_old = 0
        self.last_new = 0

    # -- probe configuration -------------------------------------------------

    def set_probes(self, probe_iy, probe_ix, gwin, gwin_x, double jump_pref,
                   double alpha, double horizon, double u_lo, double u_hi,
                   pr_arrays, br0, br_slope, double chunk_r0):
        self.track_probes = 1
        self.probe_iy = probe_iy
        self.probe_ix = probe_ix
        self.gwin = gwin
        self.gwin_x = gwin_x
        self.gwin_n = gwin.shape[0]
        self.jump_pref = jump_pref
        self.alpha = alpha
        self.horizon = horizon
        self.u_lo = u_lo
        self.u_hi = u_hi
        self.n_probes = probe_iy.shape[0]
        self.pr_R, self.pr_iter, self.pr_sqbr, self.pr_supQ, self.pr_supgap, \
            self.pr_comp_slope = pr_arrays
        self.br0 = br0
        self.br_slope = br_slope
        self.chunk_r0 = chunk_r0
        self.pr_last_r = self.alpha * self.t_micro

    def set_bracket_interp(self, br0, br_slope, double chunk_r0, comp_slope):
        self.br0 = br0
        self.br_slope = br_slope
        self.chunk_r0 = chunk_r0
        self.pr_comp_slope = comp_slope

    def probe_sync(self):
        """Advance the continuous compensator segments to the current time."""
        if self.track_probes:
            self._advance_probes(self.alpha * self.t_micro)

    # -- internals ------------------------------------------------------------

    cdef inline double _next(self) nogil:
        return self.rng.next_double(self.rng.state)

    cdef inline void _stencil_add(self, long site, double ds) nogil:
        cdef long cy = site / self.side
        cdef long cx = site - cy * self.side
        cdef long r, y, x0, L, base, n1
        cdef double *hp = &self.h[0]
        cdef const double *kp = &self.kvals[0]
        for r in range(self.nrows):
            y = cy + self.row_dy[r]
            if y >= self.side:
                y -= self.side
            elif y < 0:
                y += self.side
            base = y * self.side
            x0 = cx + self.row_x0[r]
            L = self.row_len[r]
            if x0 < 0:
                x0 += self.side
            if x0 + L <= self.side:
                kacbc_row_add(hp + base + x0, kp + self.row_koff[r], L, ds)
            else:
                n1 = self.side - x0
                kacbc_row_add(hp + base + x0, kp + self.row_koff[r], n1, ds)
                kacbc_row_add(hp + base, kp + self.row_koff[r] + n1, L - n1, ds)

    cdef inline void _advance_probes(self, double r_now) nogil:
        cdef double dr = r_now - self.pr_last_r
        if dr <= 0.0:
            return
        cdef long p
        cdef double dc, R0, R1, I2, I3, I4
        for p in range(self.n_probes):
            dc = self.pr_comp_slope[p] * dr
            if dc != 0.0:
                R0 = self.pr_R[p]
                R1 = R0 + dc
                I2 = self.pr_iter[0, p] + (R0 + R1) * dc
                I3 = self.pr_iter[1, p] + 1.5 * (self.pr_iter[0, p] + I2) * dc
                I4 = self.pr_iter[2, p] + 2.0 * (self.pr_iter[1, p] + I3) * dc
                self.pr_iter[3, p] = self.pr_iter[3, p] \
                    + 2.5 * (self.pr_iter[2, p] + I4) * dc
                self.pr_iter[0, p] = I2
                self.pr_iter[1, p] = I3
                self.pr_iter[2, p] = I4
                self.pr_R[p] = R1
        self.pr_last_r = r_now

    cdef inline void _probe_jump(self, long site, double ds, double r_now) nogil:
        cdef long jy = site / self.side
        cdef long jx = site - jy * self.side
        cdef double u = self.horizon - r_now
        if u < self.u_lo:
            u = self.u_lo
        elif u > self.u_hi:
            u = self.u_hi
        cdef double x = log(u)
        # cubic Lagrange weights over the 4 window nodes
        cdef double x0 = self.gwin_x[0], x1 = self.gwin_x[1]
        cdef double x2 = self.gwin_x[2], x3 = self.gwin_x[3]
        cdef double w0 = (x - x1) * (x - x2) * (x - x3) / ((x0 - x1) * (x0 - x2) * (x0 - x3))
        cdef double w1 = (x - x0) * (x - x2) * (x - x3) / ((x1 - x0) * (x1 - x2) * (x1 - x3))
        cdef double w2 = (x - x0) * (x - x1) * (x - x3) / ((x2 - x0) * (x2 - x1) * (x2 - x3))
        cdef double w3 = (x - x0) * (x - x1) * (x - x2) / ((x3 - x0) * (x3 - x1) * (x3 - x2))
        cdef long p, dy, dx, idx
        cdef double g, J, R0, c, brv, q, h2, h3, h4, h5, gap
        for p in range(self.n_probes):
            dy = self.probe_iy[p] - jy
            if dy < 0:
                dy += self.side
            dx = self.probe_ix[p] - jx
            if dx < 0:
                dx += self.side
            idx = dy * self.side + dx
            g = (w0 * self.gwin[0, idx] + w1 * self.gwin[1, idx]
                 + w2 * self.gwin[2, idx] + w3 * self.gwin[3, idx])
            J = self.jump_pref * ds * g
            R0 = self.pr_R[p]
            # iterated integrals use left limits
            self.pr_iter[3, p] += 5.0 * self.pr_iter[2, p] * J
            self.pr_iter[2, p] += 4.0 * self.pr_iter[1, p] * J
            self.pr_iter[1, p] += 3.0 * self.pr_iter[0, p] * J
            self.pr_iter[0, p] += 2.0 * R0 * J
            self.pr_R[p] = R0 + J
            self.pr_sqbr[p] += J * J
            # the flip also moves the smoothed spin sum driving the compensator
            self.pr_comp_slope[p] -= J / self.alpha
            # running sup of |[R] - <R>| with <R> interpolated linearly
            brv = self.br0[p] + self.br_slope[p] * (r_now - self.chunk_r0)
            q = fabs(self.pr_sqbr[p] - brv)
            if q > self.pr_supQ[p]:
                self.pr_supQ[p] = q
            # Hermite(R, [R]) minus iterated integrals, orders 2..5
            R0 = self.pr_R[p]
            c = self.pr_sqbr[p]
            h2 = R0 * R0 - c
            h3 = R0 * R0 * R0 - 3.0 * c * R0
            h4 = R0 * R0 * R0 * R0 - 6.0 * c * R0 * R0 + 3.0 * c * c
            h5 = R0 * R0 * R0 * R0 * R0 - 10.0 * c * R0 * R0 * R0 + 15.0 * c * c * R0
            gap = fabs(h2 - self.pr_iter[0, p])
            if gap > self.pr_supgap[0, p]:
                self.pr_supgap[0, p] = gap
            gap = fabs(h3 - self.pr_iter[1, p])
            if gap > self.pr_supgap[1, p]:
                self.pr_supgap[1, p] = gap
            gap = fabs(h4 - self.pr_iter[2, p])
            if gap > self.pr_supgap[2, p]:
                self.pr_supgap[2, p] = gap
            gap = fabs(h5 - self.pr_iter[3, p])
            if gap > self.pr_supgap[3, p]:
                self.pr_supgap[3, p] = gap

    # -- event loop -----------------------------------------------------------

    def run(self, double t_micro_end, long max_events):
        """Process rings until the micro clock passes t_micro_end or the
        total event count reaches max_events.  Returns the stop reason."""
        cdef double u, x, em, ep, nrm, pm, pz, pp, q, one_q, rm, rz
        cdef long site
        cdef int snew, sold, tnew, told
        cdef double t_end = t_micro_end
        cdef long ev_end = max_events
        cdef bint probes = self.track_probes == 1
        cdef bint acc = self.track_acc == 1

        while True:
            if self.pending < 0.0:
                u = self._next()
                self.pending = self.t_micro - log1p(-u) / self.n_sites
            if self.pending > t_end:
                self.t_micro = t_end
                if probes:
                    self._advance_probes(self.alpha * t_end)
                return REASON_TIME
            self.t_micro = self.pending
            self.pending = -1.0

            u = self._next()
            site = <long>(u * self.n_sites)
            if site >= self.n_sites:
                site = self.n_sites - 1

            if self.rates_mode == 0:
                x = self.beta * self.h[site]
                em = exp(self.theta - x)
                ep = exp(self.theta + x)
                nrm = em + 1.0 + ep
                pm = em / nrm
                pz = 1.0 / nrm
                pp = ep / nrm
            else:
                pm = self.pt_m
                pz = self.pt_z
                pp = self.pt_m

            u = self._next()
            if not self.coupled:
                if u < pm:
                    snew = -1
                elif u < pm + pz:
                    snew = 0
                else:
                    snew = 1
            else:
                # tilde spin from the fixed distribution, then the coin
                if u < self.pt_m:
                    tnew = -1
                elif u < self.pt_m + self.pt_z:
                    tnew = 0
                else:
                    tnew = 1
                q = pm / self.pt_m
                if pz / self.pt_z < q:
                    q = pz / self.pt_z
                if pp / self.pt_m < q:
                    q = pp / self.pt_m
                if q > 1.0:
                    q = 1.0
                one_q = 1.0 - q
                u = self._next()
                if u < q or one_q < 1e-14:
                    snew = tnew
                else:
                    rm = (pm - q * self.pt_m) / one_q
                    rz = (pz - q * self.pt_z) / one_q
                    u = self._next()
                    if u < rm:
                        snew = -1
                    elif u < rm + rz:
                        snew = 0
                    else:
                        snew = 1
                told = self.tilde[site]
                if tnew != told:
                    self.tilde_acc[site] += told * (self.t_micro - self.tilde_last[site])
                    self.tilde_last[site] = self.t_micro
                    self.tilde[site] = tnew
                    self.tilde_flip_count += 1
                self.update_count += 1
                if snew != tnew:
                    self.mismatch_updates += 1

            sold = self.spins[site]
            self.last_site = site
            self.last_old = sold
            self.last_new = snew
            if snew != sold:
                if probes:
                    self._advance_probes(self.alpha * self.t_micro)
                if acc:
                    self.acc_sigma[site] += sold * (self.t_micro - self.last_t[site])
                    self.last_t[site] = self.t_micro
                self.spins[site] = snew
                if self.maintain_h:
                    self._stencil_add(site, snew - sold)
                self.flip_count += 1
                if probes:
                    self._probe_jump(site, snew - sold, self.alpha * self.t_micro)

            self.event_count += 1
            if self.event_count >= ev_end:
                return REASON_EVENTS
