"""Pure-Python twin of the compiled event loop.

Consumes the random stream in exactly the same order as `_core` and applies
the same floating-point operations, so trajectories are bit-identical.
Orders of magnitude slower; used as the import-time fallback, for
correctness tests of the compiled core, and by the benchmark.
"""

import math

import numpy as np

REASON_TIME = 0
REASON_EVENTS = 1


class CoreEngine:
    def __init__(self, spins, h, stencil, beta, theta, ptilde_mz,
                 rates_mode, coupled, track_acc, accumulators, tilde_state,
                 bitgen):
        row_dy, row_x0, row_len, row_koff, kvals = stencil
        self.spins = spins
        self.h = h
        self.row_dy = row_dy
        self.row_x0 = row_x0
        self.row_len = row_len
        self.row_koff = row_koff
        self.kvals = kvals
        self.nrows = len(row_dy)
        self.side = int(round(math.sqrt(spins.shape[0])))
        self.n_sites = spins.shape[0]
        self.beta = beta
        self.theta = theta
        self.pt_m, self.pt_z = ptilde_mz[0], ptilde_mz[1]
        self.rates_mode = rates_mode
        self.maintain_h = 1 if (rates_mode == 0 or coupled) else 0
        self.coupled = coupled
        self.track_acc = track_acc
        self.acc_sigma, self.last_t = accumulators
        if tilde_state is not None:
            self.tilde, self.tilde_acc, self.tilde_last = tilde_state
        else:
            self.tilde, self.tilde_acc, self.tilde_last = spins, self.acc_sigma, self.last_t
        self._gen = np.random.Generator(bitgen)
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

    # -- probe configuration --------------------------------------------------

    def set_probes(self, probe_iy, probe_ix, gwin, gwin_x, jump_pref, alpha,
                   horizon, u_lo, u_hi, pr_arrays, br0, br_slope, chunk_r0):
        self.track_probes = 1
        self.probe_iy = probe_iy
        self.probe_ix = probe_ix
        self.gwin = gwin
        self.gwin_x = gwin_x
        self.jump_pref = jump_pref
        self.alpha = alpha
        self.horizon = horizon
        self.u_lo = u_lo
        self.u_hi = u_hi
        self.n_probes = len(probe_iy)
        (self.pr_R, self.pr_iter, self.pr_sqbr, self.pr_supQ, self.pr_supgap,
         self.pr_comp_slope) = pr_arrays
        self.br0 = br0
        self.br_slope = br_slope
        self.chunk_r0 = chunk_r0
        self.pr_last_r = self.alpha * self.t_micro

    def set_bracket_interp(self, br0, br_slope, chunk_r0, comp_slope):
        self.br0 = br0
        self.br_slope = br_slope
        self.chunk_r0 = chunk_r0
        self.pr_comp_slope = comp_slope

    def probe_sync(self):
        if self.track_probes:
            self._advance_probes(self.alpha * self.t_micro)

    # -- internals ------------------------------------------------------------

    def _next(self):
        return self._gen.random()

    def _stencil_add(self, site, ds):
        side = self.side
        cy, cx = divmod(site, side)
        h = self.h
        kv = self.kvals
        for r in range(self.nrows):
            y = cy + self.row_dy[r]
            if y >= side:
                y -= side
            elif y < 0:
                y += side
            base = y * side
            x0 = cx + self.row_x0[r]
            L = self.row_len[r]
            ko = self.row_koff[r]
            if x0 < 0:
                x0 += side
            if x0 + L <= side:
                h[base + x0:base + x0 + L] += ds * kv[ko:ko + L]
            else:
                n1 = side - x0
                h[base + x0:base + side] += ds * kv[ko:ko + n1]
                h[base:base + (L - n1)] += ds * kv[ko + n1:ko + L]

    def _advance_probes(self, r_now):
        dr = r_now - self.pr_last_r
        if dr <= 0.0:
            return
        it = self.pr_iter
        for p in range(self.n_probes):
            dc = self.pr_comp_slope[p] * dr
            if dc != 0.0:
                r0 = self.pr_R[p]
                r1 = r0 + dc
                i2 = it[0, p] + (r0 + r1) * dc
                i3 = it[1, p] + 1.5 * (it[0, p] + i2) * dc
                i4 = it[2, p] + 2.0 * (it[1, p] + i3) * dc
                it[3, p] = it[3, p] + 2.5 * (it[2, p] + i4) * dc
                it[0, p], it[1, p], it[2, p] = i2, i3, i4
                self.pr_R[p] = r1
        self.pr_last_r = r_now

    def _probe_jump(self, site, ds, r_now):
        side = self.side
        jy, jx = divmod(site, side)
        u = min(max(self.horizon - r_now, self.u_lo), self.u_hi)
        x = math.log(u)
        xs = self.gwin_x
        x0, x1, x2, x3 = xs[0], xs[1], xs[2], xs[3]
        w0 = (x - x1) * (x - x2) * (x - x3) / ((x0 - x1) * (x0 - x2) * (x0 - x3))
        w1 = (x - x0) * (x - x2) * (x - x3) / ((x1 - x0) * (x1 - x2) * (x1 - x3))
        w2 = (x - x0) * (x - x1) * (x - x3) / ((x2 - x0) * (x2 - x1) * (x2 - x3))
        w3 = (x - x0) * (x - x1) * (x - x2) / ((x3 - x0) * (x3 - x1) * (x3 - x2))
        it = self.pr_iter
        for p in range(self.n_probes):
            dy = (self.probe_iy[p] - jy) % side
            dx = (self.probe_ix[p] - jx) % side
            idx = dy * side + dx
            g = (w0 * self.gwin[0, idx] + w1 * self.gwin[1, idx]
                 + w2 * self.gwin[2, idx] + w3 * self.gwin[3, idx])
            jmp = self.jump_pref * ds * g
            r0 = self.pr_R[p]
            it[3, p] += 5.0 * it[2, p] * jmp
            it[2, p] += 4.0 * it[1, p] * jmp
            it[1, p] += 3.0 * it[0, p] * jmp
            it[0, p] += 2.0 * r0 * jmp
            self.pr_R[p] = r0 + jmp
            self.pr_sqbr[p] += jmp * jmp
            self.pr_comp_slope[p] -= jmp / self.alpha
            brv = self.br0[p] + self.br_slope[p] * (r_now - self.chunk_r0)
            q = abs(self.pr_sqbr[p] - brv)
            if q > self.pr_supQ[p]:
                self.pr_supQ[p] = q
            r0 = self.pr_R[p]
            c = self.pr_sqbr[p]
            herm = (r0 * r0 - c,
                    r0 ** 3 - 3.0 * c * r0,
                    r0 ** 4 - 6.0 * c * r0 * r0 + 3.0 * c * c,
                    r0 ** 5 - 10.0 * c * r0 ** 3 + 15.0 * c * c * r0)
            for m in range(4):
                gap = abs(herm[m] - it[m, p])
                if gap > self.pr_supgap[m, p]:
                    self.pr_supgap[m, p] = gap

    # -- event loop -----------------------------------------------------------

    def run(self, t_micro_end, max_events):
        nxt = self._next
        probes = self.track_probes == 1
        acc = self.track_acc == 1
        while True:
            if self.pending < 0.0:
                u = nxt()
                self.pending = self.t_micro - math.log1p(-u) / self.n_sites
            if self.pending > t_micro_end:
                self.t_micro = t_micro_end
                if probes:
                    self._advance_probes(self.alpha * t_micro_end)
                return REASON_TIME
            self.t_micro = self.pending
            self.pending = -1.0

            u = nxt()
            site = int(u * self.n_sites)
            if site >= self.n_sites:
                site = self.n_sites - 1

            if self.rates_mode == 0:
                x = self.beta * self.h[site]
                em = math.exp(self.theta - x)
                ep = math.exp(self.theta + x)
                nrm = em + 1.0 + ep
                pm, pz, pp = em / nrm, 1.0 / nrm, ep / nrm
            else:
                pm, pz, pp = self.pt_m, self.pt_z, self.pt_m

            u = nxt()
            if not self.coupled:
                snew = -1 if u < pm else (0 if u < pm + pz else 1)
            else:
                tnew = -1 if u < self.pt_m else (0 if u < self.pt_m + self.pt_z else 1)
                q = min(pm / self.pt_m, pz / self.pt_z, pp / self.pt_m, 1.0)
                one_q = 1.0 - q
                u = nxt()
                if u < q or one_q < 1e-14:
                    snew = tnew
                else:
                    rm = (pm - q * self.pt_m) / one_q
                    rz = (pz - q * self.pt_z) / one_q
                    u = nxt()
                    snew = -1 if u < rm else (0 if u < rm + rz else 1)
                told = self.tilde[site]
                if tnew != told:
                    self.tilde_acc[site] += told * (self.t_micro - self.tilde_last[site])
                    self.tilde_last[site] = self.t_micro
                    self.tilde[site] = tnew
                    self.tilde_flip_count += 1
                self.update_count += 1
                if snew != tnew:
                    self.mismatch_updates += 1

            sold = int(self.spins[site])
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
            if self.event_count >= max_events:
                return REASON_EVENTS
