"""Driver around the compiled (or fallback) event loop.

Owns the replica's random stream, the cached local field and its periodic
FFT refresh, the optional auxiliary process and stop switch, and exposes
macroscopic-time stepping.  All scheduling that can affect the trajectory
(refresh points, stop-switch checks) happens at seed-deterministic places:
fixed event-count multiples and a fixed macroscopic check grid, never at
caller-chosen snapshot times.
"""

import math

import numpy as np

from .. import glauber as _pkg  # resolved lazily for the selected core
from ..fourier import grid_to_coeff
from .rates import ptilde
from .state import SpinConfiguration, build_stencil, initial_spins


class BudgetExhausted(RuntimeError):
    def __init__(self, events, t_macro):
        super().__init__(f"event budget exhausted after {events} events at t={t_macro:.6g}")
        self.events = events
        self.t_macro = t_macro


class GlauberSimulation:
    """One replica of the microscopic dynamics.

    mode: 'real' (configuration-dependent rates), 'tilde' (fixed update
    distribution, no local-field maintenance) or 'coupled' (real process
    plus the auxiliary process on shared clocks).
    """

    def __init__(self, torus, kernel, params, *, mode="real", init="ptilde",
                 seed=0, theta_c=None, init_probs=None, init_profile=None,
                 refresh_interval=1_000_000, drift_tol=1e-8,
                 engine="auto", track_drift=False,
                 stop_mfrak=None, stop_nu=0.1, stop_check_dt=None):
        self.torus = torus
        self.kernel = kernel
        self.params = params
        self.mode = mode
        self.refresh_interval = int(refresh_interval)
        self.drift_tol = drift_tol
        self.alpha = params.regime.alpha(params.gamma)
        self.delta = params.regime.delta(params.gamma)
        self.track_drift = bool(track_drift)

        if theta_c is None:
            theta_c = math.log(params.a_c)
        self.theta_c = theta_c
        pt = ptilde(theta_c)

        if isinstance(seed, np.random.SeedSequence):
            seq = seed
        else:
            seq = np.random.SeedSequence(seed)
        self.bitgen = np.random.Philox(seq)
        self._gen = np.random.Generator(self.bitgen)

        spins = initial_spins(
            init, torus, self._gen, theta_c=theta_c, probs=init_probs,
            profile=init_profile, delta=self.delta)
        self.state = SpinConfiguration(torus, kernel, spins)
        self.stencil = build_stencil(kernel)

        n = torus.n_sites
        self.acc_sigma = np.zeros(n)
        self.last_t = np.zeros(n)
        if mode == "coupled":
            # the auxiliary process starts iid, independent of sigma; the
            # initial disagreement fraction is reported, not controlled
            tilde = initial_spins("ptilde", torus, self._gen, theta_c=theta_c)
            self.tilde_spins = tilde
            self.tilde_acc = np.zeros(n)
            self.tilde_last = np.zeros(n)
            tilde_state = (tilde, self.tilde_acc, self.tilde_last)
            self.initial_mismatch_fraction = float(
                np.mean(self.state.spins != tilde))
        else:
            self.tilde_spins = None
            tilde_state = None
            self.initial_mismatch_fraction = float("nan")

        if engine == "auto":
            core_mod = _pkg.core
        elif engine == "compiled":
            from . import _core as core_mod
        elif engine == "python":
            from . import _core_py as core_mod
        else:
            raise ValueError(f"unknown engine {engine!r}")
        self._core_mod = core_mod
        rates_mode = 1 if mode == "tilde" else 0
        self.core = core_mod.CoreEngine(
            self.state.spins, self.state.h, self.stencil,
            params.beta, params.theta, pt, rates_mode,
            1 if mode == "coupled" else 0,
            1 if track_drift else 0,
            (self.acc_sigma, self.last_t), tilde_state, self.bitgen)

        # stop switch: once the rescaled field norm reaches mfrak the rates
        # freeze at the fixed distribution
        self.stop_mfrak = stop_mfrak
        self.stop_nu = stop_nu
        self.stop_check_dt = stop_check_dt
        self.triggered_at = None
        self._next_stop_check = stop_check_dt if stop_mfrak is not None else None

        self._next_refresh = self.refresh_interval
        self.refresh_count = 0
        self.max_drift_seen = 0.0

    # -- basic observables ----------------------------------------------------

    @property
    def t_macro(self):
        return self.core.t_micro * self.alpha

    @property
    def event_count(self):
        return self.core.event_count

    def x_grid(self):
        """Rescaled field on the grid (recomputed from spins in tilde mode)."""
        side = self.torus.side
        if self.mode == "tilde":
            h = self.state.recomputed_field()
        else:
            h = self.state.h
        return h.reshape(side, side) / self.delta

    def x_coeff(self):
        side = self.torus.side
        if self.mode == "tilde":
            # field not cached: smooth spectrally, one transform instead of three
            spins = self.state.spins.reshape(side, side).astype(np.float64)
            return self.kernel.khat * grid_to_coeff(spins) / self.delta
        return grid_to_coeff(self.state.h.reshape(side, side)) / self.delta

    # -- time stepping ----------------------------------------------------------

    def _run_core_until(self, t_micro_end, max_total_events=None):
        """Advance respecting field-refresh points and the event budget."""
        while True:
            target_events = self._next_refresh
            if max_total_events is not None:
                target_events = min(target_events, max_total_events)
            reason = self.core.run(t_micro_end, target_events)
            if reason == self._core_mod.REASON_TIME:
                return
            if max_total_events is not None and self.core.event_count >= max_total_events:
                raise BudgetExhausted(self.core.event_count, self.t_macro)
            if self.core.event_count >= self._next_refresh:
                self._refresh_field()
                self._next_refresh += self.refresh_interval

    def _refresh_field(self):
        if self.mode == "tilde":
            return
        fresh = self.state.recomputed_field()
        drift = float(np.max(np.abs(self.state.h - fresh)))
        self.max_drift_seen = max(self.max_drift_seen, drift)
        if drift > self.drift_tol:
            raise RuntimeError(
                f"incremental local field drifted by {drift:.3e} > {self.drift_tol:.1e}")
        self.state.h[:] = fresh
        self.refresh_count += 1

    def step_event(self):
        """Process exactly one ring; returns (site, old, new, micro_time).

        Self-jumps (new == old) are valid events with no field update.
        """
        target = self.core.event_count + 1
        while self.core.event_count < target:
            self.core.run(1e300, target)
            if self.core.event_count >= self._next_refresh:
                self._refresh_field()
                self._next_refresh += self.refresh_interval
        return (int(self.core.last_site), int(self.core.last_old),
                int(self.core.last_new), float(self.core.t_micro))

    def run_to(self, t_macro, max_total_events=None):
        """Advance the macroscopic clock to t_macro (stop checks included)."""
        if t_macro < self.t_macro - 1e-12:
            raise ValueError("cannot run backwards")
        while (self._next_stop_check is not None
               and self.triggered_at is None
               and self._next_stop_check < t_macro):
            self._run_core_until(self._next_stop_check / self.alpha, max_total_events)
            self._stop_check()
            self._next_stop_check += self.stop_check_dt
        self._run_core_until(t_macro / self.alpha, max_total_events)
        if (self._next_stop_check is not None and self.triggered_at is None
                and abs(self.t_macro - self._next_stop_check) < 1e-12):
            self._stop_check()
            self._next_stop_check += self.stop_check_dt

    def _stop_check(self):
        from ..fields import FieldSnapshot, besov_norm

        snap = FieldSnapshot(self.x_coeff(), self.t_macro,
                             gamma=self.params.gamma,
                             regime=self.params.regime.kind)
        est = besov_norm(snap, self.stop_nu)
        if est.value >= self.stop_mfrak:
            self.triggered_at = self.t_macro
            self.core.rates_mode = 1  # fixed rates from now on

    # -- accumulators -----------------------------------------------------------

    def flush_spin_integral(self):
        """Close all lazy segments of int sigma ds at the current micro time."""
        t = self.core.t_micro
        np.add(self.acc_sigma, self.state.spins * (t - self.last_t), out=self.acc_sigma)
        self.last_t[:] = t
        if self.tilde_spins is not None:
            np.add(self.tilde_acc, self.tilde_spins * (t - self.tilde_last),
                   out=self.tilde_acc)
            self.tilde_last[:] = t

    def take_spin_integral(self):
        """Return and reset int sigma ds (micro time units) since last call."""
        self.flush_spin_integral()
        out = self.acc_sigma.copy()
        self.acc_sigma[:] = 0.0
        return out

    # -- checkpointing ------------------------------------------------------------

    def checkpoint(self):
        ck = {
            "spins": self.state.spins.copy(),
            "h": self.state.h.copy(),
            "acc_sigma": self.acc_sigma.copy(),
            "last_t": self.last_t.copy(),
            "t_micro": self.core.t_micro,
            "pending": self.core.pending,
            "event_count": self.core.event_count,
            "flip_count": self.core.flip_count,
            "rates_mode": self.core.rates_mode,
            "next_refresh": self._next_refresh,
            "refresh_count": self.refresh_count,
            "triggered_at": self.triggered_at,
            "next_stop_check": self._next_stop_check,
            "rng_state": self.bitgen.state,
        }
        if self.tilde_spins is not None:
            ck["tilde_spins"] = self.tilde_spins.copy()
            ck["tilde_acc"] = self.tilde_acc.copy()
            ck["tilde_last"] = self.tilde_last.copy()
            ck["tilde_flip_count"] = self.core.tilde_flip_count
            ck["update_count"] = self.core.update_count
            ck["mismatch_updates"] = self.core.mismatch_updates
        return ck

    def restore(self, ck):
        self.state.spins[:] = ck["spins"]
        self.state.h[:] = ck["h"]
        self.acc_sigma[:] = ck["acc_sigma"]
        self.last_t[:] = ck["last_t"]
        self.core.t_micro = ck["t_micro"]
        self.core.pending = ck["pending"]
        self.core.event_count = ck["event_count"]
        self.core.flip_count = ck["flip_count"]
        self.core.rates_mode = ck["rates_mode"]
        self._next_refresh = ck["next_refresh"]
        self.refresh_count = ck["refresh_count"]
        self.triggered_at = ck["triggered_at"]
        self._next_stop_check = ck["next_stop_check"]
        self.bitgen.state = ck["rng_state"]
        if self.tilde_spins is not None:
            self.tilde_spins[:] = ck["tilde_spins"]
            self.tilde_acc[:] = ck["tilde_acc"]
            self.tilde_last[:] = ck["tilde_last"]
            self.core.tilde_flip_count = ck["tilde_flip_count"]
            self.core.update_count = ck["update_count"]
            self.core.mismatch_updates = ck["mismatch_updates"]
