import math

import numpy as np
import pytest

from kacbc.glauber import GlauberSimulation
from kacbc.glauber.rates import average_rate_function, jump_rates, ptilde
from kacbc.glauber.trackers import ZTracker
from kacbc.runio import replica_seed
from kacbc.scaling import ModelParams, Regime, build_tuned_model, tune_phi4, tune_phi6
from kacbc.lattice import Torus, build_kac_kernel


def small_model(gamma=0.2, a_c=1.0, frak_a1=0.0):
    return build_tuned_model("phi4", gamma, a_c=a_c, frak_a1=frak_a1)


class TestEngineEquivalence:
    def test_compiled_matches_python_real(self, mother):
        torus, kernel, params = small_model()
        sims = {}
        for eng in ("compiled", "python"):
            s = GlauberSimulation(torus, kernel, params, mode="real",
                                  init="ptilde", seed=99, engine=eng)
            s.run_to(0.03)
            sims[eng] = s
        a, b = sims["compiled"], sims["python"]
        assert np.array_equal(a.state.spins, b.state.spins)
        assert np.array_equal(a.state.h, b.state.h)
        assert a.core.t_micro == b.core.t_micro
        assert a.core.pending == b.core.pending
        assert a.event_count == b.event_count

    def test_compiled_matches_python_coupled(self):
        torus, kernel, params = small_model(a_c=0.25)
        sims = {}
        for eng in ("compiled", "python"):
            s = GlauberSimulation(torus, kernel, params, mode="coupled",
                                  init="ptilde", seed=5, engine=eng)
            s.run_to(0.02)
            sims[eng] = s
        a, b = sims["compiled"], sims["python"]
        assert np.array_equal(a.state.spins, b.state.spins)
        assert np.array_equal(a.tilde_spins, b.tilde_spins)
        assert a.core.mismatch_updates == b.core.mismatch_updates


class TestEventLoop:
    def test_incremental_field_oracle(self):
        # 1e5 events at gamma=0.1 on the first-regime torus, then compare the
        # incrementally maintained field against a full FFT recomputation
        torus, kernel, params = build_tuned_model("phi4", 0.1, a_c=1.0)
        sim = GlauberSimulation(torus, kernel, params, mode="real",
                                init="ptilde", seed=4, refresh_interval=10**9)
        sim.core.run(1e18, 100_000)
        assert sim.event_count == 100_000
        assert sim.state.field_drift() <= 1e-8

    def test_event_count_poisson(self):
        torus, kernel, params = small_model()
        sim = GlauberSimulation(torus, kernel, params, init="ptilde", seed=8)
        t_macro = 0.4
        sim.run_to(t_macro)
        expected = torus.n_sites * t_macro / sim.alpha
        assert abs(sim.event_count - expected) <= 3.0 * math.sqrt(expected)

    def test_zero_time_no_events(self):
        torus, kernel, params = small_model()
        sim = GlauberSimulation(torus, kernel, params, init="ptilde", seed=8)
        x0 = sim.x_grid().copy()
        sim.run_to(0.0)
        assert sim.event_count == 0
        np.testing.assert_array_equal(sim.x_grid(), x0)

    def test_free_dynamics_symmetric(self):
        # beta = 0, theta = 0: spins become iid uniform; spatial mean small
        torus = Torus(25)
        kernel = build_kac_kernel(0.2, torus)
        params = ModelParams(Regime("phi4"), 0.2, 1.0, 0.0, 0.0, float("nan"),
                             0.0, 1.0)
        sim = GlauberSimulation(torus, kernel, params, mode="real",
                                init="zero", seed=17, theta_c=0.0)
        sim.run_to(0.4)  # ~10 rings per site
        mean = float(np.mean(sim.state.spins))
        assert abs(mean) <= 3.0 / math.sqrt(torus.n_sites)

    def test_stationary_marginal_tricritical(self):
        # frozen-rate process at theta_c = ln(1/4): site marginals 1/6, 2/3, 1/6
        torus, kernel, params = small_model(a_c=0.25)
        sim = GlauberSimulation(torus, kernel, params, mode="tilde",
                                init="ptilde", seed=23)
        counts = np.zeros(3)
        n_samples = 350
        spacing_macro = 3.0 * sim.alpha  # ~3 micro units between samples
        for k in range(1, n_samples + 1):
            sim.run_to(k * spacing_macro)
            s = sim.state.spins
            counts += [np.sum(s == -1), np.sum(s == 0), np.sum(s == 1)]
        assert sim.event_count > 10**6
        n_obs = counts.sum()
        freq = counts / n_obs
        for got, want in zip(freq, (1 / 6, 2 / 3, 1 / 6)):
            se = math.sqrt(want * (1 - want) / n_obs)
            assert abs(got - want) <= 4.0 * se  # light serial correlation slack

    def test_budget_exhaustion_reports_partial(self):
        from kacbc.glauber.engine import BudgetExhausted
        torus, kernel, params = small_model()
        sim = GlauberSimulation(torus, kernel, params, init="ptilde", seed=8)
        with pytest.raises(BudgetExhausted) as exc:
            sim.run_to(5.0, max_total_events=500)
        assert exc.value.events >= 500
        assert sim.t_macro < 5.0  # partial trajectory still usable


class TestEventRecords:
    def test_step_event_records(self):
        torus, kernel, params = small_model()
        sim = GlauberSimulation(torus, kernel, params, init="ptilde", seed=2)
        t_prev = 0.0
        for _ in range(50):
            site, old, new, t = sim.step_event()
            assert 0 <= site < torus.n_sites
            assert old in (-1, 0, 1) and new in (-1, 0, 1)
            assert t > t_prev
            t_prev = t
        assert sim.event_count == 50

    def test_symmetric_rates_uniform_draw(self):
        # all spins 0, h = 0, theta = 0: the redrawn spin is uniform
        torus = Torus(10)
        kernel = build_kac_kernel(0.3, torus, strict=False)
        params = ModelParams(Regime("phi4"), 0.3, 1.0, 1.0, 0.0, float("nan"),
                             0.0, 1.0)
        sim = GlauberSimulation(torus, kernel, params, mode="real", init="zero",
                                seed=6, theta_c=0.0)
        counts = {-1: 0, 0: 0, 1: 0}
        n = 6000
        for _ in range(n):
            _, _, new, _ = sim.step_event()
            counts[new] += 1
            sim.state.spins[:] = 0          # freeze the configuration at zero
            sim.state.h[:] = 0.0
        se = math.sqrt((1 / 3) * (2 / 3) / n)
        for v in counts.values():
            assert abs(v / n - 1 / 3) <= 4 * se

    def test_martingale_bracket_at_probes(self):
        # tilde mode: the bracket rate is the kernel-squared smoothing of the
        # jump-variance field, on average (2/beta_c) c2^2 eps^-2 sum kappa^2
        from kacbc.glauber.rates import average_rate_ptilde_mean
        from kacbc.glauber.trackers import ZTracker, probe_sites
        torus, kernel, params = small_model(a_c=0.25)
        sim = GlauberSimulation(torus, kernel, params, mode="tilde",
                                init="ptilde", seed=2)
        iy, ix = probe_sites(torus, 4)
        tr = ZTracker(sim, 0.01, probe_sites=list(zip(iy, ix)))
        tr.advance_to(0.2)
        eps = torus.eps
        c2sq = params.regime.c_gamma2(params.gamma) ** 2
        theory = (c2sq / eps**2 * np.sum(kernel.values**2)
                  * average_rate_ptilde_mean(sim.theta_c) * 0.2)
        assert np.all(tr.bracket > 0)
        assert np.all(np.abs(tr.bracket / theory - 1.0) < 0.25)


class TestCoupling:
    def test_mixture_identity(self, rng):
        # q*Ptilde + (1-q)*R reassembles the configuration rates exactly
        th_c = math.log(0.25)
        pt = np.array(ptilde(th_c))
        for _ in range(300):
            h = rng.uniform(-0.5, 0.5)
            p = np.array(jump_rates(h, 3.01, th_c + rng.uniform(-0.01, 0.01)))
            q = min(1.0, float(np.min(p / pt)))
            if 1.0 - q < 1e-14:
                continue
            resid = (p - q * pt) / (1.0 - q)
            assert np.all(resid >= -1e-15)
            np.testing.assert_allclose(q * pt + (1 - q) * resid, p, atol=1e-14)

    def test_identical_rates_always_copy(self):
        # tilde-distribution parameters: q = 1, zero mismatches
        torus = Torus(25)
        kernel = build_kac_kernel(0.2, torus)
        params = ModelParams(Regime("phi4"), 0.2, 0.25, 0.0, 0.0, float("nan"),
                             0.0, 0.25)  # beta = 0 so rates equal ptilde exactly
        sim = GlauberSimulation(torus, kernel, params, mode="coupled",
                                init="ptilde", seed=3)
        sim.run_to(0.1)
        assert sim.core.update_count > 1000
        assert sim.core.mismatch_updates == 0

    def test_mismatch_rate_decays_with_gamma(self):
        # near-tricritical parameters on the quartic-regime torus: the
        # per-update mismatch probability scales like the local rate
        # perturbation, so it must decrease along the gamma sweep
        rates = []
        gammas = (0.2, 0.1, 0.05)
        for g in gammas:
            params = tune_phi6(g, 0.0, 0.0, 0.3, regime=Regime("phi4"))
            torus = Torus(Regime("phi4").torus_n(g))
            kernel = build_kac_kernel(g, torus)
            sim = GlauberSimulation(torus, kernel, params, mode="coupled",
                                    init="ptilde", seed=31)
            sim.run_to(2.0 * sim.alpha)  # two micro time units
            rates.append(sim.core.mismatch_updates / sim.core.update_count)
        assert rates[0] > rates[1] > rates[2] > 0
        slope = np.polyfit(np.log(gammas), np.log(rates), 1)[0]
        assert slope >= 0.7  # target gamma^{1-3 nu} with nu = 0.1


class TestDriftAccumulator:
    def test_lazy_spin_integral_exact(self):
        # oracle: advance one event at a time and integrate sigma by hand
        torus, kernel, params = small_model()
        sim = GlauberSimulation(torus, kernel, params, mode="real",
                                init="ptilde", seed=77, track_drift=True)
        manual = np.zeros(torus.n_sites)
        t_prev = 0.0
        for k in range(1, 301):
            spins_before = sim.state.spins.copy()
            sim.core.run(1e18, k)
            manual += spins_before * (sim.core.t_micro - t_prev)
            t_prev = sim.core.t_micro
        got = sim.take_spin_integral()
        np.testing.assert_allclose(got, manual, atol=1e-12)

    def test_martingale_residual_identity(self):
        torus, kernel, params = small_model(a_c=0.25)
        sim = GlauberSimulation(torus, kernel, params, mode="tilde",
                                init="ptilde", seed=13, track_drift=True)
        tr = ZTracker(sim, chunk_dt=0.01)
        tr.advance_to(0.1)
        lhs = sim.x_coeff() - tr.x0_hat - tr.drift_hat - tr.martingale_hat()
        assert np.max(np.abs(lhs)) == 0.0


class TestStopSwitch:
    def test_trigger_freezes_rates(self):
        torus, kernel, params = small_model(a_c=1.0)
        sim = GlauberSimulation(torus, kernel, params, mode="real",
                                init="ptilde", seed=41,
                                stop_mfrak=1e-6, stop_nu=0.1, stop_check_dt=0.01)
        sim.run_to(0.05)
        assert sim.triggered_at is not None
        assert sim.core.rates_mode == 1
        # the cached field keeps tracking the spins after the switch
        assert sim.state.field_drift() <= 1e-10

    def test_large_threshold_never_triggers(self):
        torus, kernel, params = small_model(a_c=1.0)
        sim = GlauberSimulation(torus, kernel, params, mode="real",
                                init="ptilde", seed=41,
                                stop_mfrak=1e6, stop_nu=0.1, stop_check_dt=0.01)
        sim.run_to(0.05)
        assert sim.triggered_at is None
        assert sim.core.rates_mode == 0


class TestReproducibility:
    def test_same_seed_same_trajectory(self):
        torus, kernel, params = small_model()
        snaps = []
        for _ in range(2):
            sim = GlauberSimulation(torus, kernel, params, init="ptilde",
                                    seed=replica_seed(7, 3))
            sim.run_to(0.1)
            snaps.append((sim.state.spins.copy(), sim.state.h.copy(),
                          sim.core.t_micro))
        assert np.array_equal(snaps[0][0], snaps[1][0])
        assert np.array_equal(snaps[0][1], snaps[1][1])
        assert snaps[0][2] == snaps[1][2]

    def test_chunking_does_not_change_trajectory(self):
        torus, kernel, params = small_model()
        a = GlauberSimulation(torus, kernel, params, init="ptilde", seed=7)
        a.run_to(0.1)
        b = GlauberSimulation(torus, kernel, params, init="ptilde", seed=7)
        for t in np.linspace(0.005, 0.1, 20):
            b.run_to(float(t))
        assert np.array_equal(a.state.spins, b.state.spins)
        assert a.core.t_micro == b.core.t_micro
        assert a.core.pending == b.core.pending

    def test_checkpoint_resume_bit_exact(self, tmp_path):
        from kacbc.runio import load_checkpoint, save_checkpoint
        torus, kernel, params = small_model()
        ref = GlauberSimulation(torus, kernel, params, init="ptilde", seed=19)
        ref.run_to(0.12)

        sim = GlauberSimulation(torus, kernel, params, init="ptilde", seed=19)
        sim.run_to(0.05)
        save_checkpoint(tmp_path / "ck.pkl", sim.checkpoint(), {"t": 0.05})
        ck, meta = load_checkpoint(tmp_path / "ck.pkl")
        fresh = GlauberSimulation(torus, kernel, params, init="ptilde", seed=999)
        fresh.restore(ck)
        fresh.run_to(0.12)
        assert np.array_equal(fresh.state.spins, ref.state.spins)
        assert np.array_equal(fresh.state.h, ref.state.h)
        assert fresh.core.t_micro == ref.core.t_micro
        assert fresh.core.pending == ref.core.pending
