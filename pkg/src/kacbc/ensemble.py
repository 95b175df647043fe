"""Seeded parallel ensembles with a per-replica disk cache.

Each replica is an independent task keyed by a digest of its full parameter
set and seed; results (low-mode Fourier coefficients at the requested
times) are cached as .npz, so interrupted sweeps resume and repeated
acceptance runs are cheap.  Replica seeds derive from the global seed by
spawn index, so results are independent of worker scheduling.
"""

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .runio import replica_seed
from .scaling import build_tuned_model
from .spde import SpdeConfig, solve


def canonical_modes(mode_max):
    """Representatives of conjugate mode pairs with |w| <= mode_max."""
    out = []
    m = int(mode_max)
    for w1 in range(-m, m + 1):
        for w2 in range(-m, m + 1):
            if w1 * w1 + w2 * w2 > mode_max * mode_max:
                continue
            if (w1, w2) < (0, 0):
                continue
            out.append((w1, w2))
    return out


def _digest(task):
    # the cache location must not influence the key
    obj = {k: v for k, v in task.items() if k != "cache_dir"}
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()[:24]


def _cache_fetch(cache_dir, key):
    if cache_dir is None:
        return None
    p = Path(cache_dir) / f"{key}.npz"
    if p.exists():
        with np.load(p) as z:
            return z["coeffs"]
    return None


def _cache_store(cache_dir, key, coeffs):
    if cache_dir is None:
        return
    Path(cache_dir).mkdir(parents=True, exist_ok=True)
    p = Path(cache_dir) / f"{key}.npz"
    tmp = p.with_suffix(".tmp.npz")
    np.savez_compressed(tmp, coeffs=coeffs)
    os.replace(tmp, p)


def micro_replica_task(task):
    """Run one microscopic replica; returns coeffs[time, mode] (complex)."""
    key = _digest(task)
    cached = _cache_fetch(task.get("cache_dir"), key)
    if cached is not None:
        return cached
    from .glauber import GlauberSimulation

    torus, kernel, params = build_tuned_model(
        task["regime"], task["gamma"], a_c=task["a_c"],
        frak_a1=task["frak_a1"], frak_a3=task["frak_a3"],
        profile_id=task.get("profile_id", "poly_ring"))
    sim = GlauberSimulation(
        torus, kernel, params, mode=task.get("mode", "real"),
        init=task.get("init", "zero"),
        seed=replica_seed(task["seed"], task["replica"]),
        refresh_interval=task.get("refresh_interval", 1_000_000))
    modes = canonical_modes(task["mode_max"])
    times = task["times"]
    out = np.zeros((len(times), len(modes)), dtype=np.complex128)
    for i, t in enumerate(times):
        sim.run_to(t)
        ch = sim.x_coeff()
        side = torus.side
        for j, (w1, w2) in enumerate(modes):
            out[i, j] = ch[w1 % side, w2 % side]
    _cache_store(task.get("cache_dir"), key, out)
    return out


def spde_replica_task(task):
    key = _digest(task)
    cached = _cache_fetch(task.get("cache_dir"), key)
    if cached is not None:
        return cached
    cfg = SpdeConfig(
        n=task["n"], beta_c=task["beta_c"], a1=task["a1"], a3=task["a3"],
        mode_cutoff=task["mode_cutoff"], dt=task["dt"], t_end=task["times"][-1])
    _, snaps = solve(cfg, seed=replica_seed(task["seed"], task["replica"]),
                     output_times=task["times"])
    modes = canonical_modes(task["mode_max"])
    times = task["times"]
    out = np.zeros((len(times), len(modes)), dtype=np.complex128)
    by_time = {round(s.macro_time, 9): s for s in snaps}
    for i, t in enumerate(times):
        snap = by_time[round(t, 9)]
        side = snap.side
        for j, (w1, w2) in enumerate(modes):
            out[i, j] = snap.fourier[w1 % side, w2 % side]
    _cache_store(task.get("cache_dir"), key, out)
    return out


def _n_workers(workers=None):
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("KACBC_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def run_tasks(fn, tasks, workers=None):
    workers = _n_workers(workers)
    if workers == 1 or len(tasks) == 1:
        return [fn(t) for t in tasks]
    import multiprocessing as mp

    with mp.get_context("fork").Pool(workers) as pool:
        return pool.map(fn, tasks, chunksize=1)


def run_micro_ensemble(regime, gamma, times, n_replicas, seed, mode_max=4,
                       a_c=1.0, frak_a1=0.0, frak_a3=0.0, init="zero",
                       mode="real", profile_id="poly_ring", workers=None,
                       cache_dir=None):
    base = dict(regime=regime, gamma=gamma, times=list(times), seed=seed,
                mode_max=mode_max, a_c=a_c, frak_a1=frak_a1, frak_a3=frak_a3,
                init=init, mode=mode, profile_id=profile_id,
                cache_dir=cache_dir)
    tasks = [dict(base, replica=r) for r in range(n_replicas)]
    res = run_tasks(micro_replica_task, tasks, workers)
    return np.stack(res)      # (replica, time, mode)


def run_spde_ensemble(n, beta_c, a1, a3, times, n_paths, seed, mode_max=4,
                      mode_cutoff=32, dt=1e-3, workers=None, cache_dir=None):
    base = dict(n=n, beta_c=beta_c, a1=a1, a3=a3, times=list(times), seed=seed,
                mode_max=mode_max, mode_cutoff=mode_cutoff, dt=dt,
                cache_dir=cache_dir)
    tasks = [dict(base, replica=r) for r in range(n_paths)]
    res = run_tasks(spde_replica_task, tasks, workers)
    return np.stack(res)
