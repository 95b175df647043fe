"""Command-line interface.

Subcommands: tune, kernel-check, simulate, solve-spde, observables,
compare, verify.  Shared flags: --config (TOML), --seed, --workers, --out.
KACBC_WORKERS overrides the worker count.  All numeric output is JSON/CSV,
locale independent.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import runio
from .fields import besov_norm, wick_powers
from .lattice import Torus, build_kac_kernel, build_mother_kernel, verify_kernel_estimates
from .scaling import (Regime, build_tuned_model, critical_beta,
                      renormalization_constant)


def _common(parser):
    parser.add_argument("--config", type=Path, help="TOML configuration file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--out", type=Path, default=Path("."))


def _load(args, required=("gamma",)):
    if args.config is None:
        raise SystemExit("--config is required for this subcommand")
    cfg = runio.load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def cmd_tune(args):
    cfg = _load(args)
    torus, kernel, params = build_tuned_model(
        cfg["regime"], cfg["gamma"], a_c=cfg["a_c"],
        frak_a1=cfg["frak_a1"], frak_a3=cfg["frak_a3"],
        profile_id=cfg["profile_id"])
    co = params.coefficients()
    out = {
        "a": params.a, "beta": params.beta, "theta": params.theta,
        "A": co.a_lin, "B": co.b_cub, "C": co.c_qui,
        "c_gamma": params.c_gamma_renorm,
        "residuals": list(params.tuning_residuals()),
        "n": torus.n, "eps": torus.eps,
    }
    print(json.dumps(out, indent=1))
    return 0


def cmd_kernel_check(args):
    cfg = _load(args)
    regime = Regime(cfg["regime"])
    torus = Torus(regime.torus_n(cfg["gamma"]))
    kernel = build_kac_kernel(cfg["gamma"], torus,
                              build_mother_kernel(cfg["profile_id"]))
    report = verify_kernel_estimates(kernel, regime.b_freq)
    cg, creport = renormalization_constant(kernel, regime,
                                           critical_beta(cfg["a_c"]))
    report["renormalization"] = creport
    args.out.mkdir(parents=True, exist_ok=True)
    runio.write_kernel(args.out / "kernel.f64", kernel)
    print(json.dumps(report, indent=1, default=float))
    return 0


def cmd_simulate(args):
    from .glauber import GlauberSimulation

    cfg = _load(args)
    t0 = time.time()
    out_dir = args.out
    out_dir.mkdir(parents=True, exist_ok=True)
    torus, kernel, params = build_tuned_model(
        cfg["regime"], cfg["gamma"], a_c=cfg["a_c"],
        frak_a1=cfg["frak_a1"], frak_a3=cfg["frak_a3"],
        profile_id=cfg["profile_id"])
    files = []
    stats_rows = ["replica,events,flips,t_macro,triggered_at"]
    mismatch_rows = ["replica,initial_fraction,updates,mismatches,rate"]
    for r in range(cfg["replicas"]):
        seed = runio.replica_seed(cfg["seed"], r)
        sim = GlauberSimulation(
            torus, kernel, params, mode=cfg["mode"], init=cfg["init"],
            seed=seed, refresh_interval=cfg["refresh_interval"],
            stop_mfrak=cfg["stop_mfrak"] if cfg["stop_enabled"] else None,
            stop_nu=cfg["stop_nu"], stop_check_dt=cfg["stop_check_dt"])
        from .fields import rescale_field
        for t in cfg["snapshot_times"]:
            sim.run_to(t)
            snap = rescale_field(sim.state, params, micro_time=sim.core.t_micro)
            p = out_dir / f"snapshot_r{r:04d}_t{t:g}.c16"
            runio.write_snapshot(p, snap, seed=cfg["seed"])
            files.append(p)
            files.append(p.with_suffix(p.suffix + ".json"))
        stats_rows.append(f"{r},{sim.event_count},{sim.core.flip_count},"
                          f"{sim.t_macro},{sim.triggered_at}")
        if cfg["mode"] == "coupled":
            n_up = sim.core.update_count
            n_mis = sim.core.mismatch_updates
            mismatch_rows.append(f"{r},{sim.initial_mismatch_fraction},"
                                 f"{n_up},{n_mis},{n_mis / max(n_up, 1)}")
    (out_dir / "event_stats.csv").write_text("\n".join(stats_rows) + "\n")
    files.append(out_dir / "event_stats.csv")
    if cfg["mode"] == "coupled":
        (out_dir / "coupling_mismatch.csv").write_text("\n".join(mismatch_rows) + "\n")
        files.append(out_dir / "coupling_mismatch.csv")
    runio.write_manifest(out_dir, cfg, files, time.time() - t0)
    print(f"wrote {len(files)} files to {out_dir}")
    return 0


def cmd_solve_spde(args):
    from .spde import SpdeConfig, solve

    cfg = _load(args)
    t0 = time.time()
    out_dir = args.out
    out_dir.mkdir(parents=True, exist_ok=True)
    n = 2 if cfg["regime"] == "phi4" else 3
    beta_c = critical_beta(cfg["a_c"]) if n == 2 else 3.0
    from .scaling import phi4_cubic_coefficient
    a3 = phi4_cubic_coefficient(cfg["a_c"]) if n == 2 else cfg["frak_a3"]
    scfg = SpdeConfig(n=n, beta_c=beta_c, a1=cfg["frak_a1"], a3=a3,
                      mode_cutoff=cfg.get("mode_cutoff", 32),
                      dt=cfg.get("dt", 1e-3), t_end=cfg["t_end"])
    files = []
    sched_rows = ["t,c_t,bar_c,a1_t,a3_t"]
    for r in range(cfg["replicas"]):
        solver, snaps = solve(scfg, seed=runio.replica_seed(cfg["seed"], r),
                              output_times=cfg["snapshot_times"])
        for snap in snaps:
            p = out_dir / f"spde_r{r:04d}_t{snap.macro_time:g}.c16"
            runio.write_snapshot(p, snap, seed=cfg["seed"])
            files.extend([p, p.with_suffix(p.suffix + ".json")])
        if r == 0:
            for rec in solver.schedule_records():
                sched_rows.append(f"{rec['t']},{rec['c_t']},{rec.get('bar_c', '')},"
                                  f"{rec['a1_t']},{rec['a3_t']}")
    (out_dir / "schedule.csv").write_text("\n".join(sched_rows) + "\n")
    files.append(out_dir / "schedule.csv")
    runio.write_manifest(out_dir, cfg, files, time.time() - t0)
    print(f"wrote {len(files)} files to {out_dir}")
    return 0


def cmd_observables(args):
    rows = ["file,macro_time,besov_nu,besov_value,mean,l2,sup"]
    nu = 0.25
    for p in sorted(args.out.glob("*.c16")):
        snap = runio.read_snapshot(p)
        grid = snap.grid()
        est = besov_norm(snap, nu)
        rows.append(f"{p.name},{snap.macro_time},{nu},{est.value},"
                    f"{grid.mean()},{np.sqrt((grid**2).mean())},{np.abs(grid).max()}")
    text = "\n".join(rows) + "\n"
    (args.out / "observables.csv").write_text(text)
    print(text, end="")
    return 0


def cmd_compare(args):
    from .compare import report_csv, report_json, run_sweep

    cfg = _load(args)
    gammas = cfg.get("gamma_list", [cfg["gamma"]])
    result = run_sweep(
        cfg["regime"], gammas, cfg["snapshot_times"],
        n_replicas=cfg["replicas"], spde_paths=cfg.get("spde_paths", 100),
        seed=cfg["seed"], mode_max=cfg.get("mode_max", 2), a_c=cfg["a_c"],
        frak_a1=cfg["frak_a1"], frak_a3=cfg["frak_a3"],
        workers=args.workers, cache_dir=cfg.get("cache_dir"))
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "comparison.json").write_text(report_json(result))
    (args.out / "comparison.csv").write_text(report_csv(result))
    print(report_json(result))
    return 0 if result["all_pass"] else 1


def cmd_verify(args):
    bad = runio.verify_manifest(args.out)
    if bad:
        print("\n".join(bad))
        return 1
    print("manifest ok")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(prog="kacbc")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in [
        ("tune", cmd_tune), ("kernel-check", cmd_kernel_check),
        ("simulate", cmd_simulate), ("solve-spde", cmd_solve_spde),
        ("observables", cmd_observables), ("compare", cmd_compare),
        ("verify", cmd_verify),
    ]:
        p = sub.add_parser(name)
        _common(p)
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
