"""Benchmark: compiled event-loop core against the pure-Python fallback.

Run as `python -m kacbc.bench [gamma]`.  Also used to sanity-check that the
two cores produce identical trajectories on the benchmark workload.
"""

import sys
import time

import numpy as np

from .glauber import COMPILED, GlauberSimulation
from .scaling import build_tuned_model


def bench(gamma=0.2, t_macro=0.05, seed=7):
    torus, kernel, params = build_tuned_model("phi4", gamma, a_c=1.0)
    rows = []
    results = {}
    for engine in ("compiled", "python"):
        if engine == "compiled" and not COMPILED:
            print("compiled core unavailable; skipping")
            continue
        sim = GlauberSimulation(torus, kernel, params, mode="real",
                                init="ptilde", seed=seed, engine=engine)
        t0 = time.perf_counter()
        sim.run_to(t_macro)
        wall = time.perf_counter() - t0
        stencil = sim.stencil[2].sum()
        rows.append((engine, sim.event_count, sim.core.flip_count, wall,
                     sim.event_count / wall,
                     sim.core.flip_count * stencil / wall))
        results[engine] = (sim.state.spins.copy(), sim.state.h.copy())
    print(f"gamma={gamma}  N={torus.n}  side={torus.side}  "
          f"stencil={int(sim.stencil[2].sum())} sites")
    print(f"{'engine':<10}{'events':>10}{'flips':>10}{'wall s':>10}"
          f"{'events/s':>12}{'site-upd/s':>14}")
    for engine, ev, fl, wall, eps, ups in rows:
        print(f"{engine:<10}{ev:>10}{fl:>10}{wall:>10.3f}{eps:>12.0f}{ups:>14.2e}")
    if len(results) == 2:
        same = (np.array_equal(*[results[e][0] for e in ("compiled", "python")])
                and np.array_equal(*[results[e][1] for e in ("compiled", "python")]))
        print("trajectories bit-identical:", same)
        if len(rows) == 2:
            print(f"speedup: {rows[1][3] / rows[0][3]:.1f}x")


if __name__ == "__main__":
    bench(float(sys.argv[1]) if len(sys.argv) > 1 else 0.2)
