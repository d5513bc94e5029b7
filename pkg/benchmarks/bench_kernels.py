#!/usr/bin/env python3
"""Time the hot kernels on the compiled and pure-Python backends.

Runs the forward RK4 sweep and the backward costate sweep on a
paper-sized grid (91 days at h = 0.1) plus a full optimal-control solve,
and reports per-call times and the compiled/python speedup.

    python3 benchmarks/bench_kernels.py [--repeat N] [--steps N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from seirctl import _core_py

try:
    from seirctl import _core
except ImportError:
    _core = None

PARAMS = np.array([1.1775e-7, 3.97, 0.0048, 0.1432,
                   0.0181, 0.8111, 6.9882, 0.00062, 0.0233, 54.0351])
N_POP = 60_461_826.0
X0 = np.array([60_133_649.0, 53_311.0, 4_677.0,
               26_754.0, 207_944.0, 35_491.0, 0.0])
WEIGHTS = np.ones(3)
H = 0.1


def best_of(repeat, fn, *args):
    """Minimum wall time over `repeat` calls (less noise than the mean)."""
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_backend(mod, n_steps, repeat):
    rng = np.random.default_rng(42)
    u = np.empty((n_steps + 1, 3))
    u[:, 0] = rng.uniform(0.1, 1.0, n_steps + 1)
    u[:, 1:] = rng.uniform(0.0, 1.0, (n_steps + 1, 2))

    t_fwd = best_of(repeat, mod.sim_forward, X0, 0.0, H, n_steps, PARAMS, N_POP, u)
    xs, fs = mod.sim_forward(X0, 0.0, H, n_steps, PARAMS, N_POP, u)
    psi_f = np.zeros(7)
    t_bwd = best_of(
        repeat, mod.adjoint_backward,
        psi_f, 0.0, H, n_steps, xs, fs, u, PARAMS, WEIGHTS, N_POP, 0,
    )
    return t_fwd, t_bwd


def bench_fbsm(backend_name, repeat):
    """Full forward-backward solve through the public API."""
    import importlib
    import os

    os.environ["SEIRCTL_BACKEND"] = backend_name
    import seirctl._backend
    import seirctl.control
    import seirctl.integrate
    import seirctl.model
    importlib.reload(seirctl._backend)
    importlib.reload(seirctl.integrate)
    importlib.reload(seirctl.model)
    importlib.reload(seirctl.control)
    from seirctl.control import CostWeights, FbsmOptions, solve_fbsm
    from seirctl.integrate import TimeGrid
    from seirctl.model import ControlBounds, ModelParams, PopulationConstant

    params = ModelParams(*PARAMS)
    grid = TimeGrid(0.0, 91.0, H)
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        sol = solve_fbsm(
            params, X0, CostWeights(),
            ControlBounds((0.1, 0.0, 0.0), (1.0, 1.0, 1.0)),
            grid, FbsmOptions(), PopulationConstant(N_POP),
        )
        best = min(best, time.perf_counter() - start)
    os.environ.pop("SEIRCTL_BACKEND", None)
    return best, sol.iterations


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--steps", type=int, default=910,
                    help="forward grid steps (default: 91 days at h = 0.1)")
    args = ap.parse_args(argv)

    print(f"grid: {args.steps} steps at h = {H}, best of {args.repeat}")
    rows = [("python", _core_py)]
    if _core is not None:
        rows.append(("compiled", _core))
    else:
        print("compiled extension not available; timing pure Python only")

    times = {}
    for name, mod in rows:
        t_fwd, t_bwd = bench_backend(mod, args.steps, args.repeat)
        times[name] = (t_fwd, t_bwd)
        print(f"{name:>9}  forward {t_fwd * 1e3:8.3f} ms   backward {t_bwd * 1e3:8.3f} ms")

    if "compiled" in times:
        sf = times["python"][0] / times["compiled"][0]
        sb = times["python"][1] / times["compiled"][1]
        print(f"{'speedup':>9}  forward {sf:8.1f} x    backward {sb:8.1f} x")

    print()
    print("full optimal-control solve (91 days):")
    for name in ("python", "compiled") if _core is not None else ("python",):
        t, iters = bench_fbsm(name, max(1, args.repeat // 2))
        print(f"{name:>9}  {t:8.3f} s   ({iters} sweeps)")


if __name__ == "__main__":
    main()
