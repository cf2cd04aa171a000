"""Time the numba and numpy leapfrog kernels on the default dynamics grid.

    python3 benchmarks/bench_kernels.py [--steps N] [--repeat R]
"""

import argparse
import time

import numpy as np

from kinkstab import _kernels
from kinkstab.simulator import SimConfig, discrete_kink, initial_state, sponge_profile


def setup(cfg):
    grid = cfg.grid
    Hh = discrete_kink(grid)
    lin, nl = 3 * Hh**2 - 1, Hh
    damp = np.exp(-0.5 * sponge_profile(grid, cfg.sponge_width, cfg.sponge_strength) * cfg.dt)
    st = initial_state(cfg)
    return grid, lin, nl, damp, np.array(st.phi1.values), np.array(st.phi2.values)


def bench(backend, cfg, steps, repeat):
    grid, lin, nl, damp, u0, p0 = setup(cfg)
    times = []
    out = None
    for _ in range(repeat):
        u, p = u0.copy(), p0.copy()
        acc = _kernels.force(u, lin, nl, grid.h, _kernels.PHI4, backend)
        t = time.perf_counter()
        _kernels.advance(u, p, acc, lin, nl, damp, grid.h, cfg.dt, steps, _kernels.PHI4, 0.0, backend)
        times.append(time.perf_counter() - t)
        out = u
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    cfg = SimConfig()
    n = cfg.grid.n
    # warm up the jit so compile time is not counted
    bench("numba", cfg, 2, 1)
    res = {}
    for b in ("numpy", "numba"):
        t, u = bench(b, cfg, args.steps, args.repeat)
        res[b] = (t, u)
        print(f"{b:6s} {t:8.3f} s  {1e9 * t / (args.steps * n):7.2f} ns/node/step")
    diff = np.max(np.abs(res["numpy"][1] - res["numba"][1]))
    print(f"speedup {res['numpy'][0] / res['numba'][0]:.2f}x   max |u_numpy - u_numba| = {diff:.2e}")


if __name__ == "__main__":
    main()
