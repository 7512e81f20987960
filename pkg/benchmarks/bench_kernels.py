"""Compiled vs pure-Python Taylor propagation on the full atom-cavity Liouvillian.

Usage::

    python benchmarks/bench_kernels.py --n-max 32 --steps 200 --repeat 3
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mollow_cavity import _kernels
from mollow_cavity.lindblad import steady_state, system_liouvillian, trajectory
from mollow_cavity.quantum_core import device_params
from mollow_cavity.spectrum import _atom_lower, _regression_source, default_grid, fft_time_step


def bench(backend, L, x0, obs, dt, steps, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out, _ = trajectory(L, x0, obs, dt, steps, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-max", type=int, default=32)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    p = device_params(n_max=args.n_max)
    L = system_liouvillian(p)
    rho = steady_state(L)
    x0, obs, _ = _regression_source(L, rho, _atom_lower(L.dim))
    dt = fft_time_step(p, default_grid(p))
    print(f"Liouvillian {L.superoperator.shape[0]} x {L.superoperator.shape[0]}, nnz {L.superoperator.nnz}, "
          f"{args.steps} steps of {dt:.3e} s")

    results = {}
    for name in sorted(_kernels.BACKENDS):
        t, samples = bench(name, L, x0, obs, dt, args.steps, args.repeat)
        results[name] = samples
        print(f"  {name:9s} {t:8.3f} s")
    if len(results) == 2:
        a, b = results["compiled"], results["python"]
        diff = np.abs(a - b).max() / np.abs(b).max()
        print(f"  max relative difference between backends: {diff:.2e}")
    else:
        print("  compiled backend unavailable; build with Cython to compare")


if __name__ == "__main__":
    main()
