"""Compare the numba and numpy paths of the two hot kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

The radial-profile kernel inverts the tortoise coordinate on a grid; the
Cayley kernel advances a spinor field through block-tridiagonal solves.
Both paths run in one process (selected by ``accelerated=``); the first
numba call is timed separately as compile time.
"""
import argparse
import time

import numpy as np

from sads_dirac import SpacetimeParams, geometry
from sads_dirac._jit import HAVE_NUMBA
from sads_dirac.dirac import RadialGrid, SpinorField, assemble_H
from sads_dirac.evolution import EvolutionState, Evolver


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_profile(params, n, repeat):
    x = -np.geomspace(1e-6, 50.0, n)
    out = {}
    for acc in (True, False) if HAVE_NUMBA else (False,):
        t0 = time.perf_counter()
        geometry.radial_profile(x, params, accelerated=acc)
        first = time.perf_counter() - t0
        out[acc] = (first, _best(lambda: geometry.radial_profile(x, params, accelerated=acc), repeat))
    return out


def bench_cayley(params, n, steps, repeat):
    g = RadialGrid(-3.0, -1e-3, n)
    H = assemble_H(g, params)
    f = SpinorField(g, np.exp(-((g.x + 0.5) ** 2) / 0.02)[:, None] * np.array([1, 1j, -1, 0.5]))
    out = {}
    for acc in (True, False) if HAVE_NUMBA else (False,):
        ev = Evolver(H, 0.01, accelerated=acc)
        t0 = time.perf_counter()
        ev.advance(EvolutionState(f), steps)
        first = time.perf_counter() - t0
        out[acc] = (first, _best(lambda: ev.advance(EvolutionState(f), steps), repeat))
    return out


def _print(name, res):
    for acc, (first, best) in res.items():
        label = "numba" if acc else "numpy"
        print(f"{name:<28} {label:<6} first {first:9.4f} s   best {best:9.4f} s")
    if len(res) == 2:
        print(f"{name:<28} speedup {res[False][1] / res[True][1]:.1f}x")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--profile-n", type=int, default=100_000)
    ap.add_argument("--grid-n", type=int, default=4000)
    ap.add_argument("--steps", type=int, default=500)
    args = ap.parse_args(argv)
    p = SpacetimeParams(0.05, 1.0, 2.0, 0.1)
    print(f"numba available: {HAVE_NUMBA}")
    _print(f"radial_profile n={args.profile_n}", bench_profile(p, args.profile_n, args.repeat))
    _print(f"cayley n={args.grid_n} x {args.steps}", bench_cayley(p, args.grid_n, args.steps, args.repeat))


if __name__ == "__main__":
    main()
