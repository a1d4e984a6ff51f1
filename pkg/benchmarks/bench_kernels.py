"""Compiled versus pure-Python kernels: gain, loss convolution and advection.

Run ``python3 benchmarks/bench_kernels.py [--n-v 12] [--batch 64] [--repeat 3]``.
Prints one line per kernel with the best wall time of each backend, the
speed-up and the maximum absolute difference of the outputs.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from kml import _kernels
from kml.collision import CollisionConfig, gain_array, potential_array
from kml.discretization import PhaseGrid, SpatialGrid, SphereQuadrature, VelocityGrid
from kml.kinematics import KernelSpec
from kml.transport import advect_array


def best_of(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--n-v", type=int, default=12)
    ap.add_argument("--n-x", type=int, default=6)
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    if _kernels.compiled_backend is None:
        print("compiled extension not built; only the python backend is available")
        return 1
    rng = np.random.default_rng(0)
    vg = VelocityGrid(3.0, args.n_v)
    cfg = CollisionConfig(KernelSpec.parse("-1"), SphereQuadrature(1, 4))
    f = rng.random((args.batch,) + (args.n_v,) * 3)
    g = rng.random((args.batch,) + (args.n_v,) * 3)
    gain_array(f[:1], g[:1], vg, cfg)  # build the stencil outside the timing

    grid = PhaseGrid(SpatialGrid(4.0, args.n_x), vg)
    a = rng.random((8,) + grid.shape)
    times = np.linspace(0.1, 1.0, 8)

    cases = {
        "gain": lambda b: gain_array(f, g, vg, cfg, backend=b),
        "loss-convolution": lambda b: potential_array(g, vg, -1.0, backend=b),
        "advection": lambda b: _advect(a, times, grid, b),
    }
    print(f"n_v={args.n_v} n_x={args.n_x} batch={args.batch} repeat={args.repeat}")
    print(f"{'kernel':<18}{'compiled [s]':>14}{'python [s]':>14}{'speed-up':>10}{'max |diff|':>14}")
    for name, fn in cases.items():
        tc, oc = best_of(lambda: fn("compiled"), args.repeat)
        tp, op = best_of(lambda: fn("python"), args.repeat)
        diff = float(np.max(np.abs(oc - op)))
        print(f"{name:<18}{tc:>14.4f}{tp:>14.4f}{tp / tc:>10.1f}{diff:>14.2e}")
    return 0


def _advect(a, times, grid, backend):
    return advect_array(a, times, grid, backend=backend)


if __name__ == "__main__":
    raise SystemExit(main())
