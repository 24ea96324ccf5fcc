"""Compare the compiled and pure-Python trajectory integrators.

Usage::

    python benchmarks/bench_kernels.py [--trajectories N] [--duration S] [--repeat R]

Prints wall-clock time per backend, the speed-up, and whether both backends
produced bit-identical records.
"""

import argparse
import time
import warnings

import numpy as np

from strobeqnd.dynamics import DynamicsConfig, EnsembleParams, StrobeWaveform, simulate_record
from strobeqnd.kernels import BACKENDS


def bench(backend, cfg, params, strobe, n_traj, repeat):
    best = np.inf
    rec = None
    for _ in range(repeat):
        start = time.perf_counter()
        rec = simulate_record(cfg, params, strobe, n_traj, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best, rec


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trajectories", type=int, default=8)
    ap.add_argument("--duration", type=float, default=1e-3)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    cfg = DynamicsConfig(duration=args.duration, seed=1)
    params = EnsembleParams(P0=0.85)
    strobe = StrobeWaveform(duty=0.1)
    steps = cfg.n_samples * args.trajectories
    print(f"{args.trajectories} trajectories x {cfg.n_samples} steps, best of {args.repeat}")
    times, records = {}, {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for name in sorted(BACKENDS):
            times[name], records[name] = bench(name, cfg, params, strobe, args.trajectories, args.repeat)
            print(f"  {name:8s} {times[name]:8.3f} s  {steps / times[name] / 1e6:8.2f} Msteps/s")
    if len(times) == 2:
        a, b = records["cython"], records["python"]
        same = all(np.array_equal(getattr(a, k), getattr(b, k)) for k in ("Mx", "My", "Fx", "Fy", "Fz"))
        print(f"  speed-up {times['python'] / times['cython']:.1f}x, identical output: {same}")
    else:
        print("  compiled kernel not built; only the pure-Python backend is available")


if __name__ == "__main__":
    main()
