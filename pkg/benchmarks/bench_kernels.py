"""Compare the numba and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--slots N] [--frames K] [--repeat R]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from dcresize import _kernels
from dcresize.arrival import Pareto, pareto_from_mean, sample_slots
from dcresize.capacity import SlaSpec, capacity_profile
from dcresize.plan import candidate_grid
from dcresize.trace import normalize_peak, synth_diurnal


def _time(fn, repeat):
    fn()  # warm-up (includes JIT compilation on the numba path)
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--slots", type=int, default=1_000_000)
    ap.add_argument("--frames", type=int, default=1008)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    x = sample_slots(Pareto(1.5, pareto_from_mean(300.0, 1.5)), args.slots, seed=0).arrivals / 1237.0
    trace = normalize_peak(synth_diurnal(args.frames, 300.0, 4.64, periods=7), 1000.0)
    floors = capacity_profile(trace, "poisson", {}, SlaSpec(0.2, 1e-3), 10.0)
    grid = candidate_grid(floors)

    cases = {
        f"delay_path ({args.slots} slots)": lambda: _kernels.delay_path(x),
        f"provisioning_dp ({args.frames} frames)": lambda: _kernels.provisioning_dp(
            grid, floors, trace.lambdas, 1.0, 0.0, 6.0, _kernels.INCREASE),
    }
    saved = _kernels.USE_NUMBA
    print(f"{'kernel':40s} {'numpy [s]':>12s} {'numba [s]':>12s} {'speed-up':>9s}")
    try:
        for name, fn in cases.items():
            times = {}
            for flag in (False, True):
                _kernels.USE_NUMBA = flag and _kernels.HAS_NUMBA
                times[flag] = _time(fn, args.repeat)
            print(f"{name:40s} {times[False]:12.4f} {times[True]:12.4f} {times[False] / times[True]:8.1f}x")
    finally:
        _kernels.USE_NUMBA = saved
    _kernels.USE_NUMBA = True
    a = _kernels.delay_path(x)
    _kernels.USE_NUMBA = False
    b = _kernels.delay_path(x)
    _kernels.USE_NUMBA = saved
    print(f"max |numba - numpy| delay gap: {float(np.max(np.abs(a - b))):.3e}")


if __name__ == "__main__":
    main()
