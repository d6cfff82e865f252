"""Compare the numba-accelerated kernels against the pure-numpy fallback.

Run twice:

    python3 benchmarks/bench_kernels.py
    ROUGHFILTER_NO_NUMBA=1 python3 benchmarks/bench_kernels.py

or let the script spawn its own fallback run with --both.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np


def bench(fn, *args, repeat=5, warmup=1):
    for _ in range(warmup):
        fn(*args)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--both", action="store_true",
                        help="also run the ROUGHFILTER_NO_NUMBA=1 fallback")
    args = parser.parse_args()

    from roughfilter._accel import USING_NUMBA
    from roughfilter.lift import hybrid_lift_batch, increment_power_matrix, lift_segmentwise
    from roughfilter.variation import SampledFunction1D, dp_over_matrix, p_variation
    from roughfilter.volterra import VolterraKernel, sample_joint_arrays

    backend = "numba" if USING_NUMBA else "numpy-fallback"
    rng = np.random.default_rng(0)

    n = 1024
    f = SampledFunction1D(np.linspace(0, 1, n), rng.standard_normal((n, 2)))
    t_pvar = bench(p_variation, f, 2.5)

    D = np.abs(rng.standard_normal((513, 513)))
    t_dp = bench(dp_over_matrix, D)

    k = VolterraKernel("mvn", H=0.4)
    fine = np.linspace(0, 1, 513)
    W, B, _ = sample_joint_arrays(k, fine, 1, 1, 256, seed=1)
    paths = np.concatenate([B, W], axis=1)
    t_hyb2 = bench(hybrid_lift_batch, fine, paths, ((0, 1),), 2, 8)
    t_hyb3 = bench(hybrid_lift_batch, fine, paths[:32], ((0, 1),), 3, 8)

    lift = lift_segmentwise(fine[::4], B[0, :, ::4].T, 2)
    t_pm = bench(increment_power_matrix, lift, 2.5)

    print(f"backend: {backend}")
    print(f"{'kernel':<42}{'best (ms)':>12}")
    rows = [
        ("p-variation DP (n=1024, d=2)", t_pvar),
        ("DP over norm matrix (513^2)", t_dp),
        ("hybrid lift level 2 (256 x 64 x 8)", t_hyb2),
        ("hybrid lift level 3 (32 x 64 x 8)", t_hyb3),
        ("increment power matrix (129 pts)", t_pm),
    ]
    for name, val in rows:
        print(f"{name:<42}{1e3 * val:>12.2f}")

    if args.both and USING_NUMBA:
        print()
        env = dict(os.environ, ROUGHFILTER_NO_NUMBA="1")
        subprocess.run([sys.executable, __file__], env=env, check=True)


if __name__ == "__main__":
    main()
