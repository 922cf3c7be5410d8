"""Time each hot kernel under its numba and numpy implementations.

    python benchmarks/bench_kernels.py [--points 2000] [--repeat 5]

Both variants are imported directly, so ROIPOSE_BACKEND has no effect here.
"""
import argparse
import time

import numpy as np

from roipose import kernels


def best_of(fn, args, repeat):
    fn(*args)  # warm-up; triggers numba compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    a = rng.standard_normal((args.points, 3))
    b = rng.standard_normal((args.points, 3))
    e = rng.normal(0.0, 2.0, 24 * args.points)
    cases = [
        ("min_distances (ADD-S)", "_min_distances", (a, b)),
        ("max_pairwise_distance (diameter)", "_max_pairwise_distance", (a,)),
        ("smooth_l1_terms", "_smooth_l1_terms", (e,)),
    ]
    print(f"{'kernel':36s} {'numba [ms]':>12s} {'numpy [ms]':>12s} {'speedup':>8s}")
    for label, stem, data in cases:
        t_nb = best_of(getattr(kernels, stem + "_numba"), data, args.repeat)
        t_np = best_of(getattr(kernels, stem + "_numpy"), data, args.repeat)
        print(f"{label:36s} {t_nb * 1e3:12.3f} {t_np * 1e3:12.3f} {t_np / t_nb:8.2f}")


if __name__ == "__main__":
    main()
