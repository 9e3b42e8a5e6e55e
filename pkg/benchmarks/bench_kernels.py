"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py
    python benchmarks/bench_kernels.py --pipeline   # also one full run per backend

The first numba call (compilation, or loading the on-disk cache) is done
before timing starts.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from cauda import kernels
from cauda._accel import HAVE_NUMBA


def cases(rng, scale):
    n = 2000 * scale
    x = rng.standard_normal((n, 32))
    c = rng.standard_normal((8, 32))
    labels = rng.integers(0, 8, n)
    small = rng.standard_normal((64, 32))
    c8, c64 = rng.random((8, 8)), rng.random((64, 64))
    return {
        "lsap 8x8": lambda f: f(c8),
        "lsap 64x64": lambda f: f(c64),
        f"nearest_centroid {n}x32, k=8": lambda f: f(x, c),
        f"cluster_sums {n}x32, k=8": lambda f: f(x, labels, 8),
        "sq_dists 64x64x32": lambda f: f(small, small),
    }


PAIRS = {
    "lsap": (kernels.lsap_nb, kernels.lsap_np),
    "nearest_centroid": (kernels.nearest_centroid_nb, kernels.nearest_centroid_np),
    "cluster_sums": (kernels.cluster_sums_nb, kernels.cluster_sums_np),
    "sq_dists": (kernels.sq_dists_nb, kernels.sq_dists_np),
}


def best_of(call, repeat, number):
    return min(timeit.repeat(call, repeat=repeat, number=number)) / number


def bench_kernels(repeat, scale):
    rng = np.random.default_rng(0)
    print(f"{'kernel':<36}{'numba us':>12}{'numpy us':>12}{'speedup':>10}")
    for name, case in cases(rng, scale).items():
        nb_fn, np_fn = PAIRS[name.split()[0]]
        case(nb_fn)  # warm-up / compile
        number = 20
        t_nb = best_of(lambda: case(nb_fn), repeat, number)
        t_np = best_of(lambda: case(np_fn), repeat, number)
        print(f"{name:<36}{1e6 * t_nb:>12.1f}{1e6 * t_np:>12.1f}{t_np / t_nb:>9.1f}x")


def bench_pipeline():
    code = ("import time; from cauda import pipeline, kernels; from cauda.config import RunConfig;"
            "t = time.perf_counter(); r = pipeline.run(RunConfig());"
            "print(kernels.backend(), round(time.perf_counter() - t, 2), r.final.accuracy)")
    for flag in ("0", "1"):
        env = dict(os.environ, CAUDA_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                             text=True, check=True).stdout.split()
        print(f"full run, backend {out[0]:<6} {out[1]:>7}s  target accuracy {out[2]}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=int, default=1, help="multiplies the sample count")
    ap.add_argument("--pipeline", action="store_true", help="also time one default run per backend")
    args = ap.parse_args()
    if not HAVE_NUMBA:
        sys.exit("numba is disabled or missing; nothing to compare")
    bench_kernels(args.repeat, args.scale)
    if args.pipeline:
        bench_pipeline()


if __name__ == "__main__":
    main()
