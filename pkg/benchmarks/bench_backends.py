"""Time Gram and cross-kernel builds on the compiled and numpy backends.

    python benchmarks/bench_backends.py [--n 200] [--rank 3] [--dims 21,21,21] [--repeats 5]
"""
from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from tec.kernels import BACKENDS, KernelSpec, cross_kernel, gram_matrix
from tec.tensor import CpTensor


def _data(rng, n, dims, rank):
    return [CpTensor([rng.normal(size=(i, rank)) for i in dims]) for _ in range(n)]


def _time(fn, repeats):
    fn()
    runs = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        runs.append(time.perf_counter() - t0)
    return statistics.median(runs)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--rank", type=int, default=3)
    ap.add_argument("--dims", default="21,21,21")
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args(argv)
    dims = tuple(int(v) for v in args.dims.split(","))
    rng = np.random.default_rng(0)
    train = _data(rng, args.n, dims, args.rank)
    test = _data(rng, args.n // 3, dims, args.rank)
    spec = KernelSpec(bandwidth=float(np.sqrt(2 * max(dims))))

    print(f"n={args.n} rank={args.rank} dims={dims} median of {args.repeats}")
    print(f"{'backend':<10} {'gram (s)':>10} {'cross (s)':>10}")
    times = {}
    for name in sorted(BACKENDS):
        g = _time(lambda: gram_matrix(train, spec, name), args.repeats)
        c = _time(lambda: cross_kernel(test, train, spec, name), args.repeats)
        times[name] = (g, c)
        print(f"{name:<10} {g:>10.4f} {c:>10.4f}")
    if "compiled" in times:
        gp, cp = times["python"]
        gc, cc = times["compiled"]
        print(f"speedup    {gp / gc:>9.1f}x {cp / cc:>9.1f}x")
        ref = gram_matrix(train, spec, "python").values
        diff = np.max(np.abs(gram_matrix(train, spec, "compiled").values - ref)) / np.max(ref)
        print(f"max relative difference {diff:.1e}")
    else:
        print("compiled extension not built; only the numpy backend was timed")


if __name__ == "__main__":
    main()
