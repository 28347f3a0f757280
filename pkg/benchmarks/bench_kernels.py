"""Compare the compiled kernels with the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--N 64] [--repeat 5]

Prints the best wall time of each kernel per backend and the speedup.
"""
import argparse
import timeit

import numpy as np

from hallspec import kernels


def cases(N, rng):
    c = rng.standard_normal((3, N, N, N)) + 1j * rng.standard_normal((3, N, N, N))
    k = np.fft.fftfreq(N, 1.0 / N)
    a = rng.standard_normal((3, N ** 3))
    b = rng.standard_normal((3, N ** 3))
    acc = np.zeros(N ** 3)
    return {
        "leray_project": lambda be: kernels.leray_project(c, k, k, k, backend=be),
        "cross": lambda be: kernels.cross(a, b, backend=be),
        "norm_pow_sum p=3": lambda be: kernels.norm_pow_sum(a, 3.0, backend=be),
        "norm_max": lambda be: kernels.norm_max(a, backend=be),
        "lr_accumulate r=1.5": lambda be: kernels.lr_accumulate(acc, a, 0.5, 1.5, backend=be),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])
    print(f"N={args.N}, backends: {', '.join(backends)}")
    print(f"{'kernel':<22}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in cases(args.N, np.random.default_rng(0)).items():
        times = [min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat)) for b in backends]
        speed = f"{times[0] / times[1]:>9.2f}x" if len(times) == 2 else ""
        print(f"{name:<22}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times) + speed)


if __name__ == "__main__":
    main()
