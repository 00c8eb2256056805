"""Time the numba and numpy backends of the hot kernels.

    python benchmarks/bench_kernels.py [--repeat 5]

The numba column excludes compilation: each kernel is called once before timing.
"""

import argparse
import statistics
import time

import numpy as np
import scipy.sparse as sp

from dissgadgets import _accel, kernels
from dissgadgets.classical import initializer_generator


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), statistics.median(times)


def cases():
    rng = np.random.default_rng(0)
    a = rng.uniform(1.0, 1e5, 20000)
    x = a * rng.uniform(0.5, 1.5, a.size)
    n = rng.integers(2, 5000, 2000)
    xp = n * rng.uniform(0.5, 1.5, n.size)
    gen = initializer_generator(400, 1.0, 2.0)
    lam = gen.max_exit_rate()
    P = sp.csr_matrix(sp.identity(gen.size) + gen.Q / lam)
    p0 = np.zeros(gen.size)
    p0[-1] = 1.0
    return [
        ("gamma_pq (20000 points)", lambda: kernels.gamma_pq_numpy(a, x), lambda: kernels.gamma_pq_numba(a, x)),
        (
            "poisson_upper (2000 points)",
            lambda: kernels.poisson_upper_numpy(n, xp),
            lambda: kernels.poisson_upper_numba(n, xp),
        ),
        (
            f"uniformize ({gen.size} states, t=20)",
            lambda: kernels.uniformize_numpy(P, lam, p0, 20.0, 1e-12),
            lambda: kernels.uniformize_numba(P, lam, p0, 20.0, 1e-12),
        ),
    ]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; only the numpy backend is available")
    print(f"{'kernel':36s} {'numpy best':>12s} {'numba best':>12s} {'speedup':>8s}")
    for name, f_np, f_nb in cases():
        t_np, _ = best_of(f_np, args.repeat)
        t_nb, _ = best_of(f_nb, args.repeat)
        print(f"{name:36s} {t_np * 1e3:10.2f}ms {t_nb * 1e3:10.2f}ms {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
