"""Time the numba kernels against their numpy fallbacks and check they agree.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--pairs 1000000] [--n 4000]

Both paths are called directly, so IDSLAB_NO_JIT does not matter here.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from idslab import kernels
from idslab._accel import HAVE_NUMBA


def best_of(fn, repeat):
    fn()  # warm-up (numba compile or cache load)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def tridiagonal_band(n, rng):
    band = np.zeros((n, 3))
    band[:, 0] = rng.uniform(0, 4, n)
    band[:-1, 1] = -1.0
    band[:-2, 2] = rng.choice([0.0, -1.0], n - 2, p=[0.9, 0.1])
    return band


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--pairs", type=int, default=1_000_000, help="edge pairs to hash")
    ap.add_argument("--n", type=int, default=4000, help="rows of the banded matrix")
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(0)
    a = rng.integers(-10**6, 10**6, size=(args.pairs, 2))
    b = a + rng.integers(1, 20, size=(args.pairs, 2))
    h = kernels.fnv_fold_np(a, b)
    band = tridiagonal_band(args.n, rng)

    cases = [
        ("fnv_fold", lambda: kernels.fnv_fold_np(a, b), lambda: kernels.fnv_fold_nb(a, b)),
        ("mix_uniform", lambda: kernels.mix_uniform_np(7, h), lambda: kernels.mix_uniform_nb(np.uint64(7), h)),
        ("band_negcount", lambda: kernels.band_negcount_np(band, 2.0, 1e-300),
         lambda: tuple(kernels.band_negcount_nb(band, 2.0, 1e-300))),
    ]
    print(f"{'kernel':<15}{'numpy [s]':>12}{'numba [s]':>12}{'speed-up':>10}  agree")
    for name, f_np, f_nb in cases:
        t_np, r_np = best_of(f_np, args.repeat)
        t_nb, r_nb = best_of(f_nb, args.repeat)
        if isinstance(r_np, np.ndarray):
            same = np.array_equal(r_np, r_nb)
        else:
            same = int(r_np[0]) == int(r_nb[0]) and bool(r_np[1]) == bool(r_nb[1])
        print(f"{name:<15}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>10.1f}  {same}")


if __name__ == "__main__":
    main()
