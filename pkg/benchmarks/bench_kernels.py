"""Benchmark the numba kernels against their pure-numpy fallbacks.

Run as ``python benchmarks/bench_kernels.py``; numba must be importable for
the compiled columns (the script times both paths explicitly, regardless of
the PROJPOST_NUMBA flag).
"""

import time

import numpy as np

from projpost import kernels
from projpost.models import build_blur_operator, build_periodic_diff, ct_instance, radon_angles, radon_offsets


def timeit(fn, *args, repeat=5, warmup=1):
    for _ in range(warmup):
        fn(*args)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_fista_dense():
    n = 128
    a = build_blur_operator(n, 0.02)
    l = build_periodic_diff(n)
    rng = np.random.default_rng(0)
    bhat = rng.standard_normal(n)
    chat = rng.standard_normal(n)
    lo = np.zeros(n)
    hi = np.ones(n)
    x0 = np.zeros(n)
    step = 0.99 / (1000.0 * a.opnorm_sq() + 150.0 * l.opnorm_sq())
    args = (a.dense, a.dense_t, bhat, l.dense, l.dense_t, chat,
            1000.0, 150.0, lo, hi, x0, step, 100, 0.0, True, 5)

    def many(impl):
        def run():
            for _ in range(50):
                impl(*args)
        return run

    t_np = timeit(many(kernels.fista_box_dense_numpy))
    row = ["fista_box_dense (n=128, 50 solves x 100 iters)", t_np, None]
    if kernels.fista_box_dense_numba is not None:
        row[2] = timeit(many(kernels.fista_box_dense_numba))
    return row


def bench_fista_csr():
    inst = ct_instance(side=32, n_angles=45, n_rays=45, seed=0)
    a, l = inst.a_op, inst.l_op
    n = a.cols
    rng = np.random.default_rng(0)
    bhat = rng.standard_normal(a.rows)
    chat = rng.standard_normal(l.rows)
    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    x0 = np.zeros(n)
    step = 0.99 / (5.0 * a.opnorm_sq() + 10.0 * l.opnorm_sq())

    def run_numpy():
        for _ in range(10):
            kernels._fista_box_csr_numpy(a.csr, a.csr_t, bhat, l.csr, l.csr_t,
                                         chat, 5.0, 10.0, lo, hi, x0, step,
                                         100, 0.0, True, 5)

    row = ["fista_box_csr (32x32 ct, 10 solves x 100 iters)",
           timeit(run_numpy), None]
    if kernels._fista_box_csr_numba is not None:
        def run_numba():
            for _ in range(10):
                kernels.fista_box_csr_numba_raw(
                    a.csr, a.csr_t, bhat, l.csr, l.csr_t, chat,
                    5.0, 10.0, lo, hi, x0, step, 100, 0.0, True, 5)
        row[2] = timeit(run_numba)
    return row


def bench_radon():
    side, n_angles, n_rays = 100, 180, 140
    thetas = radon_angles(n_angles)
    offsets = radon_offsets(n_rays)
    cap = n_angles * n_rays * (2 * side + 3)

    def run(impl):
        rows = np.empty(cap, dtype=np.int64)
        cols = np.empty(cap, dtype=np.int64)
        vals = np.empty(cap, dtype=np.float64)
        impl(side, thetas, offsets, rows, cols, vals)

    row = ["radon_entries (100x100, 180 angles, 140 rays)",
           timeit(run, kernels.radon_entries_numpy, repeat=3), None]
    if kernels.radon_entries_numba is not None:
        row[2] = timeit(run, kernels.radon_entries_numba, repeat=3)
    return row


def main():
    print(f"selected backend: {kernels.backend()}")
    print(f"{'kernel':55s} {'numpy (s)':>10s} {'numba (s)':>10s} {'speedup':>8s}")
    for name, t_np, t_nb in (bench_fista_dense(), bench_fista_csr(), bench_radon()):
        nb = f"{t_nb:.4f}" if t_nb is not None else "n/a"
        speed = f"{t_np / t_nb:.1f}x" if t_nb else "n/a"
        print(f"{name:55s} {t_np:10.4f} {nb:>10s} {speed:>8s}")


if __name__ == "__main__":
    main()
