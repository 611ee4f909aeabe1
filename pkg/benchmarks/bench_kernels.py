"""Time the numba-compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--batch 16] [--steps 800] [--hidden 64] [--samples 60000]

The fallback is what runs under ``ATTITUDE6D_NUMBA=0``: batch-vectorized
numpy for the GRU layer and the uncompiled Python loops for the sequential
filter and strapdown kernels. Both paths are timed in one process, and their
outputs are compared before any timing is reported.
"""
import argparse
import timeit

import numpy as np

from attitude6d import _backend, _filter_kernels, _gru_kernels, quat


def best_of(fn, repeat):
    fn()  # warm-up, includes JIT compilation
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def gru_cases(rng, batch, steps, hidden):
    n_in = 7
    w_ih = rng.normal(scale=0.3, size=(3 * hidden, n_in))
    w_hh = rng.normal(scale=0.3, size=(3 * hidden, hidden))
    b_ih, b_hh = rng.normal(scale=0.1, size=3 * hidden), rng.normal(scale=0.1, size=3 * hidden)
    x = rng.normal(size=(batch, steps, n_in))
    h0 = np.zeros((batch, hidden))
    dhs = rng.normal(size=(batch, steps, hidden))
    dh_last = np.zeros((batch, hidden))

    def fwd(impl):
        return lambda: impl(w_ih, w_hh, b_ih, b_hh, x, h0)

    cache = _gru_kernels.forward_numpy(w_ih, w_hh, b_ih, b_hh, x, h0)

    def bwd(impl):
        return lambda: impl(w_ih, w_hh, x, h0, *cache, dhs, dh_last, True)

    return [
        ("gru forward", fwd(_gru_kernels.forward_loops), fwd(_gru_kernels.forward_numpy)),
        ("gru backward", bwd(_gru_kernels.backward_loops), bwd(_gru_kernels.backward_numpy)),
    ]


def sequential_cases(rng, samples):
    gyr = rng.normal(scale=0.5, size=(samples, 3))
    acc = rng.normal(size=(samples, 3)) * 0.3 + np.array([0.0, 0.0, 9.81])
    dt = np.full(samples, 0.01)
    q0, b0 = quat.IDENTITY.copy(), np.zeros(3)
    out = np.empty((samples, 4))

    def pair(kern, *args):
        return kern, getattr(kern, "py_func", kern), args

    cases = [
        ("filter A", *pair(_filter_kernels.run_gradient_filter, q0, gyr, acc, dt, 0.1, out)),
        ("filter B", *pair(_filter_kernels.run_pi_filter, q0, b0, gyr, acc, dt, 0.5, 0.01, out)),
        ("strapdown", *pair(quat.strapdown_kernel, q0, gyr, dt)),
    ]
    return [(name, (lambda k=k, a=a: k(*a)), (lambda p=p, a=a: p(*a))) for name, k, p, a in cases]


def first_array(result):
    while isinstance(result, tuple):
        result = result[0]
    return np.array(result, copy=True)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=16)
    ap.add_argument("--steps", type=int, default=800)
    ap.add_argument("--hidden", type=int, default=64)
    ap.add_argument("--samples", type=int, default=60_000, help="samples for the sequential kernels")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    if not _backend.USE_NUMBA:
        print("numba disabled (ATTITUDE6D_NUMBA=0 or not installed): both columns run uncompiled code")
    rng = np.random.default_rng(0)
    cases = gru_cases(rng, args.batch, args.steps, args.hidden) + sequential_cases(rng, args.samples)
    print(f"{'kernel':<14}{'numba [s]':>12}{'numpy [s]':>12}{'speed-up':>10}{'max |diff|':>13}")
    for name, compiled, fallback in cases:
        diff = np.max(np.abs(first_array(compiled()) - first_array(fallback())))
        t_c = best_of(compiled, args.repeat)
        t_f = best_of(fallback, args.repeat)
        print(f"{name:<14}{t_c:>12.4f}{t_f:>12.4f}{t_f / t_c:>9.1f}x{diff:>13.2e}")


if __name__ == "__main__":
    main()
