"""Compare the compiled kernels against the pure-numpy fallback.

Runs the symmetric eigensolver and the direct convolution on matched inputs
through both implementations and prints a timing table, verifying on the way
that the two backends agree on results.

Usage:
    python3 benchmarks/bench_kernels.py [--sizes 16,32,64] [--repeats 5]
"""

import argparse
import time

import numpy as np

from snfprune._kernels import _fallback

try:
    from snfprune._kernels import _impl
except ImportError:
    _impl = None


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_jacobi(sizes, repeats, rng):
    print("symmetric eigensolver (cyclic rotations, 64-bit)")
    print("%6s  %12s  %12s  %8s" % ("N", "fallback", "compiled", "speedup"))
    for n in sizes:
        m = rng.normal(size=(n, n + n // 2 + 1))
        g = m @ m.T
        tol = 1e-12 * float(np.linalg.norm(g))

        def run(mod):
            a, v = g.copy(), np.eye(n)
            sweeps = mod.jacobi_sweeps(a, v, tol, 30)
            assert sweeps >= 0
            return np.diag(a)

        t_fallback = _time(lambda: run(_fallback), repeats)
        if _impl is None:
            print("%6d  %10.2f ms  %12s  %8s" % (n, t_fallback * 1e3, "n/a", "n/a"))
            continue
        assert np.array_equal(run(_fallback), run(_impl))
        t_compiled = _time(lambda: run(_impl), repeats)
        print("%6d  %10.2f ms  %10.2f ms  %7.1fx"
              % (n, t_fallback * 1e3, t_compiled * 1e3, t_fallback / t_compiled))


def bench_conv(repeats, rng):
    print()
    print("direct convolution (cross-correlation, zero padding)")
    print("%22s  %12s  %12s  %8s" % ("case", "fallback", "compiled", "speedup"))
    cases = (
        ("16x32x32, 32 out, 3x3", (16, 32, 32), (32, 16, 3, 3), (1, 1), (1, 1)),
        ("32x16x16, 64 out, 3x3", (32, 16, 16), (64, 32, 3, 3), (1, 1), (1, 1)),
        ("16x32x32, 32 out, s=2", (16, 32, 32), (32, 16, 3, 3), (2, 2), (1, 1)),
    )
    for label, x_shape, w_shape, (sy, sx), (py, px) in cases:
        x = np.ascontiguousarray(rng.normal(size=x_shape))
        w = np.ascontiguousarray(rng.normal(size=w_shape))
        oh = (x_shape[1] + 2 * py - w_shape[2]) // sy + 1
        ow = (x_shape[2] + 2 * px - w_shape[3]) // sx + 1
        out = np.empty((w_shape[0], oh, ow))

        t_fallback = _time(
            lambda: _fallback.conv2d_fill(x, w, out, sy, sx, py, px), repeats)
        if _impl is None:
            print("%22s  %10.2f ms  %12s  %8s"
                  % (label, t_fallback * 1e3, "n/a", "n/a"))
            continue
        want = out.copy()
        _impl.conv2d_fill(x, w, out, sy, sx, py, px)
        assert np.allclose(out, want, atol=1e-10)
        t_compiled = _time(
            lambda: _impl.conv2d_fill(x, w, out, sy, sx, py, px), repeats)
        print("%22s  %10.2f ms  %10.2f ms  %7.1fx"
              % (label, t_fallback * 1e3, t_compiled * 1e3,
                 t_fallback / t_compiled))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="16,32,64",
                        help="comma-separated eigensolver matrix sizes")
    parser.add_argument("--repeats", type=int, default=5,
                        help="repetitions per measurement (best is reported)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    sizes = [int(s) for s in args.sizes.split(",") if s]
    rng = np.random.default_rng(args.seed)
    if _impl is None:
        print("note: compiled extension not available; timing the fallback only")
    bench_jacobi(sizes, args.repeats, rng)
    bench_conv(args.repeats, rng)


if __name__ == "__main__":
    main()
