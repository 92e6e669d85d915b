"""Benchmark the compiled kernels against the pure-numpy fallback.

Usage: python -m structured_omd.bench [--sizes 64,256,1024] [--reps 200]

Runs identical workloads through both backends, checks that the outputs
agree, and prints per-kernel timings. If the compiled extension is not
built, only the python column is reported.
"""

import argparse
import math
import sys
import time

import numpy as np

from .kernels import _pykernels

try:
    from .kernels import _ckernels
except ImportError:
    _ckernels = None


def _time(fn, reps):
    best = float("inf")
    for _ in range(3):
        t0 = time.perf_counter()
        for _ in range(reps):
            fn()
        best = min(best, (time.perf_counter() - t0) / reps)
    return best


def _bench_simplex_project(impl, n, reps, rng):
    zs = rng.standard_normal((reps, n))
    out = impl.simplex_project(zs[0])
    _time(lambda: impl.simplex_project(zs[reps // 2]), reps)
    t = _time(lambda: [impl.simplex_project(z) for z in zs], 1) / reps
    return t, out


def _bench_qnorm(impl, n, reps, rng):
    xs = rng.standard_normal((reps, n))
    _, out = impl.qnorm_sq_value_grad(xs[0], 1.5)
    t = _time(lambda: [impl.qnorm_sq_value_grad(x, 1.5) for x in xs], 1) / reps
    return t, out


def _bench_prox(impl, n, reps, rng):
    # Quadratic plus linear objective, the shape the solver hands to this
    # kernel in practice (q-norm terms go to the Newton path instead).
    anchor = np.full(n, 1.0 / n)
    lin = rng.uniform(0.0, 1.0, n)
    b = rng.standard_normal((n, n)) / math.sqrt(n)
    quad = 0.25 * np.eye(n) + 0.1 * (b @ b.T)
    args = (anchor, lin, quad, [], [], 1e-10, 50 * n, 1.0)
    out = impl.prox_pgd(*args)[0]
    t = _time(lambda: impl.prox_pgd(*args), max(1, reps // 20))
    return t, out


_KERNELS = [
    ("simplex_project", _bench_simplex_project),
    ("qnorm_sq_value_grad", _bench_qnorm),
    ("prox_pgd", _bench_prox),
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="64,256,1024",
                    help="comma list of problem sizes")
    ap.add_argument("--reps", type=int, default=200, help="repetitions per size")
    args = ap.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]

    if _ckernels is None:
        print("compiled extension not built; timing the python backend only")
    header = "%-22s %6s %12s %12s %9s %10s" % (
        "kernel", "n", "python (us)", "compiled (us)", "speedup", "max |diff|")
    print(header)
    print("-" * len(header))
    for name, bench in _KERNELS:
        for n in sizes:
            rng = np.random.default_rng(7)
            t_py, out_py = bench(_pykernels, n, args.reps, rng)
            if _ckernels is None:
                print("%-22s %6d %12.2f %12s %9s %10s"
                      % (name, n, 1e6 * t_py, "-", "-", "-"))
                continue
            rng = np.random.default_rng(7)
            t_c, out_c = bench(_ckernels, n, args.reps, rng)
            diff = float(np.max(np.abs(np.asarray(out_py) - np.asarray(out_c))))
            print("%-22s %6d %12.2f %12.2f %8.2fx %10.2e"
                  % (name, n, 1e6 * t_py, 1e6 * t_c, t_py / t_c, diff))
    return 0


if __name__ == "__main__":
    sys.exit(main())
