"""Compare the compiled and pure-Python reflection kernels.

    python benchmarks/bench_kernels.py [--rows 100000] [--repeat 5] [--out bench.csv]

Each case reflects ``rows`` random steps of a given scale inside
``[-1/2, 1/2]^d``; larger scales mean more bounces per row.  Both backends
must return identical endpoints, which is checked before timing.
"""
import argparse
import csv
import sys
import time

import numpy as np

from nlpde import kernels


def _case(rng, rows, d, scale):
    a = rng.uniform(-0.5, 0.5, (rows, d))
    b = a + scale * rng.standard_normal((rows, d))
    return a, b


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)

    compiled = kernels.compiled_backend
    if compiled is None:
        print("compiled kernel not built; only the Python backend is available", file=sys.stderr)
    py = kernels.python_backend
    rng = np.random.default_rng(0)
    rows = []
    for d in (1, 2, 5, 10):
        lo, hi = np.full(d, -0.5), np.full(d, 0.5)
        for scale in (0.05, 0.5, 3.0):
            a, b = _case(rng, args.rows, d, scale)
            ref, counts, _ = py.reflect_batch(a, b, lo, hi, 10_000)
            t_py = _time(lambda: py.reflect_batch(a, b, lo, hi, 10_000), args.repeat)
            t_c = np.nan
            if compiled is not None:
                out, _, _ = compiled.reflect_batch(a, b, lo, hi, 10_000)
                if not np.allclose(out, ref, rtol=0, atol=1e-12):
                    raise SystemExit(f"backends disagree at d={d}, scale={scale}")
                t_c = _time(lambda: compiled.reflect_batch(a, b, lo, hi, 10_000), args.repeat)
            rows.append([d, scale, args.rows, float(counts.mean()), t_py, t_c, t_py / t_c])

    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["d", "scale", "rows", "mean_bounces", "python_s", "compiled_s", "speedup"])
    for r in rows:
        w.writerow([r[0], r[1], r[2], f"{r[3]:.3f}", f"{r[4]:.5f}", f"{r[5]:.5f}", f"{r[6]:.1f}"])
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()
