"""Compare the compiled pair kernels with the numpy fallback.

    python3 benchmarks/bench_core.py [--sizes 256 1024 2048] [--threads 1 4]

Prints one row per (kernel, N, backend, threads) with the best of several
repeats, and checks that both backends agree bit for bit.
"""
import argparse
import time

import numpy as np

from orlicz import _pure

try:
    from orlicz import _core
except ImportError:  # extension not built
    _core = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[256, 1024, 2048])
    ap.add_argument("--threads", type=int, nargs="+", default=[1, 4])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'N':>6}  {'backend':<10}{'threads':>7}{'ms':>10}{'speedup':>9}")
    for n in args.sizes:
        f = rng.standard_normal((n, n))
        a = rng.random((n, n))
        w = rng.random(n)
        cases = {
            "row_sums": (lambda m, t: m.row_sums(f, a, w, t)),
            "antisym_row_sums": (lambda m, t: m.antisym_row_sums(f, w, t)),
        }
        for name, call in cases.items():
            ref = call(_pure, 1)
            t_pure = best_of(lambda: call(_pure, 1), args.repeat)
            print(f"{name:<18}{n:>6}  {'pure':<10}{1:>7}{1e3 * t_pure:>10.2f}{1.0:>9.2f}")
            if _core is None:
                continue
            for t in args.threads:
                out = np.asarray(call(_core, t))
                if not np.array_equal(out, ref):
                    raise SystemExit(f"{name} N={n} threads={t}: backends disagree")
                t_c = best_of(lambda: call(_core, t), args.repeat)
                print(f"{name:<18}{n:>6}  {'compiled':<10}{t:>7}{1e3 * t_c:>10.2f}"
                      f"{t_pure / t_c:>9.2f}")


if __name__ == "__main__":
    main()
