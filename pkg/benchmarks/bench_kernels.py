"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--sizes 256,1024,4096] [--repeat 3]

Each row times one kernel on one input size for both backends, checks that the
two outputs agree bit for bit, and reports the speedup.
"""

import argparse
import time

import numpy as np

from maxblow import _kernels_py
from maxblow.space import gen_dyadic_interval

try:
    from maxblow import _kernels as compiled
except ImportError:
    compiled = None


def best_time(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(sizes, rng):
    for n in sizes:
        L = int(np.log2(n))
        sp = gen_dyadic_interval(L)
        f = rng.random(sp.n) * (rng.random(sp.n) < 0.7)
        x = sp.coords[:, 0]
        ids = np.arange(sp.n)
        yield "interval", n, (x, sp.weight, f, ids)
        if n <= 1024:
            yield "general", n, (sp.dist, sp.weight, f)
            yield "quasi_triangle", n, (sp.dist,)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--sizes", default="256,1024,4096")
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)
    if compiled is None:
        raise SystemExit("compiled extension not built; run pip install --no-build-isolation -e .")
    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(0)
    print(f"{'kernel':<15} {'n':>6} {'python_s':>10} {'cython_s':>10} {'speedup':>8}  equal")
    for name, n, inputs in cases(sizes, rng):
        kernel = {"interval": "maximal_interval", "general": "maximal_general"}.get(name, name)
        tp, op = best_time(lambda: getattr(_kernels_py, kernel)(*inputs), 1)
        tc, oc = best_time(lambda: getattr(compiled, kernel)(*inputs, args.threads), args.repeat)
        if isinstance(op, tuple):
            equal = all(np.array_equal(a, b) for a, b in zip(op, oc))
        else:
            equal = op == oc
        print(f"{name:<15} {n:>6} {tp:>10.3f} {tc:>10.4f} {tp / tc:>8.1f}  {equal}")


if __name__ == "__main__":
    main()
