"""Time the numba kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--seeds 200] [--sizes 64,256,1024]

Both paths must return identical arrays; the script checks that before
printing timings.
"""

import argparse
import time

import numpy as np

from distcftp.cftp import fast
from distcftp.graph import generate
from distcftp.models import default_p, make_hardcore, make_ising, make_wds


def _time(fn, repeat=3):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _cases(n):
    g = generate("cycle", {"n": n})
    hc = make_hardcore(g, 0.3)
    wds = make_wds(g, 8)
    ising = make_ising(g, 2)
    return [
        ("hardcore", lambda s, nb: fast.sets_batch(hc, s, default_p("hardcore"), 40, True, nb)),
        ("wds", lambda s, nb: fast.sets_batch(wds, s, default_p("wds"), 40, True, nb)),
        ("ising", lambda s, nb: fast.monotone_batch(ising, s, default_p("ising"), 40, True, nb)),
        ("sequential", lambda s, nb: fast.sequential_batch(g, 0.3 / 1.3, s, 40, nb)),
    ]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=200)
    ap.add_argument("--sizes", default="64,256,1024")
    args = ap.parse_args()
    sizes = [int(x) for x in args.sizes.split(",")]
    seeds = list(range(args.seeds))

    # warm the jit cache so compile time stays out of the numbers
    for _, run in _cases(8):
        run(seeds[:2], True)

    print(f"{'model':<11}{'n':>6}{'numba s':>10}{'numpy s':>10}{'speedup':>9}")
    for n in sizes:
        for name, run in _cases(n):
            t_nb, (la, ia) = _time(lambda: run(seeds, True))
            # the numpy path is slow on big cycles; one pass is enough
            t_np, (lb, ib) = _time(lambda: run(seeds, False), repeat=1)
            if not (np.array_equal(la, lb) and np.array_equal(ia, ib)):
                raise SystemExit(f"{name} n={n}: numba and numpy results differ")
            print(f"{name:<11}{n:>6}{t_nb:>10.3f}{t_np:>10.3f}{t_np / t_nb:>9.1f}")


if __name__ == "__main__":
    main()
