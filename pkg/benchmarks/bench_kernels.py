"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--rows 32]

Times each kernel on identical inputs, checks both backends agree, then
times a full 128 KB query end to end with each backend active.
"""

import argparse
import timeit

import numpy as np

from hammerpuf import kernels
from hammerpuf.dram import PID_JITTER, derive_device, row_keys
from hammerpuf.engine import PufConfig, simulate_query


def _inputs(n_rows, row_bits):
    rng = np.random.default_rng(0)
    keys = row_keys(7, PID_JITTER, 0, np.arange(n_rows))
    n = n_rows * row_bits
    return {
        "keys": keys,
        "lr": rng.normal(7.2, 1.1, n),
        "rate": np.where(rng.random(n) < 0.02, 1e-2, 0.0),
        "charged": (np.arange(n) % 2).astype(np.uint8),
    }


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--rows", type=int, default=32, help="4 KB rows per kernel call")
    args = ap.parse_args(argv)

    row_bits = 4096 * 8
    x = _inputs(args.rows, row_bits)
    names = [b for b in ("python", "compiled") if b in kernels.BACKENDS]
    if "compiled" not in names:
        print("compiled backend not built; only the numpy fallback is timed")

    cases = {
        "uniform_field": lambda k: k.uniform_field(x["keys"], row_bits),
        "normal_field": lambda k: k.normal_field(x["keys"], row_bits, 0.0, 1.0),
        "flip_kernel": lambda k: k.flip_kernel(x["keys"], row_bits, x["lr"], x["rate"],
                                               x["charged"], 0.03, 1.0, 1 / 120),
    }
    print(f"{args.rows * row_bits} cells per call, best of {args.repeat}\n")
    print(f"{'kernel':<16}" + "".join(f"{n:>12}" for n in names) + f"{'speedup':>10}")
    for case, fn in cases.items():
        outs = {n: fn(kernels.BACKENDS[n]) for n in names}
        if len(outs) == 2:
            a, b = outs.values()
            if not np.allclose(a, b, rtol=1e-12, atol=0):
                raise SystemExit(f"{case}: backends disagree")
        times = {n: _best(lambda n=n: fn(kernels.BACKENDS[n]), args.repeat) for n in names}
        speedup = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        print(f"{case:<16}" + "".join(f"{times[n] * 1e3:>10.1f}ms" for n in names)
              + f"{speedup:>9.1f}x")

    device = derive_device(1)
    cfg = PufConfig()
    print()
    saved = kernels._impl
    try:
        for n in names:
            kernels._impl = kernels.BACKENDS[n]
            t = _best(lambda: simulate_query(device, cfg, 0), args.repeat)
            print(f"128 KB query, {n:<8} {t * 1e3:8.1f} ms")
    finally:
        kernels._impl = saved


if __name__ == "__main__":
    main()
