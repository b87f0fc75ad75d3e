"""Benchmark the kernel backends on a synthetic fused-search workload.

Runs the Gray-code accumulate/count inner loop over a random matrix stack
with every importable backend and prints a timing table:

    python -m simfuse.bench --m 8 --n 512 --repeats 3
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from .kernels import get_backends
from .subsets import gray_value


def _workload(impl, mats, n: int, k: int) -> int:
    """One full Gray sweep: accumulate one term per step, count hits."""
    m = len(mats)
    acc = np.zeros((n, n), dtype=np.float64)
    hits = np.zeros(n, dtype=np.uint8)
    total = 0
    for idx in range(1, 1 << m):
        flip = gray_value(idx) ^ gray_value(idx - 1)
        j = flip.bit_length() - 1
        sign = +1 if gray_value(idx) & flip else -1
        impl.accumulate(acc, mats[j], sign)
        total += impl.count_hits(acc, k, hits)
    return total


def run(m: int, n: int, k: int, repeats: int, seed: int) -> dict[str, float]:
    rng = np.random.default_rng(seed)
    mats = [
        np.ascontiguousarray(rng.standard_normal((n, n)).astype(np.float32))
        for _ in range(m)
    ]
    timings: dict[str, float] = {}
    reference = None
    for name, impl in get_backends().items():
        best = float("inf")
        for _ in range(repeats):
            start = time.perf_counter()
            total = _workload(impl, mats, n, k)
            best = min(best, time.perf_counter() - start)
        if reference is None:
            reference = total
        elif total != reference:
            raise AssertionError(f"backend {name} disagrees: {total} != {reference}")
        timings[name] = best
    return timings


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--m", type=int, default=8, help="stack size (2^m - 1 subsets)")
    parser.add_argument("--n", type=int, default=512, help="matrix side length")
    parser.add_argument("--k", type=int, default=1)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args(argv)

    timings = run(args.m, args.n, args.k, args.repeats, args.seed)
    steps = (1 << args.m) - 1
    print(f"fused search sweep: M={args.m} ({steps} subsets), N={args.n}, k={args.k}")
    base = timings.get("numpy")
    for name, seconds in sorted(timings.items()):
        rate = steps / seconds
        rel = f"  ({base / seconds:.2f}x vs numpy)" if base and name != "numpy" else ""
        print(f"  {name:<8} {seconds:8.3f} s   {rate:9.1f} subsets/s{rel}")
    if len(timings) == 1:
        print("  (compiled extension not built; only the numpy backend ran)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
