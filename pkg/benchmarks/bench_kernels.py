#!/usr/bin/env python3
"""Time the compiled kernels against the pure-Python fallback.

Runs both backends on the two hot paths (frame difference accumulation and
batched cosine scoring), checks they agree, and prints best-of-N timings.
The fallback rides numpy/BLAS, so it is expected to stay competitive on the
cosine path while losing badly on byte-buffer accumulation.
"""

from __future__ import annotations

import argparse
import random
import time

import numpy as np

from multirag.kernels import BACKEND, get_backend


def best_of(fn, repeats: int) -> float:
    samples = []
    for _ in range(repeats):
        started = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - started)
    return min(samples)


def backends():
    out = []
    for name in ("native", "python"):
        try:
            out.append((name, get_backend(name)))
        except ImportError:
            print(f"backend {name!r} unavailable, skipping")
    return out


def bench_sq_diff_sum(args, rows):
    rng = random.Random(args.seed)
    a = rng.randbytes(args.pixels)
    b = rng.randbytes(args.pixels)
    results = {}
    for name, (sq_diff_sum, _) in backends():
        results[name] = sq_diff_sum(a, b)
        rows.append(("sq_diff_sum", name, best_of(lambda: sq_diff_sum(a, b), args.repeats)))
    if len(set(results.values())) > 1:
        raise SystemExit(f"backends disagree on sq_diff_sum: {results}")


def bench_cosine_scores(args, rows):
    rng = np.random.default_rng(args.seed)
    mat = np.ascontiguousarray(rng.standard_normal((args.rows, args.dim)))
    norms = np.sqrt((mat * mat).sum(axis=1))
    query = np.ascontiguousarray(rng.standard_normal(args.dim))
    results = {}
    for name, (_, cosine_scores) in backends():
        results[name] = np.asarray(cosine_scores(mat, norms, query))
        rows.append(("cosine_scores", name, best_of(lambda: cosine_scores(mat, norms, query), args.repeats)))
    values = list(results.values())
    for other in values[1:]:
        # Similarities are bounded by 1, so absolute tolerance is the right
        # frame; summation order differs between BLAS and the C loop.
        if not np.allclose(values[0], other, rtol=0.0, atol=1e-14):
            raise SystemExit("backends disagree on cosine_scores")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--pixels", type=int, default=1920 * 1080 * 3,
                        help="byte-buffer length for the frame-difference kernel")
    parser.add_argument("--rows", type=int, default=20_000,
                        help="store size for the cosine kernel")
    parser.add_argument("--dim", type=int, default=128,
                        help="embedding width for the cosine kernel")
    parser.add_argument("--repeats", type=int, default=5, help="best-of-N timing")
    parser.add_argument("--seed", type=int, default=20240817)
    args = parser.parse_args()

    print(f"import-time backend: {BACKEND}")
    print(f"sq_diff_sum: {args.pixels:,} bytes | cosine_scores: "
          f"{args.rows:,} x {args.dim} | best of {args.repeats}")
    print()

    rows: list[tuple[str, str, float]] = []
    bench_sq_diff_sum(args, rows)
    bench_cosine_scores(args, rows)

    reference = {kernel: t for kernel, name, t in rows if name == "python"}
    print(f"{'kernel':<16}{'backend':<10}{'best (ms)':>12}{'vs python':>12}")
    print("-" * 50)
    for kernel, name, seconds in rows:
        baseline = reference.get(kernel)
        speedup = f"{baseline / seconds:.1f}x" if baseline else "-"
        print(f"{kernel:<16}{name:<10}{seconds * 1e3:>12.3f}{speedup:>12}")


if __name__ == "__main__":
    main()
