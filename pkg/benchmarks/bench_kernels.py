"""Benchmark the compiled kernels against the pure-Python fallback.

Usage:
    python3 benchmarks/bench_kernels.py [--frames N] [--k K] [--dim D]
                                        [--tokens N] [--vocab V] [--repeat R]

Times the three hot kernels (nearest-centroid assignment, bit packing,
bit unpacking) on both backends and prints a speedup table.  If the
compiled extension is not available only the fallback is timed.
"""

import argparse
import time

import numpy as np

from disctok._kernels import fallback


def _load_compiled():
    try:
        from disctok._kernels import _core

        return _core
    except ImportError:
        return None


def _best_of(repeat, fn, *args):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=200_000)
    ap.add_argument("--k", type=int, default=32)
    ap.add_argument("--dim", type=int, default=16)
    ap.add_argument("--tokens", type=int, default=5_000_000)
    ap.add_argument("--vocab", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    frames = rng.standard_normal((args.frames, args.dim)).astype(np.float32)
    centroids = rng.standard_normal((args.k, args.dim))
    tokens = rng.integers(0, args.vocab, size=args.tokens).astype(np.uint64)
    width = max(1, (args.vocab - 1).bit_length())
    payload = np.frombuffer(fallback.pack_bits(tokens, width), dtype=np.uint8)

    compiled = _load_compiled()
    backends = [("fallback", fallback)]
    if compiled is not None:
        backends.append(("compiled", compiled))
    else:
        print("compiled extension not available; timing fallback only")

    cases = [
        (f"assign_tokens ({args.frames}x{args.dim}, k={args.k})",
         "assign_tokens", (frames, centroids)),
        (f"pack_bits ({args.tokens} tokens, {width} bit)",
         "pack_bits", (tokens, width)),
        (f"unpack_bits ({args.tokens} tokens, {width} bit)",
         "unpack_bits", (payload, width, args.tokens)),
    ]

    print(f"{'kernel':<44} " + " ".join(f"{n:>12}" for n, _ in backends)
          + ("      speedup" if compiled else ""))
    for label, name, call_args in cases:
        times = {}
        for bname, mod in backends:
            times[bname] = _best_of(args.repeat, getattr(mod, name), *call_args)
        row = f"{label:<44} " + " ".join(
            f"{times[n] * 1e3:>10.1f}ms" for n, _ in backends
        )
        if compiled is not None:
            row += f"   {times['fallback'] / times['compiled']:>8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
