"""Benchmark the numba kernels against the pure-numpy fallback.

Run:  python benchmarks/bench_kernels.py
Both backends are imported directly, so this ignores GQ_BACKEND.
"""

import time

import numpy as np

from gq.kernels import numpy_backend

try:
    from gq.kernels import numba_backend
except ImportError:
    numba_backend = None


def timeit(fn, *args, repeats=5):
    fn(*args)  # warm-up (JIT compile on the numba side)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(0)
    backends = [("numpy", numpy_backend)]
    if numba_backend is not None:
        backends.append(("numba", numba_backend))
    else:
        print("numba not importable; benchmarking the fallback only")

    print(f"{'kernel':<14} {'n':>9} {'m':>4}  " + "  ".join(f"{name:>10}" for name, _ in backends)
          + "   speedup")
    for n in (10_000, 100_000, 1_000_000):
        w = rng.uniform(-1.0, 1.0, n)
        z = np.linspace(-1.0, 1.0, 64)
        idx = rng.integers(0, 32, n).astype(np.uint32)
        stream5 = numpy_backend.pack_bits(idx, 5)

        cases = [
            ("soft_assign", lambda b: b.soft_assign(w[: min(n, 100_000)], z, 200.0), min(n, 100_000), 64),
            ("soft_quantize", lambda b: b.soft_quantize(w, z, 200.0), n, 64),
            ("hard_quantize", lambda b: b.hard_quantize(w, z), n, 64),
            ("pack_bits", lambda b: b.pack_bits(idx, 5), n, 32),
            ("unpack_bits", lambda b: b.unpack_bits(stream5, n, 5), n, 32),
        ]
        for name, call, rows, m in cases:
            times = [timeit(call, impl) for _, impl in backends]
            ratio = times[0] / times[-1] if len(times) > 1 else 1.0
            cols = "  ".join(f"{t * 1e3:9.2f}ms" for t in times)
            print(f"{name:<14} {rows:>9} {m:>4}  {cols}   {ratio:6.1f}x")
        print()


if __name__ == "__main__":
    main()
