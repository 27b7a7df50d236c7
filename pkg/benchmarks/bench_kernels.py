"""Compare the compiled kernels against the plain-array fallbacks.

Run directly: python3 benchmarks/bench_kernels.py [--size 300] [--repeat 30]
Prints per-kernel median wall time for both flavors and the speedup.
The compiled flavor is exercised explicitly, so this works regardless of
the DEDUP_SCAN_NO_NUMBA selection in the importing environment.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from dedup_scan import _kernels
from dedup_scan.phash import compute_phash


def _time(fn, *args, repeat: int, warmup: int = 3) -> float:
    for _ in range(warmup):
        fn(*args)
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=300)
    parser.add_argument("--repeat", type=int, default=30)
    parser.add_argument("--hashes", type=int, default=200_000)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, (args.size, args.size, 3), dtype=np.uint8)
    gray = _kernels.rgb_to_gray_numpy(img)
    codes = rng.integers(0, 2**64, size=args.hashes, dtype=np.uint64)
    probe = int(rng.integers(0, 2**64, dtype=np.uint64))

    cases = [
        ("grayscale", _kernels.rgb_to_gray_numpy, _kernels.rgb_to_gray_numba, (img,)),
        ("box resize", _kernels.box_resize_numpy, _kernels.box_resize_numba, (gray, 32)),
        (
            "hamming scan",
            _kernels.hamming_distances_numpy,
            _kernels.hamming_distances_numba,
            (probe, codes),
        ),
    ]

    print(f"image {args.size}x{args.size}, {args.hashes} hashes, repeat={args.repeat}")
    print(f"{'kernel':<14}{'fallback':>12}{'compiled':>12}{'speedup':>10}")
    for name, plain, compiled, call_args in cases:
        t_plain = _time(plain, *call_args, repeat=args.repeat)
        if compiled is None:
            print(f"{name:<14}{t_plain * 1e3:>10.3f}ms{'n/a':>12}{'n/a':>10}")
            continue
        t_comp = _time(compiled, *call_args, repeat=args.repeat)
        print(
            f"{name:<14}{t_plain * 1e3:>10.3f}ms{t_comp * 1e3:>10.3f}ms"
            f"{t_plain / t_comp:>9.1f}x"
        )

    t_hash = _time(compute_phash, img, repeat=args.repeat)
    flavor = "compiled" if _kernels.using_numba() else "fallback"
    print(f"\nfull hash ({flavor} selected): {t_hash * 1e3:.3f}ms per image")


if __name__ == "__main__":
    main()
