"""Benchmark the numba kernels against the pure-numpy fallback.

Runs itself twice in subprocesses (QFSELECT_NUMBA=1 and =0), times encode,
decode, and MS-SSIM on synthetic images, and prints a comparison table.
Integer-kernel outputs (encoded bytes, decoded pixels) are checked for
bit-identity between the two backends.

Usage: python benchmarks/bench_kernels.py [--size 256] [--reps 5]
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import subprocess
import sys
import time


def make_image(size: int):
    import numpy as np

    rng = np.random.default_rng(7)
    base = rng.uniform(0, 255, (size + 16, size + 16, 3))
    kern = np.ones(5) / 5.0
    for axis in (0, 1):
        base = np.apply_along_axis(lambda v: np.convolve(v, kern, mode="same"), axis, base)
    return np.clip(base[:size, :size], 0, 255).astype(np.uint8)


def run_worker(size: int, reps: int) -> dict:
    import numpy as np

    from qfselect import jpeg, kernels, metrics

    img = make_image(size)
    # warm up JIT compilation before timing
    blob = jpeg.encode(img, 50)
    decoded = jpeg.decode(blob)
    metrics.ms_ssim(img, decoded)

    out: dict = {"backend": kernels.backend_name()}

    t0 = time.perf_counter()
    for _ in range(reps):
        blob = jpeg.encode(img, 50)
    out["encode_s"] = (time.perf_counter() - t0) / reps

    t0 = time.perf_counter()
    for _ in range(reps):
        decoded = jpeg.decode(blob)
    out["decode_s"] = (time.perf_counter() - t0) / reps

    t0 = time.perf_counter()
    for _ in range(reps):
        value = metrics.ms_ssim(img, decoded)
    out["msssim_s"] = (time.perf_counter() - t0) / reps

    out["encode_sha"] = hashlib.sha256(blob.data).hexdigest()
    out["decode_sha"] = hashlib.sha256(decoded.tobytes()).hexdigest()
    out["msssim"] = value
    return out


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=256)
    parser.add_argument("--reps", type=int, default=5)
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.worker:
        print(json.dumps(run_worker(args.size, args.reps)))
        return 0

    results = {}
    for flag in ("1", "0"):
        env = dict(os.environ, QFSELECT_NUMBA=flag)
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--worker",
             "--size", str(args.size), "--reps", str(args.reps)],
            env=env,
            capture_output=True,
            text=True,
            check=True,
        )
        row = json.loads(proc.stdout.strip().splitlines()[-1])
        results[row["backend"]] = row

    if "numba" not in results:
        print("numba unavailable; only the numpy path was timed")
    nb = results.get("numba")
    np_row = results["numpy"]
    if nb:
        assert nb["encode_sha"] == np_row["encode_sha"], "encoded bytes differ between backends"
        assert nb["decode_sha"] == np_row["decode_sha"], "decoded pixels differ between backends"
        assert abs(nb["msssim"] - np_row["msssim"]) < 1e-9, "MS-SSIM differs between backends"

    print(f"image {args.size}x{args.size}, {args.reps} reps, mean seconds per call")
    print(f"{'kernel':<10} {'numpy':>10} {'numba':>10} {'speedup':>9}")
    for key, label in (("encode_s", "encode"), ("decode_s", "decode"), ("msssim_s", "ms-ssim")):
        base = np_row[key]
        if nb:
            acc = nb[key]
            print(f"{label:<10} {base:>10.4f} {acc:>10.4f} {base / acc:>8.1f}x")
        else:
            print(f"{label:<10} {base:>10.4f} {'-':>10} {'-':>9}")
    if nb:
        print("integer-kernel outputs are bit-identical across backends")
    return 0


if __name__ == "__main__":
    sys.exit(main())
