"""Benchmark the hot kernels: numba-compiled vs the PREDNBV_NO_NUMBA=1 fallback.

Single-process mode times the kernels as imported (whatever the env selects);
--compare spawns one subprocess per mode and prints a side-by-side table.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _workloads(args):
    from prednbv.kernels import OCCUPIED, auction_assign, carve_rays, segment_free

    rng = np.random.default_rng(args.seed)
    cells = np.zeros((64, 64, 64), dtype=np.uint8)
    occ = rng.integers(0, 64, size=(500, 3))
    cells[occ[:, 0], occ[:, 1], occ[:, 2]] = OCCUPIED
    targets = rng.uniform(-8.0, 8.0, size=(args.rays, 3))
    segs = rng.uniform(-7.5, 7.5, size=(args.segments, 2, 3))
    pa = rng.normal(size=(args.points, 3))
    pb = rng.normal(size=(args.points, 3))

    def bench_carve():
        work = cells.copy()
        carve_rays(work, -8.0, -8.0, -8.0, 0.25, -7.9, 0.1, 0.2, targets)

    def bench_segments():
        for a, b in segs:
            segment_free(
                cells, -8.0, -8.0, -8.0, 0.25, a[0], a[1], a[2], b[0], b[1], b[2], 0.125
            )

    def bench_auction():
        auction_assign(pa, pb, 1e-5)

    return [
        (f"carve_rays[{args.rays}]", bench_carve),
        (f"segment_free[{args.segments}]", bench_segments),
        (f"auction_assign[{args.points}]", bench_auction),
    ]


def run_single(args) -> int:
    from prednbv import _accel

    results = {"mode": "numba" if _accel.NUMBA_ENABLED else "numpy"}
    for name, fn in _workloads(args):
        fn()  # warmup; compiles on the numba path
        best = float("inf")
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        results[name] = best
    print(json.dumps(results))
    return 0


def run_compare(args) -> int:
    cmd = [
        sys.executable, os.path.abspath(__file__),
        "--rays", str(args.rays), "--segments", str(args.segments),
        "--points", str(args.points), "--repeats", str(args.repeats),
        "--seed", str(args.seed),
    ]
    sides = {}
    for flag in ("0", "1"):
        env = dict(os.environ, PREDNBV_NO_NUMBA=flag)
        out = subprocess.run(cmd, env=env, check=True, capture_output=True, text=True)
        side = json.loads(out.stdout.strip().splitlines()[-1])
        sides[side.pop("mode")] = side
    if set(sides) != {"numba", "numpy"}:
        print("numba unavailable; both runs used the numpy fallback", file=sys.stderr)
        return 1
    print(f"{'kernel':<24}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for name in sides["numba"]:
        tn, tp = sides["numba"][name], sides["numpy"][name]
        print(f"{name:<24}{tn:>11.4f}s{tp:>11.4f}s{tp / tn:>9.1f}x")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rays", type=int, default=20000)
    parser.add_argument("--segments", type=int, default=20000)
    parser.add_argument("--points", type=int, default=300)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--compare", action="store_true", help="run both modes and tabulate")
    args = parser.parse_args(argv)
    return run_compare(args) if args.compare else run_single(args)


if __name__ == "__main__":
    sys.exit(main())
