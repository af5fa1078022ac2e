#!/usr/bin/env python3
"""Benchmark the compiled solver kernels against the pure-numpy fallback.

Times each kernel on a representative per-frame workload and checks that
both backends agree on the answers. Run from the repo root:

    python benchmarks/bench_backends.py --frames 2000
"""

import argparse
import math
import time

import numpy as np

from vlpsim._backend import available_backends, get_kernels

ANCHORS = np.array([[0.25, 1.0, 0.0], [1.0, 1.75, 0.0], [1.75, 1.0, 0.0], [1.0, 0.25, 0.0]])
M = 14.0
COEFFS = np.full(4, 4.7 * 5.2e-6 * (M + 1.0) / (2 * math.pi))


def make_frames(n, seed=0):
    rng = np.random.default_rng(seed)
    pos = np.column_stack(
        [rng.uniform(0.5, 1.5, n), rng.uniform(0.5, 1.5, n), rng.uniform(0.9, 1.8, n)]
    )
    tilts = rng.uniform(-0.1, 0.1, (n, 2))
    powers = np.empty((n, 4))
    for i in range(n):
        d = np.linalg.norm(ANCHORS - pos[i], axis=1)
        h = np.abs(pos[i, 2] - ANCHORS[:, 2])
        powers[i] = COEFFS * h ** (M + 1.0) / d ** (M + 3.0)
    return pos, tilts, powers


def bench(kern, name, frames, pso_frames):
    pos, tilts, powers = frames
    n = len(pos)
    results = {}

    t0 = time.perf_counter()
    acc = 0.0
    for i in range(n):
        x, y, z, r, e, ok = kern.firefly_solve(
            ANCHORS, COEFFS, powers[i], M, pos[i, 2], tilts[i, 0], tilts[i, 1]
        )
        acc += x + y
    results["firefly_solve"] = (time.perf_counter() - t0) / n, acc

    t0 = time.perf_counter()
    acc = 0.0
    for i in range(n):
        x, y, z, c, e, ok = kern.indirect_h_solve(ANCHORS, COEFFS, powers[i], M, 0.0, 2.0, 1e-3, 1)
        acc += z
    results["indirect_fast"] = (time.perf_counter() - t0) / n, acc

    n_full = max(n // 20, 1)
    t0 = time.perf_counter()
    acc = 0.0
    for i in range(n_full):
        x, y, z, c, e, ok = kern.indirect_h_solve(ANCHORS, COEFFS, powers[i], M, 0.0, 2.0, 1e-3, 0)
        acc += z
    results["indirect_full"] = (time.perf_counter() - t0) / n_full, acc

    pos_p, tilts_p, powers_p, u_inits, u_steps = pso_frames
    t0 = time.perf_counter()
    acc = 0.0
    lo, hi = np.zeros(3), np.full(3, 2.0)
    for i in range(len(pos_p)):
        x, y, z, c, e = kern.pso_solve(
            ANCHORS, COEFFS, powers_p[i], M, lo, hi, u_inits[i], u_steps[i], 0.72, 1.49, 1.49
        )
        acc += x + y + z
    results["pso_solve"] = (time.perf_counter() - t0) / len(pos_p), acc
    return results


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--frames", type=int, default=2000, help="frames per kernel")
    parser.add_argument("--pso-frames", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    backends = available_backends()
    print(f"available backends: {', '.join(backends)}")
    frames = make_frames(args.frames, args.seed)

    rng = np.random.default_rng(args.seed + 1)
    pos_p, tilts_p, powers_p = make_frames(args.pso_frames, args.seed + 2)
    u_inits = rng.random((args.pso_frames, 200, 3))
    u_steps = rng.random((args.pso_frames, 19, 200, 6))
    pso_frames = (pos_p, tilts_p, powers_p, u_inits, u_steps)

    all_results = {}
    for name in backends:
        all_results[name] = bench(get_kernels(name), name, frames, pso_frames)

    print(f"\n{'kernel':<16}" + "".join(f"{b + ' (ms)':>16}" for b in backends) + f"{'speedup':>10}")
    for kernel in ("firefly_solve", "indirect_fast", "indirect_full", "pso_solve"):
        times = [all_results[b][kernel][0] * 1e3 for b in backends]
        row = f"{kernel:<16}" + "".join(f"{t:16.4f}" for t in times)
        if len(times) == 2:
            row += f"{times[1] / times[0]:9.1f}x"
        print(row)

    if len(backends) == 2:
        ok = True
        for kernel in ("firefly_solve", "indirect_fast", "indirect_full", "pso_solve"):
            a = all_results[backends[0]][kernel][1]
            b = all_results[backends[1]][kernel][1]
            if not math.isclose(a, b, rel_tol=1e-6, abs_tol=1e-6):
                print(f"MISMATCH in {kernel}: {a} vs {b}")
                ok = False
        print("\nbackend agreement:", "OK" if ok else "FAILED")
        return 0 if ok else 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
