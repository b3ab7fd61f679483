#!/usr/bin/env python3
"""Time each hot kernel's jitted loop variant against its numpy fallback.

Every kernel ships in two interchangeable implementations: a scalar loop
compiled by numba (the default) and a vectorised numpy fallback selected
by VADKIT_DISABLE_NUMBA. This script times both on deployment-shaped
workloads and cross-checks that they agree, so the fallback can be
trusted and the cost of disabling the compiler is known.

Usage: python benchmarks/bench_kernels.py [--repeats N] [--csv PATH]
"""

from __future__ import annotations

import argparse
import timeit
from pathlib import Path

import numpy as np

from vadkit import accel
from vadkit.kernels import assignment, lstm, resize, sepconv
from vadkit.suppress import gaussian_kernel


def _best_ms(call, repeats: int) -> float:
    timer = timeit.Timer(call)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeats, number=number)) / number * 1e3


def _max_diff(a, b) -> float:
    if isinstance(a, tuple):
        return max(_max_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a, dtype=np.float64) -
                               np.asarray(b, dtype=np.float64))))


def _workloads():
    rng = np.random.default_rng(0)

    frame = rng.uniform(0, 255, (240, 320, 3))
    kernel = gaussian_kernel(51, 0.0)
    yield ("sepconv", "240x320x3 frame, k=51",
           lambda: sepconv._sepconv_loops(frame, kernel),
           lambda: sepconv._sepconv_numpy(frame, kernel))

    yield ("resize", "240x320x3 -> 224x224",
           lambda: resize._resize_loops(frame, 224, 224),
           lambda: resize._resize_numpy(frame, 224, 224))

    # _solve_core requires rows <= cols; solve_assignment transposes for it.
    costs = [rng.normal(0, 10, (10, 12)) for _ in range(50)]
    plain_solve = getattr(assignment._solve_core, "py_func",
                          assignment._solve_core)

    def _solve_all(core):
        return tuple(core(np.ascontiguousarray(c)).astype(np.float64)
                     for c in costs)

    yield ("assignment", "50 matrices 10x12",
           lambda: _solve_all(assignment._solve_core),
           lambda: _solve_all(plain_solve))

    t_len, dim, units = 32, 2048, 256
    x = rng.normal(0, 1, (t_len, dim)).astype(np.float32)
    w = (rng.normal(0, 0.02, (4 * units, dim))).astype(np.float32)
    u = (rng.normal(0, 0.02, (4 * units, units))).astype(np.float32)
    b = np.zeros(4 * units, dtype=np.float32)
    in_mask = np.ones(dim, dtype=np.float32)
    rec_mask = np.ones(units, dtype=np.float32)
    yield ("lstm fwd", f"T={t_len}, D={dim}, {units} units",
           lambda: lstm._lstm_forward_loops(x, w, u, b, in_mask, rec_mask),
           lambda: lstm._lstm_forward_numpy(x, w, u, b, in_mask, rec_mask))

    h_seq, c_seq, gates = lstm._lstm_forward_numpy(x, w, u, b, in_mask,
                                                   rec_mask)
    d_h = rng.normal(0, 1, h_seq.shape).astype(np.float32)
    yield ("lstm bwd", f"T={t_len}, D={dim}, {units} units",
           lambda: lstm._lstm_backward_loops(x, w, u, in_mask, rec_mask,
                                             h_seq, c_seq, gates, d_h),
           lambda: lstm._lstm_backward_numpy(x, w, u, in_mask, rec_mask,
                                             h_seq, c_seq, gates, d_h))


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats per variant (best is kept)")
    parser.add_argument("--csv", type=Path, default=None,
                        help="also write the results as CSV")
    args = parser.parse_args()

    if accel.NUMBA_ENABLED:
        accel.warmup()
        jit_label = "jit ms"
    else:
        print("VADKIT_DISABLE_NUMBA is set: the loop variants would run "
              "interpreted (minutes per call), so only the numpy fallback "
              "is timed. Unset the variable to compare both.")
        jit_label = None

    header = f"{'kernel':<12} {'workload':<26} "
    if jit_label:
        header += f"{jit_label:>10} {'numpy ms':>10} {'speedup':>8} {'max|diff|':>10}"
    else:
        header += f"{'numpy ms':>10}"
    print(header)
    print("-" * len(header))

    rows = []
    for name, workload, loops_call, numpy_call in _workloads():
        numpy_ms = _best_ms(numpy_call, args.repeats)
        if jit_label:
            diff = _max_diff(loops_call(), numpy_call())
            jit_ms = _best_ms(loops_call, args.repeats)
            speedup = numpy_ms / jit_ms
            print(f"{name:<12} {workload:<26} {jit_ms:>10.3f} "
                  f"{numpy_ms:>10.3f} {speedup:>7.1f}x {diff:>10.2e}")
            rows.append((name, workload, f"{jit_ms:.6f}", f"{numpy_ms:.6f}",
                         f"{speedup:.3f}", f"{diff:.3e}"))
        else:
            print(f"{name:<12} {workload:<26} {numpy_ms:>10.3f}")
            rows.append((name, workload, "", f"{numpy_ms:.6f}", "", ""))

    if args.csv:
        lines = ["kernel,workload,jit_ms,numpy_ms,speedup,max_diff"]
        lines += [",".join(f'"{f}"' if "," in f else f for f in row)
                  for row in rows]
        args.csv.write_text("\n".join(lines) + "\n")
        print(f"\nwrote {args.csv}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
