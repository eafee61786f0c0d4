#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-Python/NumPy fallback.

Each workload runs in two subprocesses, one with KOOPCTL_NO_NUMBA=1, so the
module-level path selection is exercised exactly as a user would hit it.
Reports wall time per path, the speedup, and a numerical agreement check.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import json
import os
import subprocess
import sys

_WORKER = r"""
import json
import time

import numpy as np

from koopctl import kernels

repeat = {repeat}


def timed(fn, *args):
    fn(*args)  # warm-up (JIT compile on the numba path)
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out

results = {{"numba": kernels.NUMBA_ENABLED}}

t, (states, n) = timed(kernels.henon_orbit, 0.1, 0.1, 1.4, 0.3, 1_000_000)
results["henon_orbit_1e6"] = {{"time": t, "checksum": float(states[:n].sum())}}

t, (states, n) = timed(kernels.vdp_orbit, 0.5, 0.5, 1.0, 0.01, 100_000)
results["vdp_orbit_1e5"] = {{"time": t, "checksum": float(states[:n].sum())}}

exps = np.array(
    [[1,0],[0,1],[2,0],[1,1],[0,2],[3,0],[2,1],[1,2],[0,3],
     [4,0],[3,1],[2,2],[1,3],[0,4],[5,0],[4,1],[3,2],[2,3],[1,4],[0,5]],
    dtype=np.int64)
kw = np.zeros(20); kw[0] = -0.39; kw[1] = -2.66
t, (states, inputs, n) = timed(
    kernels.vdp_closed_loop, 1e-5, 0.0, 1.0, 0.01, 50_000, exps, kw,
    -np.inf, np.inf)
results["vdp_closed_loop_5e4"] = {{"time": t, "checksum": float(states[:n].sum())}}

kw_h = np.array([-0.3, -0.3, 0.0, 0.0, 0.0])
exps_h = exps[:5]
t, (states, inputs, n) = timed(
    kernels.henon_closed_loop, 0.1, 0.05, 1.4, 0.3, 200_000, exps_h, kw_h,
    -np.inf, np.inf)
results["henon_closed_loop_2e5"] = {{"time": t, "checksum": float(states[:n].sum())}}

X = np.random.default_rng(0).uniform(-2, 2, size=(20_000, 2))
t, lifted = timed(kernels.lift_batch, X, exps)
results["lift_batch_20000x20"] = {{"time": t, "checksum": float(lifted.sum())}}

states, _ = kernels.henon_orbit(0.1, 0.1, 1.4, 0.3, 1_000_000)
t, (counts, overflow) = timed(
    kernels.histogram2d_loop, states, -2.0, 2.0, -1.0, 1.0, 160, 120)
results["histogram_1e6"] = {{"time": t, "checksum": float(counts.sum())}}

print(json.dumps(results))
"""


def run_worker(no_numba, repeat):
    env = dict(os.environ)
    env["KOOPCTL_NO_NUMBA"] = "1" if no_numba else "0"
    proc = subprocess.run(
        [sys.executable, "-c", _WORKER.format(repeat=repeat)],
        capture_output=True,
        text=True,
        env=env,
        check=True,
    )
    return json.loads(proc.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    print("compiling / timing the numba path ...")
    fast = run_worker(no_numba=False, repeat=args.repeat)
    print("timing the fallback path (KOOPCTL_NO_NUMBA=1) ...")
    slow = run_worker(no_numba=True, repeat=args.repeat)

    print(f"\nnumba enabled: {fast['numba']}; fallback enabled: {not slow['numba']}")
    header = f"{'workload':<26}{'numba [s]':>12}{'fallback [s]':>14}{'speedup':>10}  agree"
    print(header)
    print("-" * len(header))
    for key in fast:
        if key == "numba":
            continue
        tf = fast[key]["time"]
        ts = slow[key]["time"]
        cf = fast[key]["checksum"]
        cs = slow[key]["checksum"]
        agree = abs(cf - cs) <= 1e-9 * max(1.0, abs(cf), abs(cs))
        print(
            f"{key:<26}{tf:>12.4f}{ts:>14.4f}{ts / tf:>10.1f}x  "
            f"{'yes' if agree else 'NO'}"
        )


if __name__ == "__main__":
    main()
