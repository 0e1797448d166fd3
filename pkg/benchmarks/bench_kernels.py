"""Compare the numba and numpy residual/Jacobian kernels, and a full loop track.

Usage: python benchmarks/bench_kernels.py [--repeat N]

The kernel timings call both implementations in one process.  The loop
timing runs in two subprocesses so that ``PERFID_DISABLE_NUMBA`` takes
effect at import time.
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from perfid import _accel
from perfid._kernels import Layout, residual_jacobian_numba, residual_jacobian_numpy
from perfid.formats import expected_generic_rank, parse_format
from perfid.tensors import evaluate, random_decomposition

FORMATS = ["2,2,2,3", "3,4,5", "2,2,3,4", "sym3:3,2,2", "2,2,4,5"]

LOOP_SNIPPET = """
import time, numpy as np
from perfid.formats import parse_format
from perfid.monodromy import initial_state, track_loop
from perfid.system import make_loop
st = initial_state(parse_format('3,4,5'), seed=1)
loops = [make_loop(st.target, np.random.SeedSequence([9, i])) for i in range(3)]
track_loop(st.system, loops[0], st.known_orbits[0])  # warm-up / jit
t0 = time.perf_counter()
for L in loops:
    track_loop(st.system, L, st.known_orbits[0])
print((time.perf_counter() - t0) / len(loops))
"""


def bench_kernels(repeat: int) -> None:
    print(f"{'format':<12} {'vars':>5} {'numba [us]':>11} {'numpy [us]':>11} {'speedup':>8}")
    for name in FORMATS:
        fmt = parse_format(name)
        r = int(expected_generic_rank(fmt))
        dec = random_decomposition(fmt, r, 0)
        lay = Layout(fmt, r, dec.patches)
        x = np.concatenate([np.concatenate(([t.lam],) + t.vectors) for t in dec.terms])
        target = evaluate(dec).coeffs
        if _accel.NUMBA_ENABLED:
            residual_jacobian_numba(lay, x, target)
            t_nb = min(timeit.repeat(lambda: residual_jacobian_numba(lay, x, target), number=repeat, repeat=3))
            t_nb = t_nb / repeat * 1e6
        else:
            t_nb = float("nan")
        t_np = min(timeit.repeat(lambda: residual_jacobian_numpy(lay, x, target), number=repeat, repeat=3))
        t_np = t_np / repeat * 1e6
        print(f"{name:<12} {lay.n_vars:>5} {t_nb:>11.1f} {t_np:>11.1f} {t_np / t_nb:>8.1f}")


def bench_loop() -> None:
    print("\none triangle loop on 3,4,5 (mean of 3):")
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, PERFID_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", LOOP_SNIPPET], env=env, capture_output=True,
                             text=True, check=True)
        print(f"  {label:<6} {float(out.stdout.strip()):.3f} s")


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--skip-loop", action="store_true")
    args = ap.parse_args()
    print(f"numba available: {_accel.NUMBA_ENABLED}\n")
    bench_kernels(args.repeat)
    if not args.skip_loop:
        bench_loop()


if __name__ == "__main__":
    main()
