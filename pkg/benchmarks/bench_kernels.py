"""Time the numba kernels against their numpy counterparts.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from emsphere import _kernels
from emsphere.geometry import round_reference
from emsphere.grid import build_grid
from emsphere.sigma import make_sigma, normalize_weight


def best_of(fn, repeat):
    fn()  # compile / warm up
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases():
    g = build_grid(64)
    ref = round_reference(g)
    mu = g.nodes
    x = np.linspace(-1, 1, 20001)
    vals = np.exp(mu)
    yield "barycentric_eval (65 nodes, 20001 points)", (
        lambda: _kernels.barycentric_eval_numpy(g.nodes, g.bary_weights, vals, x),
        lambda: _kernels.barycentric_eval_numba(g.nodes, g.bary_weights, vals, x),
    )
    mono = mu + 0.1 * np.sin(np.pi * mu) / np.pi
    dmono = g.d(mono)
    targets = np.linspace(-1, 1, 5001)
    yield "invert_monotone (65 nodes, 5001 targets)", (
        lambda: _kernels.invert_monotone_numpy(g.nodes, g.bary_weights, mono, dmono, targets),
        lambda: _kernels.invert_monotone_numba(g.nodes, g.bary_weights, mono, dmono, targets),
    )
    sig = normalize_weight(make_sigma("quad:0.5"), ref)
    coeffs, lam, c_log = sig.kernel_params()
    args = (g.diff_op, ref.psi, ref.h, ref.u, coeffs, lam, c_log, np.zeros(g.size), 1e-3, 1000)
    yield "flow_rk4 (65 nodes, 1000 steps)", (
        lambda: _kernels.flow_rk4_numpy(*args),
        lambda: _kernels.flow_rk4_numba(*args),
    )


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    if not _kernels.HAS_NUMBA:
        raise SystemExit("numba is not importable")
    print(f"{'kernel':45s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name, (slow, fast) in cases():
        a = best_of(slow, args.repeat)
        b = best_of(fast, args.repeat)
        print(f"{name:45s} {1e3 * a:10.2f} {1e3 * b:10.2f} {a / b:8.1f}")


if __name__ == "__main__":
    main()
