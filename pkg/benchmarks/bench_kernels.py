"""Time the numba kernels against their numpy fallbacks on a shipped example.

    python benchmarks/bench_kernels.py [--steps N] [--example NAME] [--repeat R]
"""
import argparse
import time

import numpy as np
import scipy.linalg as sla

from gfmnet import _kernels
from gfmnet.examples import load_example
from gfmnet.stability import certify


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--example", default="feeder_multi")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    doc = load_example(args.example)
    cl = certify(doc.model, doc.converters).closed_loop
    A = cl.J_cl_red
    d = A.shape[0]
    dt = 1e-3
    rng = np.random.default_rng(0)
    x0 = rng.normal(size=d)
    u = rng.normal(size=d) * 1e-3
    aug = np.zeros((2 * d, 2 * d))
    aug[:d, :d] = A * dt
    aug[:d, d:] = np.eye(d) * dt
    ex = sla.expm(aug)
    Phi, c = ex[:d, :d], ex[:d, d:] @ u
    theta, v, P, Q = (rng.normal(size=(args.steps, 3)) * 1e-2 for _ in range(4))

    cases = {
        "affine_steps": lambda b: _kernels.affine_steps(Phi, c, x0, args.steps, b),
        "rk4_steps": lambda b: _kernels.rk4_steps(A, u, x0, dt, args.steps, b),
        "unbalance_series": lambda b: _kernels.unbalance_series(theta, v, P, Q, b),
    }
    print(f"example={args.example} state_dim={d} steps={args.steps} repeat={args.repeat}")
    print(f"{'kernel':<18}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}{'max |diff|':>14}")
    for name, fn in cases.items():
        fn("numba")  # compile outside the timed region
        ref, fast = fn("numpy"), fn("numba")
        diff = max(float(np.nanmax(np.abs(np.asarray(a, float) - np.asarray(b, float)))) for a, b in
                   zip(ref if isinstance(ref, tuple) else (ref,), fast if isinstance(fast, tuple) else (fast,)))
        t_np = best_of(lambda: fn("numpy"), args.repeat)
        t_nb = best_of(lambda: fn("numba"), args.repeat)
        print(f"{name:<18}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>10.1f}{diff:>14.2e}")


if __name__ == "__main__":
    main()
