"""Compare the compiled and pure-Python kernel backends.

Usage: python benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import time

import numpy as np

from qutritlab import kernels
from qutritlab.core import make_pentagram


def _best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(backend, rng):
    n = kernels.n_params(3)
    xs = rng.uniform(0, 2 * np.pi, (2000, n))
    x0 = rng.uniform(0, 2 * np.pi, n)
    pent = make_pentagram()
    states = np.tile(pent.test_state.amplitudes, (20000, 1))
    firsts = np.tile(pent.vectors()[0], (20000, 1))
    seconds = np.tile(pent.vectors()[1], (20000, 1))
    return {
        "objective x2000": lambda: [backend.pentagon_objective(x, 3, kernels.KCBS, 10.0) for x in xs],
        "nelder-mead restart (5000 evals)": lambda: backend.minimize_pentagon(
            x0, 3, kernels.KCBS, 10.0, 0.3, 5000),
        "batch_joint x20000": lambda: backend.batch_joint(states, firsts, seconds),
    }


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()
    if kernels.compiled is None:
        print("compiled backend unavailable; timing the pure-Python backend only")
    rows = []
    for name in cases(kernels.pure, np.random.default_rng(0)):
        pure_t = _best_of(cases(kernels.pure, np.random.default_rng(0))[name], args.repeat)
        comp_t = None
        if kernels.compiled is not None:
            comp_t = _best_of(cases(kernels.compiled, np.random.default_rng(0))[name], args.repeat)
        rows.append((name, pure_t, comp_t))
    print(f"{'case':36s} {'python [s]':>11s} {'compiled [s]':>13s} {'speedup':>8s}")
    for name, pt, ct in rows:
        if ct is None:
            print(f"{name:36s} {pt:11.4f} {'-':>13s} {'-':>8s}")
        else:
            print(f"{name:36s} {pt:11.4f} {ct:13.5f} {pt / ct:7.1f}x")


if __name__ == "__main__":
    main()
