"""Compare the compiled kernels with the pure-Python fallback.

Run with ``python3 benchmarks/bench_kernels.py``.  Prints one line per
kernel with the median wall time of each backend, the speed-up and the
largest difference between the two results.
"""

from __future__ import annotations

import argparse
import math
import statistics
import time

import numpy as np

from frank_defect import _kernels_py

try:
    from frank_defect import _kernels as _kernels_c
except ImportError:  # extension not built
    _kernels_c = None


def _median_time(func, repeat):
    times = []
    result = None
    for _ in range(repeat):
        start = time.perf_counter()
        result = func()
        times.append(time.perf_counter() - start)
    return statistics.median(times), result


def _cases(n_states: int, seed: int):
    k1, k3 = 4.0, 1.0
    theta = np.linspace(0.0, math.pi, 515)[1:-1]
    x = np.log(np.tan(0.5 * theta))
    right = x[x > 0.0]
    w0 = math.log(math.tan(0.5))

    def integrate(mod):
        return mod.integrate_log_profile(
            k1, k3, 1.0, 0.0, w0, right, 1e-13, 1e-13, 1e-13, 80.0, 200000
        )[0]

    x_from = np.linspace(-3.0, 3.0, 400)
    w_from = np.sin(x_from)
    x_to = x_from + 0.01

    def cont(mod):
        return mod.continue_log_profile(k1, k3, 1.0, x_from, w_from, x_to, 1e-13, 1e-15)

    rng = np.random.default_rng(seed)
    u = rng.normal(size=(n_states, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    grad = rng.normal(size=(n_states, 3, 3))

    def density(mod):
        return mod.frank_density(u, grad, 1.0, 2.0, 3.0, -2.0)

    xs = rng.uniform(-5.0, 5.0, 2000)
    ws = rng.uniform(-3.0, 3.0, 2000)

    def rhs(mod):
        return np.array([mod.profile_rhs(a, b, k1, k3, -1.0) for a, b in zip(xs, ws)])

    return {
        "integrate_log_profile": integrate,
        "continue_log_profile": cont,
        "frank_density": density,
        "profile_rhs (scalar calls)": rhs,
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--states", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if _kernels_c is None:
        print("compiled extension not available; only the fallback can run")
    print(f"{'kernel':30s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speed-up':>9s} {'max diff':>10s}")
    for name, case in _cases(args.states, args.seed).items():
        t_py, r_py = _median_time(lambda: case(_kernels_py), args.repeat)
        if _kernels_c is None:
            print(f"{name:30s} {1e3 * t_py:12.3f}")
            continue
        t_c, r_c = _median_time(lambda: case(_kernels_c), args.repeat)
        diff = float(np.max(np.abs(np.asarray(r_py) - np.asarray(r_c))))
        print(f"{name:30s} {1e3 * t_py:12.3f} {1e3 * t_c:12.3f} {t_py / t_c:9.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
