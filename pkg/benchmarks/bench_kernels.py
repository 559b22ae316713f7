"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel with both timings and the speed-up, after
checking that the two backends return identical results.
"""

import argparse
import time

import numpy as np

from cdfchaos import kernels
from cdfchaos.flux import drift_coefficients, make_builtin_flux
from cdfchaos.spectral import build_q_matrix, _bracket_start


def _rank_case():
    rng = np.random.default_rng(0)
    reps, n, steps = 25, 400, 200
    x0 = rng.standard_normal((reps, n))
    xi = rng.standard_normal((steps, reps, n))
    a = drift_coefficients(make_builtin_flux("burgers"), n)

    def run(mod):
        x = x0.copy()
        order = np.ascontiguousarray(np.argsort(x, axis=1, kind="stable").astype(np.int64))
        for k in range(steps):
            mod.rank_step(x, a, xi[k], 0.0316, 1e-3, order)
        return x

    return f"rank_step {reps}x{n}, {steps} steps", run


def _pde_case():
    x = np.linspace(-30, 30, 6001)
    f = 0.5 * (1 + np.tanh(x))
    f[0], f[-1] = 0.0, 1.0
    coeffs = np.array([0.0, -0.5, 0.5])
    return "pde_run 6001 nodes, 2000 steps", lambda mod: mod.pde_run(f, coeffs, 0.45, 0.0045, 2000)


def _bisect_case():
    mats = [build_q_matrix(n) for n in range(2, 401)]
    starts = [_bracket_start(t) for t in mats]
    args = ([t.d for t in mats], [t.e * t.e for t in mats], [s[0] for s in starts], [s[1] for s in starts], 1e-13)
    return "bisect_smallest_many n=2..400", lambda mod: np.concatenate(mod.bisect_smallest_many(*args))


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if kernels.compiled is None:
        print("compiled extension not available; nothing to compare")
        return 1
    print(f"{'kernel':38s} {'python [s]':>11s} {'compiled [s]':>13s} {'speed-up':>9s}  identical")
    for name, run in (_rank_case(), _pde_case(), _bisect_case()):
        tp, outp = best_of(lambda: run(kernels.fallback), args.repeat)
        tc, outc = best_of(lambda: run(kernels.compiled), args.repeat)
        print(f"{name:38s} {tp:11.4f} {tc:13.4f} {tp / tc:8.1f}x  {np.array_equal(outp, outc)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
