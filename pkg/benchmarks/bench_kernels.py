"""Time the numba-compiled kernels against their pure-numpy fallbacks.

Run:  python benchmarks/bench_kernels.py [--size 2000000] [--repeats 7]

These four kernels carry the hot loops of the Monte Carlo error metrics and
partition integrands; everything else in the package is thin numpy on top.
The same comparison can be forced at the package level with T3_NUMBA=0.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from t3 import _kernels as K

CASES = [
    ("gauss_logpdf", "gauss_logpdf_numpy", lambda z: (z, 0.3, 0.7)),
    (
        "mix2_gauss_logpdf",
        "mix2_gauss_logpdf_numpy",
        lambda z: (z, math.log(0.9), 1.0, 1.0, math.log(0.1), 0.0, 1e-3),
    ),
    ("quad_sigmoid", "quad_sigmoid_numpy", lambda z: (z, 0.5, -1.2, 2.0)),
    ("quad_logsigmoid", "quad_logsigmoid_numpy", lambda z: (z, 0.5, -1.2, -2.0)),
]


def best_of(fn, args, repeats: int) -> float:
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=2_000_000)
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    if not K.NUMBA_ENABLED:
        print("numba path is disabled (missing numba or T3_NUMBA=0); nothing to compare")
        return 1

    rng = np.random.default_rng(0)
    z = rng.normal(0.0, 2.0, size=args.size)

    print(f"array size {args.size:,}, best of {args.repeats} runs")
    print(f"{'kernel':<22}{'numpy':>12}{'numba':>12}{'speedup':>10}{'max |diff|':>14}")
    for nb_name, np_name, make_args in CASES:
        nb_fn = getattr(K, nb_name + "_nb")
        np_fn = getattr(K, np_name)
        call_args = make_args(z)
        nb_fn(*call_args)  # trigger compilation outside the timed region
        t_np = best_of(np_fn, call_args, args.repeats)
        t_nb = best_of(nb_fn, call_args, args.repeats)
        diff = float(np.max(np.abs(np_fn(*call_args) - nb_fn(*call_args))))
        print(
            f"{nb_name:<22}{t_np * 1e3:>10.2f}ms{t_nb * 1e3:>10.2f}ms"
            f"{t_np / t_nb:>9.2f}x{diff:>14.2e}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
